//! Projection and test function families.
//!
//! The projection basis is the monomial dictionary over multi-indices of
//! bounded max degree. Test bases are L2-orthonormal families on an interval:
//! shifted Legendre polynomials or the truncated Fourier basis.

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Exponent vector of a multivariate monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn max_degree(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    fn grlex_key(&self) -> (u32, &[u32]) {
        (self.total_degree(), &self.0)
    }
}

/// Monomial dictionary spanning all exponent vectors with every component
/// at most `max_degree`, over an `dimension`-dimensional state.
///
/// Enumeration is graded lexicographic: ascending total degree, ties broken
/// by ascending lexicographic comparison of the exponent vectors. The flat
/// index is a bijection onto the `(max_degree + 1)^dimension` multi-indices.
#[derive(Debug, Clone)]
pub struct ProjectionBasis {
    max_degree: u32,
    dimension: usize,
    domain_box: Vec<(f64, f64)>,
    indices: Vec<MultiIndex>,
}

impl ProjectionBasis {
    /// Monomials of max degree `max_degree` on the given per-component box.
    pub fn monomials(max_degree: u32, domain_box: Vec<(f64, f64)>) -> Result<Self> {
        let dimension = domain_box.len();
        if dimension == 0 {
            return Err(Error::ShapeMismatch("empty domain box".into()));
        }
        for &(lo, hi) in &domain_box {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::IncompatibleDomain(format!(
                    "degenerate box component [{lo}, {hi}]"
                )));
            }
        }
        let base = max_degree as usize + 1;
        let count = base.pow(dimension as u32);
        let mut indices = Vec::with_capacity(count);
        for flat in 0..count {
            let mut rem = flat;
            let mut exps = vec![0u32; dimension];
            for slot in exps.iter_mut().rev() {
                *slot = (rem % base) as u32;
                rem /= base;
            }
            indices.push(MultiIndex(exps));
        }
        Ok(Self::from_parts(max_degree, dimension, domain_box, indices))
    }

    fn from_parts(
        max_degree: u32,
        dimension: usize,
        domain_box: Vec<(f64, f64)>,
        mut indices: Vec<MultiIndex>,
    ) -> Self {
        indices.sort_by(|a, b| a.grlex_key().cmp(&b.grlex_key()));
        Self { max_degree, dimension, domain_box, indices }
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn domain_box(&self) -> &[(f64, f64)] {
        &self.domain_box
    }

    /// Number of dictionary functions, `(max_degree + 1)^dimension`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn multi_index(&self, flat: usize) -> Result<&MultiIndex> {
        self.indices.get(flat).ok_or(Error::IndexOutOfRange {
            index: flat,
            size: self.indices.len(),
        })
    }

    pub fn index_of(&self, j: &MultiIndex) -> Result<usize> {
        self.indices
            .binary_search_by(|probe| probe.grlex_key().cmp(&j.grlex_key()))
            .map_err(|_| Error::IndexOutOfRange {
                index: usize::MAX,
                size: self.indices.len(),
            })
    }

    pub fn multi_indices(&self) -> impl Iterator<Item = &MultiIndex> {
        self.indices.iter()
    }

    /// Evaluate the monomial with exponents `j` at state `x`.
    pub fn eval(&self, j: &MultiIndex, x: &[f64]) -> Result<f64> {
        if j.0.len() != self.dimension || x.len() != self.dimension {
            return Err(Error::ShapeMismatch(format!(
                "multi-index of length {} and state of length {} for dimension {}",
                j.0.len(),
                x.len(),
                self.dimension
            )));
        }
        if j.max_degree() > self.max_degree {
            return Err(Error::DegreeOutOfRange {
                exponent: j.max_degree(),
                max_degree: self.max_degree,
            });
        }
        Ok(j.0
            .iter()
            .zip(x)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product())
    }

    /// Evaluate by flat index.
    pub fn eval_flat(&self, flat: usize, x: &[f64]) -> Result<f64> {
        let j = self.multi_index(flat)?;
        if x.len() != self.dimension {
            return Err(Error::ShapeMismatch(format!(
                "state of length {} for dimension {}",
                x.len(),
                self.dimension
            )));
        }
        Ok(j.0
            .iter()
            .zip(x)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product())
    }

    /// Partial derivative of the `flat`-th monomial with respect to `x[axis]`.
    pub fn eval_partial(&self, flat: usize, x: &[f64], axis: usize) -> Result<f64> {
        let j = self.multi_index(flat)?;
        if axis >= self.dimension {
            return Err(Error::IndexOutOfRange { index: axis, size: self.dimension });
        }
        let e = j.0[axis];
        if e == 0 {
            return Ok(0.0);
        }
        let mut value = e as f64 * x[axis].powi(e as i32 - 1);
        for (l, (&el, &xl)) in j.0.iter().zip(x).enumerate() {
            if l != axis {
                value *= xl.powi(el as i32);
            }
        }
        Ok(value)
    }

    /// Dictionary evaluated along sampled states: row m, column j holds
    /// monomial j at state row m.
    pub fn sample_matrix(&self, states: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if states.ncols() != self.dimension {
            return Err(Error::ShapeMismatch(format!(
                "states have {} components, basis dimension is {}",
                states.ncols(),
                self.dimension
            )));
        }
        let n = states.nrows();
        let mut phi = DMatrix::zeros(n, self.len());
        let mut x = vec![0.0; self.dimension];
        for m in 0..n {
            for (l, xl) in x.iter_mut().enumerate() {
                *xl = states[(m, l)];
            }
            for (jf, j) in self.indices.iter().enumerate() {
                phi[(m, jf)] = j.0.iter().zip(&x).map(|(&e, &xi)| xi.powi(e as i32)).product();
            }
        }
        Ok(phi)
    }
}

/// Orthonormal test family kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    Legendre,
    Fourier,
}

/// L2([a,b])-orthonormal test basis.
///
/// Legendre: `degree + 1` shifted, normalized Legendre polynomials.
/// Fourier: `2 * degree + 1` functions `{1} u {sqrt(2) cos(2 pi k tau)} u
/// {sqrt(2) sin(2 pi k tau)}` with `tau = (t - a)/(b - a)`, all scaled by
/// `1/sqrt(b - a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestBasis {
    kind: TestKind,
    degree: usize,
    interval: (f64, f64),
}

impl TestBasis {
    pub fn legendre(degree: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(TestKind::Legendre, degree, a, b)
    }

    pub fn fourier(degree: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(TestKind::Fourier, degree, a, b)
    }

    fn new(kind: TestKind, degree: usize, a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::IncompatibleDomain(format!(
                "invalid test interval [{a}, {b}]"
            )));
        }
        Ok(Self { kind, degree, interval: (a, b) })
    }

    pub fn kind(&self) -> TestKind {
        self.kind
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    /// Number of test functions.
    pub fn len(&self) -> usize {
        match self.kind {
            TestKind::Legendre => self.degree + 1,
            TestKind::Fourier => 2 * self.degree + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval(&self, k: usize, t: f64) -> Result<f64> {
        self.eval_pair(k, t).map(|(v, _)| v)
    }

    pub fn eval_derivative(&self, k: usize, t: f64) -> Result<f64> {
        self.eval_pair(k, t).map(|(_, d)| d)
    }

    /// Value and first derivative of the k-th test function at t.
    pub fn eval_pair(&self, k: usize, t: f64) -> Result<(f64, f64)> {
        if k >= self.len() {
            return Err(Error::IndexOutOfRange { index: k, size: self.len() });
        }
        let (a, b) = self.interval;
        let span = b - a;
        match self.kind {
            TestKind::Legendre => {
                let u = 2.0 * (t - a) / span - 1.0;
                let (p, dp) = legendre_pair(k, u);
                let scale = ((2 * k + 1) as f64 / span).sqrt();
                Ok((scale * p, scale * dp * 2.0 / span))
            }
            TestKind::Fourier => {
                if k == 0 {
                    return Ok((1.0 / span.sqrt(), 0.0));
                }
                let m = k.div_ceil(2) as f64;
                let tau = (t - a) / span;
                let angle = 2.0 * PI * m * tau;
                let amp = (2.0 / span).sqrt();
                let rate = 2.0 * PI * m / span;
                if k % 2 == 1 {
                    Ok((amp * angle.cos(), -amp * rate * angle.sin()))
                } else {
                    Ok((amp * angle.sin(), amp * rate * angle.cos()))
                }
            }
        }
    }

    /// All test functions sampled on a grid: row m, column k.
    pub fn sample_values(&self, grid: &UniformGrid) -> DMatrix<f64> {
        self.sample(grid, false)
    }

    /// All test-function derivatives sampled on a grid: row m, column k.
    pub fn sample_derivatives(&self, grid: &UniformGrid) -> DMatrix<f64> {
        self.sample(grid, true)
    }

    fn sample(&self, grid: &UniformGrid, derivative: bool) -> DMatrix<f64> {
        let n = grid.len();
        let mut out = DMatrix::zeros(n, self.len());
        for (m, t) in grid.points().enumerate() {
            for k in 0..self.len() {
                let (v, d) = self.eval_pair(k, t).expect("k < len by construction");
                out[(m, k)] = if derivative { d } else { v };
            }
        }
        out
    }
}

/// Legendre polynomial value and derivative at `u` in [-1, 1] via the
/// three-term and derivative recurrences.
fn legendre_pair(k: usize, u: f64) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, u);
    let (mut dp_prev, mut dp) = (0.0, 1.0);
    for n in 1..k {
        let nf = n as f64;
        let p_next = ((2.0 * nf + 1.0) * u * p - nf * p_prev) / (nf + 1.0);
        let dp_next = dp_prev + (2.0 * nf + 1.0) * p;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp)
}
