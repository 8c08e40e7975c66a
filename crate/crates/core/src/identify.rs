//! Assembly and solution of the identification linear systems.
//!
//! Three encoders produce a [`GramSystem`]: pointwise regression on supplied
//! derivatives, the weak form built from inner products against a test basis
//! (derivatives moved onto the test functions by integration by parts, with
//! boundary terms retained), and the occupation form whose right-hand side
//! comes from the fundamental theorem of calculus. A minimum-norm SVD solve
//! turns any of them into a [`SurrogateModel`]; encode-solve-decode is a
//! projection onto the dictionary span, which the tests exercise directly.

use crate::bases::{ProjectionBasis, TestBasis, TestKind};
use crate::error::{Error, Result};
use crate::fd;
use crate::grid::{SampledFunction, UniformGrid};
use nalgebra::DMatrix;

/// Relative singular-value cutoff for the minimum-norm least-squares solve.
pub const SINGULAR_VALUE_CUTOFF: f64 = 1e-12;

/// Tolerance for matching a test-basis interval against a trajectory span.
const INTERVAL_TOL: f64 = 1e-12;

/// Sampled state path on a uniform time grid, optionally with derivatives.
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: UniformGrid,
    states: DMatrix<f64>,
    derivatives: Option<DMatrix<f64>>,
}

impl Trajectory {
    pub fn new(grid: UniformGrid, states: DMatrix<f64>) -> Result<Self> {
        if states.nrows() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} state rows for a {}-point grid",
                states.nrows(),
                grid.len()
            )));
        }
        if states.ncols() == 0 {
            return Err(Error::ShapeMismatch("trajectory with zero components".into()));
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory states".into()));
        }
        Ok(Self { grid, states, derivatives: None })
    }

    pub fn with_derivatives(
        grid: UniformGrid,
        states: DMatrix<f64>,
        derivatives: DMatrix<f64>,
    ) -> Result<Self> {
        let mut traj = Self::new(grid, states)?;
        if derivatives.shape() != traj.states.shape() {
            return Err(Error::ShapeMismatch(
                "derivative array shape differs from states".into(),
            ));
        }
        if derivatives.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory derivatives".into()));
        }
        traj.derivatives = Some(derivatives);
        Ok(traj)
    }

    /// Scalar trajectory from a value sequence.
    pub fn scalar(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(grid, DMatrix::from_vec(n, 1, values))
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn derivatives(&self) -> Option<&DMatrix<f64>> {
        self.derivatives.as_ref()
    }

    /// Number of state components.
    pub fn dimension(&self) -> usize {
        self.states.ncols()
    }

    /// One state component as a sampled function of time.
    pub fn component(&self, i: usize) -> Result<SampledFunction> {
        if i >= self.dimension() {
            return Err(Error::IndexOutOfRange { index: i, size: self.dimension() });
        }
        SampledFunction::new(self.grid, self.states.column(i).iter().copied().collect())
    }

    /// Min/max of one state component.
    pub fn state_range(&self, i: usize) -> Result<(f64, f64)> {
        if i >= self.dimension() {
            return Err(Error::IndexOutOfRange { index: i, size: self.dimension() });
        }
        let col = self.states.column(i);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((lo, hi))
    }

    /// Per-component bounding box of the visited states, padded by
    /// `pad_fraction` of each range (at least a small absolute floor).
    pub fn state_box(&self, pad_fraction: f64) -> Result<Vec<(f64, f64)>> {
        (0..self.dimension())
            .map(|i| {
                let (lo, hi) = self.state_range(i)?;
                let pad = (pad_fraction * (hi - lo)).max(1e-9);
                Ok((lo - pad, hi + pad))
            })
            .collect()
    }

    /// Copy of this trajectory with derivatives estimated by fourth-order
    /// finite differences (one-sided stencils at the ends). Encoders never
    /// differentiate data on their own; callers opt in through this method.
    pub fn estimate_derivatives(&self) -> Result<Self> {
        let h = self.grid.step();
        let n = self.grid.len();
        let mut derivatives = DMatrix::zeros(n, self.dimension());
        for i in 0..self.dimension() {
            let values: Vec<f64> = self.states.column(i).iter().copied().collect();
            let d = fd::derivative_fourth_order(&values, h)?;
            for (m, dm) in d.into_iter().enumerate() {
                derivatives[(m, i)] = dm;
            }
        }
        Self::with_derivatives(self.grid, self.states.clone(), derivatives)
    }
}

/// Which encoder produced a linear system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodTag {
    Sindy,
    Weak,
    Occupation,
}

impl MethodTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodTag::Sindy => "sindy",
            MethodTag::Weak => "weak",
            MethodTag::Occupation => "occupation",
        }
    }
}

/// Matrix `G` and right-hand sides `b` (one column per state component) of an
/// identification system.
#[derive(Debug, Clone)]
pub struct GramSystem {
    g: DMatrix<f64>,
    b: DMatrix<f64>,
    method: MethodTag,
}

impl GramSystem {
    /// Build a system from an explicit matrix and right-hand side.
    pub fn from_parts(g: DMatrix<f64>, b: DMatrix<f64>, method: MethodTag) -> Result<Self> {
        Self::new(g, b, method)
    }

    fn new(g: DMatrix<f64>, b: DMatrix<f64>, method: MethodTag) -> Result<Self> {
        if g.nrows() != b.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "G has {} rows, b has {}",
                g.nrows(),
                b.nrows()
            )));
        }
        if g.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("assembled linear system".into()));
        }
        Ok(Self { g, b, method })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn rhs(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn method(&self) -> MethodTag {
        self.method
    }

    /// Frobenius norm of `G w - b` for candidate weights.
    pub fn residual(&self, weights: &DMatrix<f64>) -> f64 {
        (&self.g * weights - &self.b).norm()
    }
}

/// Minimum-norm least-squares solution with rank diagnostics.
#[derive(Debug, Clone)]
pub struct Solution {
    pub weights: DMatrix<f64>,
    /// Number of singular values above the relative cutoff.
    pub rank: usize,
    /// True when the system has fewer rows than columns, so the returned
    /// weights are the minimum-norm representative of a solution family.
    pub underdetermined: bool,
}

/// Minimum-norm least-squares solve of `G w = b` by SVD with relative
/// singular-value cutoff [`SINGULAR_VALUE_CUTOFF`].
pub fn solve(system: &GramSystem) -> Result<Solution> {
    solve_with_cutoff(system, SINGULAR_VALUE_CUTOFF)
}

/// Minimum-norm least-squares solve with an explicit relative cutoff.
///
/// Singular values at or below `rel_cutoff * sigma_max` are discarded.
/// Lowering the cutoff resolves steeper spectral decay before the
/// conditioning floor; raising it regularizes fits on nearly collinear
/// dictionaries. Callers that deviate from the default record the value in
/// their output metadata.
pub fn solve_with_cutoff(system: &GramSystem, rel_cutoff: f64) -> Result<Solution> {
    let g = system.g.clone();
    let (rows, cols) = g.shape();
    let svd = g.svd(true, true);
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = rel_cutoff * sigma_max;
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > cutoff)
        .count();
    let weights = if sigma_max == 0.0 {
        DMatrix::zeros(cols, system.b.ncols())
    } else {
        svd.solve(&system.b, cutoff)
            .map_err(|e| Error::Numeric(format!("SVD solve failed: {e}")))?
    };
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares solution".into()));
    }
    Ok(Solution { weights, rank, underdetermined: rows < cols })
}

/// Identification provenance carried by a fitted model.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub method: MethodTag,
    pub max_degree: u32,
    pub test_functions: usize,
    pub interval: (f64, f64),
    pub rank: usize,
    pub underdetermined: bool,
}

/// Per-component polynomial dynamics over a monomial dictionary.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    basis: ProjectionBasis,
    weights: DMatrix<f64>,
    provenance: Provenance,
}

impl SurrogateModel {
    pub fn new(
        basis: ProjectionBasis,
        weights: DMatrix<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if weights.nrows() != basis.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weight rows for a dictionary of size {}",
                weights.nrows(),
                basis.len()
            )));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model weights".into()));
        }
        Ok(Self { basis, weights, provenance })
    }

    pub fn basis(&self) -> &ProjectionBasis {
        &self.basis
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Number of output components.
    pub fn n_components(&self) -> usize {
        self.weights.ncols()
    }

    /// Evaluate component `i` at state `x`.
    pub fn eval_component(&self, i: usize, x: &[f64]) -> Result<f64> {
        if i >= self.n_components() {
            return Err(Error::IndexOutOfRange { index: i, size: self.n_components() });
        }
        let mut acc = 0.0;
        for j in 0..self.basis.len() {
            let w = self.weights[(j, i)];
            if w != 0.0 {
                acc += w * self.basis.eval_flat(j, x)?;
            }
        }
        Ok(acc)
    }

    /// Evaluate all components at state `x` into `out`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if out.len() != self.n_components() {
            return Err(Error::ShapeMismatch("output buffer length".into()));
        }
        out.fill(0.0);
        for j in 0..self.basis.len() {
            let phi = self.basis.eval_flat(j, x)?;
            for (i, slot) in out.iter_mut().enumerate() {
                *slot += self.weights[(j, i)] * phi;
            }
        }
        Ok(())
    }

    /// Jacobian entry `d p_i / d x_axis` at state `x`.
    pub fn partial(&self, i: usize, x: &[f64], axis: usize) -> Result<f64> {
        let mut acc = 0.0;
        for j in 0..self.basis.len() {
            let w = self.weights[(j, i)];
            if w != 0.0 {
                acc += w * self.basis.eval_partial(j, x, axis)?;
            }
        }
        Ok(acc)
    }

    /// Model evaluated along a trajectory: row m holds `p(x(t_m))`.
    pub fn sample_along(&self, traj: &Trajectory) -> Result<DMatrix<f64>> {
        let phi = self.basis.sample_matrix(traj.states())?;
        Ok(phi * &self.weights)
    }

    /// Component `i` composed with the trajectory, as a sampled function.
    pub fn compose_component(&self, traj: &Trajectory, i: usize) -> Result<SampledFunction> {
        if i >= self.n_components() {
            return Err(Error::IndexOutOfRange { index: i, size: self.n_components() });
        }
        let sampled = self.sample_along(traj)?;
        SampledFunction::new(*traj.grid(), sampled.column(i).iter().copied().collect())
    }
}

fn check_interval(test: &TestBasis, grid: &UniformGrid) -> Result<()> {
    let (a, b) = test.interval();
    let scale = grid.span().abs().max(1.0);
    if (a - grid.start()).abs() > INTERVAL_TOL * scale
        || (b - grid.stop()).abs() > INTERVAL_TOL * scale
    {
        return Err(Error::IncompatibleDomain(format!(
            "test interval [{a}, {b}] differs from trajectory span [{}, {}]",
            grid.start(),
            grid.stop()
        )));
    }
    Ok(())
}

/// Rows of `m` scaled by the quadrature weights of `grid`.
fn weighted(m: &DMatrix<f64>, grid: &UniformGrid) -> DMatrix<f64> {
    let w = grid.simpson_weights();
    let mut out = m.clone();
    for (r, wr) in w.iter().enumerate() {
        for c in 0..out.ncols() {
            out[(r, c)] *= wr;
        }
    }
    out
}

/// Weak-form system: `G[k][j] = <phi_j(x), psi_k>`, `b[k][i]` from
/// integration by parts with boundary terms retained.
pub fn encode_weak(
    traj: &Trajectory,
    proj: &ProjectionBasis,
    test: &TestBasis,
) -> Result<GramSystem> {
    encode_weak_opts(traj, proj, test, true)
}

/// Weak-form system with the integration-by-parts boundary terms optional.
/// With `ibp_boundary = false` the right-hand side reduces to
/// `-<x_i, dpsi_k/dt>`, which is only correct for test functions vanishing
/// at the interval ends.
pub fn encode_weak_opts(
    traj: &Trajectory,
    proj: &ProjectionBasis,
    test: &TestBasis,
    ibp_boundary: bool,
) -> Result<GramSystem> {
    check_interval(test, traj.grid())?;
    let grid = traj.grid();
    let phi = proj.sample_matrix(traj.states())?;
    let psi = test.sample_values(grid);
    let dpsi = test.sample_derivatives(grid);
    let g = psi.transpose() * weighted(&phi, grid);
    let mut b = -(dpsi.transpose() * weighted(traj.states(), grid));
    if ibp_boundary {
        let last = grid.len() - 1;
        for k in 0..test.len() {
            for i in 0..traj.dimension() {
                b[(k, i)] += traj.states()[(last, i)] * psi[(last, k)]
                    - traj.states()[(0, i)] * psi[(0, k)];
            }
        }
    }
    GramSystem::new(g, b, MethodTag::Weak)
}

/// Pointwise system: `G[m][j] = phi_j(x(t_m))`, `b[m][i] = dx_i/dt (t_m)`.
/// Requires derivative data on the trajectory; see
/// [`Trajectory::estimate_derivatives`] for the explicit opt-in estimator.
pub fn encode_sindy(traj: &Trajectory, proj: &ProjectionBasis) -> Result<GramSystem> {
    let derivatives = traj.derivatives().ok_or(Error::MissingDerivatives)?;
    let g = proj.sample_matrix(traj.states())?;
    GramSystem::new(g, derivatives.clone(), MethodTag::Sindy)
}

/// Occupation-form system for scalar trajectories: the right-hand side is
/// `psi_k(x(b)) - psi_k(x(a))` and `G[k][j] = <phi_j(x), dpsi_k/ds (x)>`,
/// with the test basis defined on a state interval covering the range of x.
pub fn encode_occupation(
    traj: &Trajectory,
    proj: &ProjectionBasis,
    test: &TestBasis,
) -> Result<GramSystem> {
    if traj.dimension() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "occupation encoder handles scalar trajectories, got dimension {}",
            traj.dimension()
        )));
    }
    let (lo, hi) = traj.state_range(0)?;
    let (a, b) = test.interval();
    let slack = 1e-12 * (b - a).abs().max(1.0);
    if lo < a - slack || hi > b + slack {
        return Err(Error::StateOutOfDomain { lo, hi, a, b });
    }
    let grid = traj.grid();
    let n = grid.len();
    let phi = proj.sample_matrix(traj.states())?;
    // test functions compose with the state, so sample their derivative at x(t)
    let mut dpsi_x = DMatrix::zeros(n, test.len());
    for m in 0..n {
        let x = traj.states()[(m, 0)].clamp(a, b);
        for k in 0..test.len() {
            dpsi_x[(m, k)] = test.eval_derivative(k, x)?;
        }
    }
    let g = dpsi_x.transpose() * weighted(&phi, grid);
    let mut rhs = DMatrix::zeros(test.len(), 1);
    let x_start = traj.states()[(0, 0)].clamp(a, b);
    let x_end = traj.states()[(n - 1, 0)].clamp(a, b);
    for k in 0..test.len() {
        rhs[(k, 0)] = test.eval(k, x_end)? - test.eval(k, x_start)?;
    }
    GramSystem::new(g, rhs, MethodTag::Occupation)
}

/// Default occupation test family: orthonormal Legendre polynomials of
/// degree `k_degree` on the trajectory's state range padded by 1%.
pub fn state_range_test_basis(traj: &Trajectory, k_degree: usize) -> Result<TestBasis> {
    let (lo, hi) = traj.state_range(0)?;
    let pad = (0.01 * (hi - lo)).max(1e-9);
    TestBasis::legendre(k_degree, lo - pad, hi + pad)
}

/// Encode known dynamics samples: `b[k][i] = <f_i(x), psi_k>` with the same
/// `G` as the weak form. `f_samples` holds `f_i(x(t_m))` at row m, column i.
pub fn encode_samples(
    f_samples: &DMatrix<f64>,
    traj: &Trajectory,
    proj: &ProjectionBasis,
    test: &TestBasis,
) -> Result<GramSystem> {
    check_interval(test, traj.grid())?;
    if f_samples.nrows() != traj.grid().len() {
        return Err(Error::ShapeMismatch(format!(
            "{} sample rows for a {}-point grid",
            f_samples.nrows(),
            traj.grid().len()
        )));
    }
    let grid = traj.grid();
    let phi = proj.sample_matrix(traj.states())?;
    let psi = test.sample_values(grid);
    let g = psi.transpose() * weighted(&phi, grid);
    let b = psi.transpose() * weighted(f_samples, grid);
    GramSystem::new(g, b, MethodTag::Weak)
}

/// Encode, solve, decode: project sampled dynamics onto the dictionary span.
/// Applying the pipeline to its own output reproduces the weights.
pub fn project_dynamics(
    f_samples: &DMatrix<f64>,
    traj: &Trajectory,
    proj: &ProjectionBasis,
    test: &TestBasis,
) -> Result<SurrogateModel> {
    let system = encode_samples(f_samples, traj, proj, test)?;
    let solution = solve(&system)?;
    let provenance = Provenance {
        method: MethodTag::Weak,
        max_degree: proj.max_degree(),
        test_functions: test.len(),
        interval: test.interval(),
        rank: solution.rank,
        underdetermined: solution.underdetermined,
    };
    SurrogateModel::new(proj.clone(), solution.weights, provenance)
}

/// Fit a surrogate from trajectory data with the weak-form encoder.
pub fn fit_weak(
    traj: &Trajectory,
    proj: &ProjectionBasis,
    test: &TestBasis,
) -> Result<SurrogateModel> {
    fit_weak_opts(traj, proj, test, true)
}

pub fn fit_weak_opts(
    traj: &Trajectory,
    proj: &ProjectionBasis,
    test: &TestBasis,
    ibp_boundary: bool,
) -> Result<SurrogateModel> {
    let system = encode_weak_opts(traj, proj, test, ibp_boundary)?;
    let solution = solve(&system)?;
    let provenance = Provenance {
        method: MethodTag::Weak,
        max_degree: proj.max_degree(),
        test_functions: test.len(),
        interval: test.interval(),
        rank: solution.rank,
        underdetermined: solution.underdetermined,
    };
    SurrogateModel::new(proj.clone(), solution.weights, provenance)
}

/// Test kind as stored in run manifests.
pub fn test_kind_name(kind: TestKind) -> &'static str {
    match kind {
        TestKind::Legendre => "legendre",
        TestKind::Fourier => "fourier",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::MultiIndex;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_trajectory(n: usize) -> Trajectory {
        let grid = UniformGrid::new(0.0, 1.0, n).unwrap();
        Trajectory::scalar(grid, grid.points().collect()).unwrap()
    }

    fn exp_trajectory(n: usize) -> Trajectory {
        // x(t) = e^{2t} solves dx/dt = 2x with x(0) = 1
        let grid = UniformGrid::new(0.0, 1.0, n).unwrap();
        Trajectory::scalar(grid, grid.points().map(|t| (2.0 * t).exp()).collect()).unwrap()
    }

    #[test]
    fn weak_hand_example_line() {
        let traj = line_trajectory(101);
        let proj = ProjectionBasis::monomials(1, vec![(-0.1, 1.1)]).unwrap();
        let test = TestBasis::legendre(0, 0.0, 1.0).unwrap();
        let sys = encode_weak(&traj, &proj, &test).unwrap();
        assert_abs_diff_eq!(sys.matrix()[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sys.matrix()[(0, 1)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sys.rhs()[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn weak_constant_trajectory_rhs_vanishes() {
        let grid = UniformGrid::new(0.0, 1.0, 501).unwrap();
        let traj = Trajectory::scalar(grid, vec![3.25; 501]).unwrap();
        let proj = ProjectionBasis::monomials(2, vec![(3.0, 3.5)]).unwrap();
        let test = TestBasis::legendre(4, 0.0, 1.0).unwrap();
        let sys = encode_weak(&traj, &proj, &test).unwrap();
        for k in 0..test.len() {
            assert_abs_diff_eq!(sys.rhs()[(k, 0)], 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn weak_interval_mismatch_is_rejected() {
        let traj = line_trajectory(101);
        let proj = ProjectionBasis::monomials(1, vec![(-0.1, 1.1)]).unwrap();
        let test = TestBasis::legendre(3, 0.0, 2.0).unwrap();
        assert!(matches!(
            encode_weak(&traj, &proj, &test),
            Err(Error::IncompatibleDomain(_))
        ));
    }

    #[test]
    fn weak_recovers_linear_dynamics() {
        let traj = exp_trajectory(2001);
        let proj = ProjectionBasis::monomials(1, vec![(0.5, 8.0)]).unwrap();
        let test = TestBasis::legendre(10, 0.0, 1.0).unwrap();
        let model = fit_weak(&traj, &proj, &test).unwrap();
        let w0 = model.weights()[(proj.index_of(&MultiIndex(vec![0])).unwrap(), 0)];
        let w1 = model.weights()[(proj.index_of(&MultiIndex(vec![1])).unwrap(), 0)];
        assert_abs_diff_eq!(w0, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(w1, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn sindy_hand_example_line() {
        let grid = UniformGrid::new(0.0, 1.0, 11).unwrap();
        let states = DMatrix::from_vec(11, 1, grid.points().collect());
        let derivs = DMatrix::from_element(11, 1, 1.0);
        let traj = Trajectory::with_derivatives(grid, states, derivs).unwrap();
        let proj = ProjectionBasis::monomials(1, vec![(-0.1, 1.1)]).unwrap();
        let sys = encode_sindy(&traj, &proj).unwrap();
        assert_eq!(sys.matrix().nrows(), 11);
        let sol = solve(&sys).unwrap();
        assert_abs_diff_eq!(sol.weights[(0, 0)], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.weights[(1, 0)], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn sindy_requires_derivatives() {
        let traj = line_trajectory(11);
        let proj = ProjectionBasis::monomials(1, vec![(-0.1, 1.1)]).unwrap();
        assert!(matches!(
            encode_sindy(&traj, &proj),
            Err(Error::MissingDerivatives)
        ));
    }

    #[test]
    fn sindy_constant_trajectory_gives_zero_weights() {
        let grid = UniformGrid::new(0.0, 1.0, 11).unwrap();
        let states = DMatrix::from_element(11, 1, 2.0);
        let derivs = DMatrix::zeros(11, 1);
        let traj = Trajectory::with_derivatives(grid, states, derivs).unwrap();
        let proj = ProjectionBasis::monomials(2, vec![(1.5, 2.5)]).unwrap();
        let sol = solve(&encode_sindy(&traj, &proj).unwrap()).unwrap();
        assert!(sol.weights.iter().all(|w| w.abs() < 1e-12));
        assert_eq!(sol.rank, 1);
    }

    #[test]
    fn sindy_recovers_linear_dynamics_with_supplied_derivatives() {
        let grid = UniformGrid::new(0.0, 1.0, 2001).unwrap();
        let states = DMatrix::from_vec(2001, 1, grid.points().map(|t| (2.0 * t).exp()).collect());
        let derivs = states.map(|x| 2.0 * x);
        let traj = Trajectory::with_derivatives(grid, states, derivs).unwrap();
        let proj = ProjectionBasis::monomials(1, vec![(0.5, 8.0)]).unwrap();
        let sol = solve(&encode_sindy(&traj, &proj).unwrap()).unwrap();
        assert_abs_diff_eq!(sol.weights[(0, 0)], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.weights[(1, 0)], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn estimated_derivatives_are_fourth_order() {
        let traj = exp_trajectory(1001);
        let est = traj.estimate_derivatives().unwrap();
        let d = est.derivatives().unwrap();
        for m in 0..traj.grid().len() {
            let exact = 2.0 * traj.states()[(m, 0)];
            assert!((d[(m, 0)] - exact).abs() < 1e-8, "m={m}");
        }
    }

    #[test]
    fn occupation_constant_trajectory_rhs_vanishes() {
        let grid = UniformGrid::new(0.0, 1.0, 101).unwrap();
        let traj = Trajectory::scalar(grid, vec![1.5; 101]).unwrap();
        let proj = ProjectionBasis::monomials(1, vec![(1.0, 2.0)]).unwrap();
        let test = TestBasis::legendre(4, 1.0, 2.0).unwrap();
        let sys = encode_occupation(&traj, &proj, &test).unwrap();
        assert!(sys.rhs().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn occupation_hand_example_line() {
        // x(t) = t, tests = orthonormal Legendre on the state interval [0,1]:
        // psi_1(s) = sqrt(3)(2s - 1), so b_1 = 2*sqrt(3) and
        // G[1][j] = <t^j, 2*sqrt(3)> = 2*sqrt(3)/(j+1).
        let traj = line_trajectory(1001);
        let proj = ProjectionBasis::monomials(2, vec![(-0.1, 1.1)]).unwrap();
        let test = TestBasis::legendre(1, 0.0, 1.0).unwrap();
        let sys = encode_occupation(&traj, &proj, &test).unwrap();
        let s3 = 3.0f64.sqrt();
        assert_abs_diff_eq!(sys.rhs()[(1, 0)], 2.0 * s3, epsilon = 1e-12);
        for j in 0..3 {
            assert_abs_diff_eq!(
                sys.matrix()[(1, j)],
                2.0 * s3 / (j as f64 + 1.0),
                epsilon = 1e-10
            );
        }
        // k = 0 row: constant test function has zero derivative
        assert_abs_diff_eq!(sys.rhs()[(0, 0)], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sys.matrix()[(0, 0)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn occupation_recovers_linear_dynamics() {
        let traj = exp_trajectory(4001);
        let proj = ProjectionBasis::monomials(1, vec![(0.5, 8.0)]).unwrap();
        let test = state_range_test_basis(&traj, 10).unwrap();
        let sol = solve(&encode_occupation(&traj, &proj, &test).unwrap()).unwrap();
        assert_abs_diff_eq!(sol.weights[(0, 0)], 0.0, epsilon = 1e-5);
        assert_abs_diff_eq!(sol.weights[(1, 0)], 2.0, epsilon = 1e-5);
    }

    #[test]
    fn occupation_rejects_escaping_states() {
        let traj = exp_trajectory(101);
        let proj = ProjectionBasis::monomials(1, vec![(0.5, 8.0)]).unwrap();
        let test = TestBasis::legendre(4, 0.0, 2.0).unwrap();
        assert!(matches!(
            encode_occupation(&traj, &proj, &test),
            Err(Error::StateOutOfDomain { .. })
        ));
    }

    #[test]
    fn occupation_rejects_vector_trajectories() {
        let grid = UniformGrid::new(0.0, 1.0, 11).unwrap();
        let traj = Trajectory::new(grid, DMatrix::from_element(11, 2, 0.5)).unwrap();
        let proj = ProjectionBasis::monomials(1, vec![(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let test = TestBasis::legendre(4, 0.0, 1.0).unwrap();
        assert!(matches!(
            encode_occupation(&traj, &proj, &test),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn solve_identity_system() {
        let sys = GramSystem::new(
            DMatrix::identity(3, 3),
            DMatrix::from_vec(3, 1, vec![1.0, 0.0, 0.0]),
            MethodTag::Weak,
        )
        .unwrap();
        let sol = solve(&sys).unwrap();
        assert_eq!(sol.rank, 3);
        assert!(!sol.underdetermined);
        assert_abs_diff_eq!(sol.weights[(0, 0)], 1.0);
    }

    #[test]
    fn solve_rank_deficient_min_norm() {
        let sys = GramSystem::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            DMatrix::from_vec(2, 1, vec![1.0, 1.0]),
            MethodTag::Weak,
        )
        .unwrap();
        let sol = solve(&sys).unwrap();
        assert_eq!(sol.rank, 1);
        assert_abs_diff_eq!(sol.weights[(0, 0)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.weights[(1, 0)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn solve_rejects_non_finite_input() {
        assert!(matches!(
            GramSystem::new(
                DMatrix::from_element(2, 2, f64::NAN),
                DMatrix::zeros(2, 1),
                MethodTag::Weak,
            ),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn solver_is_idempotent() {
        // S(G w_hat) = w_hat for w_hat = S(b)
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = DMatrix::from_fn(8, 4, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(8, 1, |_, _| rng.random_range(-1.0..1.0));
        let sys = GramSystem::new(g.clone(), b, MethodTag::Weak).unwrap();
        let w_hat = solve(&sys).unwrap().weights;
        let replay = GramSystem::new(g.clone(), &g * &w_hat, MethodTag::Weak).unwrap();
        let w_again = solve(&replay).unwrap().weights;
        assert!((w_hat - w_again).amax() < 1e-10);
    }

    #[test]
    fn projection_fixes_dictionary_members() {
        let traj = exp_trajectory(1001);
        let proj = ProjectionBasis::monomials(3, vec![(0.5, 8.0)]).unwrap();
        let test = TestBasis::legendre(8, 0.0, 1.0).unwrap();
        // f(x) = 1.5 - 0.25 x + 0.03 x^3 lies in the dictionary span
        let truth = [1.5, -0.25, 0.0, 0.03];
        let f_samples = DMatrix::from_vec(
            1001,
            1,
            traj.states()
                .column(0)
                .iter()
                .map(|&x| truth[0] + truth[1] * x + truth[3] * x * x * x)
                .collect(),
        );
        let model = project_dynamics(&f_samples, &traj, &proj, &test).unwrap();
        for (j, want) in truth.iter().enumerate() {
            assert_abs_diff_eq!(model.weights()[(j, 0)], *want, epsilon = 1e-8);
        }
    }

    #[test]
    fn projection_is_idempotent_on_random_dynamics() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let grid = UniformGrid::new(0.0, 1.0, 801).unwrap();
            let a: f64 = rng.random_range(-0.3..0.3);
            let b: f64 = rng.random_range(-0.6..0.6);
            let c: f64 = rng.random_range(0.15..0.35);
            let traj = Trajectory::scalar(
                grid,
                grid.points()
                    .map(|t| a + b * t + c * (2.0 * std::f64::consts::PI * t).sin())
                    .collect(),
            )
            .unwrap();
            let proj = ProjectionBasis::monomials(4, traj.state_box(0.01).unwrap()).unwrap();
            let test = TestBasis::legendre(8, 0.0, 1.0).unwrap();
            // non-polynomial dynamics sampled along the trajectory
            let f_samples = DMatrix::from_vec(
                801,
                1,
                traj.states()
                    .column(0)
                    .iter()
                    .map(|&x| (0.7 * x).tanh() + 0.2 * x * x)
                    .collect(),
            );
            let once = project_dynamics(&f_samples, &traj, &proj, &test).unwrap();
            let resampled = once.sample_along(&traj).unwrap();
            let twice = project_dynamics(&resampled, &traj, &proj, &test).unwrap();
            let diff = (once.weights() - twice.weights()).amax();
            assert!(diff < 1e-10, "idempotence violated: {diff}");
        }
    }

    #[test]
    fn sindy_and_weak_agree_on_smooth_data() {
        // x(t) = 0.5 ln(2t + 1) solves dx/dt = e^{-2x}; supply the analytic
        // derivative so the pointwise encoder sees noiseless data.
        let grid = UniformGrid::new(0.0, 1.0, 4001).unwrap();
        let states = DMatrix::from_vec(
            4001,
            1,
            grid.points().map(|t| 0.5 * (2.0 * t + 1.0).ln()).collect(),
        );
        let derivs = DMatrix::from_vec(
            4001,
            1,
            grid.points().map(|t| 1.0 / (2.0 * t + 1.0)).collect(),
        );
        let traj = Trajectory::with_derivatives(grid, states, derivs).unwrap();
        let proj = ProjectionBasis::monomials(3, traj.state_box(0.01).unwrap()).unwrap();
        let test = TestBasis::legendre(10, 0.0, 1.0).unwrap();
        let weak = solve(&encode_weak(&traj, &proj, &test).unwrap()).unwrap();
        let pointwise = solve(&encode_sindy(&traj, &proj).unwrap()).unwrap();
        assert!(
            (weak.weights - pointwise.weights).amax() < 1e-4,
            "weak and pointwise weights diverge"
        );
    }

    #[test]
    fn training_residual_plateaus_past_test_capacity() {
        // non-polynomial dynamics: x(t) = 0.5 ln(2t + 1), dx/dt = e^{-2x}
        let grid = UniformGrid::new(0.0, 1.0, 2001).unwrap();
        let traj = Trajectory::scalar(
            grid,
            grid.points().map(|t| 0.5 * (2.0 * t + 1.0).ln()).collect(),
        )
        .unwrap();
        let test = TestBasis::legendre(5, 0.0, 1.0).unwrap();
        let state_box = traj.state_box(0.01).unwrap();
        let mut residuals = Vec::new();
        let mut ranks = Vec::new();
        for j in 1..=10u32 {
            let proj = ProjectionBasis::monomials(j, state_box.clone()).unwrap();
            let sys = encode_weak(&traj, &proj, &test).unwrap();
            let sol = solve(&sys).unwrap();
            residuals.push(sys.residual(&sol.weights));
            ranks.push(sol.rank);
        }
        for w in residuals.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-8) + 1e-13,
                "residual increased: {w:?}"
            );
        }
        // six test functions cap the effective rank once J + 1 >= 6
        for (j, &rank) in ranks.iter().enumerate() {
            if j + 2 > 6 {
                assert_eq!(rank, 6, "rank at J={} is {}", j + 1, rank);
            }
        }
    }

    #[test]
    fn model_evaluation_and_jacobian() {
        let proj = ProjectionBasis::monomials(2, vec![(-2.0, 2.0)]).unwrap();
        let mut weights = DMatrix::zeros(3, 1);
        weights[(proj.index_of(&MultiIndex(vec![0])).unwrap(), 0)] = 1.0;
        weights[(proj.index_of(&MultiIndex(vec![2])).unwrap(), 0)] = -0.5;
        let model = SurrogateModel::new(
            proj,
            weights,
            Provenance {
                method: MethodTag::Weak,
                max_degree: 2,
                test_functions: 0,
                interval: (0.0, 1.0),
                rank: 3,
                underdetermined: false,
            },
        )
        .unwrap();
        // p(x) = 1 - 0.5 x^2
        assert_abs_diff_eq!(model.eval_component(0, &[2.0]).unwrap(), -1.0);
        assert_abs_diff_eq!(model.partial(0, &[2.0], 0).unwrap(), -2.0);
    }
}
