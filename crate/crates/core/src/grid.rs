//! Uniform grids and composite Simpson quadrature.
//!
//! Every inner product in the crate is computed by weighting sampled values
//! with [`UniformGrid::simpson_weights`], so quadrature is consistent across
//! system assembly, error norms, and the POD correlation operator.

use crate::error::{Error, Result};

/// Uniformly spaced grid over `[start, stop]` with `n_points` samples.
///
/// `point(0) == start` and `point(n_points - 1) == stop` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    start: f64,
    stop: f64,
    n_points: usize,
}

impl UniformGrid {
    pub fn new(start: f64, stop: f64, n_points: usize) -> Result<Self> {
        if !start.is_finite() || !stop.is_finite() {
            return Err(Error::InvalidGrid("non-finite endpoint".into()));
        }
        if stop <= start {
            return Err(Error::InvalidGrid(format!(
                "stop ({stop}) must exceed start ({start})"
            )));
        }
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {n_points}"
            )));
        }
        Ok(Self { start, stop, n_points })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn stop(&self) -> f64 {
        self.stop
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn span(&self) -> f64 {
        self.stop - self.start
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.n_points - 1) as f64
    }

    /// i-th sample point; the last index returns `stop` exactly.
    pub fn point(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_points);
        if i + 1 == self.n_points {
            self.stop
        } else {
            self.start + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.point(i))
    }

    /// Composite Simpson weights for this grid.
    ///
    /// Odd point counts get the classical `h/3 * [1, 4, 2, ..., 4, 1]` rule.
    /// Even point counts apply Simpson to the leading even number of
    /// intervals and close the final interval with the 3-point Newton-Cotes
    /// correction `h/12 * [-1, 8, 5]` on the last three samples.
    pub fn simpson_weights(&self) -> Vec<f64> {
        let n = self.n_points;
        let h = self.step();
        let mut w = vec![0.0; n];
        if n == 2 {
            // single interval: trapezoid is the only closed rule available
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
            return w;
        }
        let simpson_end = if n.is_multiple_of(2) { n - 1 } else { n };
        w[0] += h / 3.0;
        w[simpson_end - 1] += h / 3.0;
        for (i, wi) in w.iter_mut().enumerate().take(simpson_end - 1).skip(1) {
            *wi += if i % 2 == 1 { 4.0 * h / 3.0 } else { 2.0 * h / 3.0 };
        }
        if n.is_multiple_of(2) {
            w[n - 3] += -h / 12.0;
            w[n - 2] += 8.0 * h / 12.0;
            w[n - 1] += 5.0 * h / 12.0;
        }
        w
    }
}

/// Real-valued function sampled on a [`UniformGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: UniformGrid,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sampled function values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().map(f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pointwise combination of two functions on the same grid.
    pub fn zip_with(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_same_grid(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| op(a, b))
            .collect();
        SampledFunction::new(self.grid, values)
    }
}

fn check_same_grid(f: &SampledFunction, g: &SampledFunction) -> Result<()> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch(format!(
            "[{}, {}] x {} vs [{}, {}] x {}",
            f.grid.start(),
            f.grid.stop(),
            f.grid.len(),
            g.grid.start(),
            g.grid.stop(),
            g.grid.len()
        )));
    }
    Ok(())
}

/// Composite Simpson approximation of the integral of `f` over its grid.
pub fn simpson_integrate(f: &SampledFunction) -> Result<f64> {
    if f.grid().len() < 3 {
        return Err(Error::DegenerateGrid(f.grid().len()));
    }
    let w = f.grid().simpson_weights();
    Ok(w.iter().zip(f.values()).map(|(wi, vi)| wi * vi).sum())
}

/// L2 inner product of two functions sampled on an identical grid.
pub fn inner_product(f: &SampledFunction, g: &SampledFunction) -> Result<f64> {
    check_same_grid(f, g)?;
    if f.grid().len() < 3 {
        return Err(Error::DegenerateGrid(f.grid().len()));
    }
    let w = f.grid().simpson_weights();
    Ok(w.iter()
        .zip(f.values())
        .zip(g.values())
        .map(|((wi, fi), gi)| wi * fi * gi)
        .sum())
}

/// L2 norm by quadrature; clamps the tiny negative values an even-grid tail
/// correction can produce before the square root.
pub fn l2_norm(f: &SampledFunction) -> Result<f64> {
    Ok(inner_product(f, f)?.max(0.0).sqrt())
}
