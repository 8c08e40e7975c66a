//! Fixed-step RK4 integration and the built-in test dynamics.
//!
//! Quadrature reuses the sampling grid everywhere downstream, so the
//! integrator writes states at exactly the grid points; substepping refines
//! the march between grid points without changing the output grid.

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::identify::{SurrogateModel, Trajectory};
use nalgebra::DMatrix;
use std::f64::consts::FRAC_PI_2;

/// Safety factor applied on top of the sampled gradient maximum.
pub const LIPSCHITZ_INFLATION: f64 = 1.05;

/// Total sample budget for the Lipschitz estimate.
pub const LIPSCHITZ_SAMPLES: usize = 10_000;

/// Right-hand sides available to the integrator.
#[derive(Debug, Clone)]
pub enum Dynamics {
    /// Scalar `f(x) = e^{-2x}`; solution from 0 is `x(t) = ln(2t + 1)/2`.
    SmoothExp,
    /// Scalar `g_a(x) = cos(x)^a` on `[-pi/2, pi/2]`, zero outside, minus 1/2.
    /// The parameter tunes the smoothness of the right-hand side.
    SobolevAlpha { alpha: f64 },
    /// Polynomial dynamics from an identified model.
    Surrogate(SurrogateModel),
    /// Linear system `dx/dt = A x`.
    LinearModal(DMatrix<f64>),
}

impl Dynamics {
    pub fn dimension(&self) -> usize {
        match self {
            Dynamics::SmoothExp | Dynamics::SobolevAlpha { .. } => 1,
            Dynamics::Surrogate(model) => model.basis().dimension(),
            Dynamics::LinearModal(a) => a.ncols(),
        }
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Dynamics::SmoothExp => {
                out[0] = (-2.0 * x[0]).exp();
                Ok(())
            }
            Dynamics::SobolevAlpha { alpha } => {
                out[0] = sobolev_alpha(*alpha, x[0]);
                Ok(())
            }
            Dynamics::Surrogate(model) => model.eval_into(x, out),
            Dynamics::LinearModal(a) => {
                if x.len() != a.ncols() || out.len() != a.nrows() {
                    return Err(Error::ShapeMismatch("linear dynamics state".into()));
                }
                for (i, slot) in out.iter_mut().enumerate() {
                    *slot = (0..a.ncols()).map(|l| a[(i, l)] * x[l]).sum();
                }
                Ok(())
            }
        }
    }
}

/// `g_a` evaluated directly; the indicator is not smoothed.
pub fn sobolev_alpha(alpha: f64, x: f64) -> f64 {
    if x.abs() <= FRAC_PI_2 {
        x.cos().powf(alpha) - 0.5
    } else {
        -0.5
    }
}

/// Analytic solution of the smooth scalar problem started at zero.
pub fn smooth_exp_solution(t: f64) -> f64 {
    0.5 * (2.0 * t + 1.0).ln()
}

/// Classic RK4 over the grid, one step per grid interval. States (and the
/// dynamics evaluated at them) are recorded at every grid point.
pub fn integrate(dynamics: &Dynamics, x0: &[f64], grid: &UniformGrid) -> Result<Trajectory> {
    integrate_substeps(dynamics, x0, grid, 1)
}

/// RK4 with `substeps` internal steps per grid interval.
pub fn integrate_substeps(
    dynamics: &Dynamics,
    x0: &[f64],
    grid: &UniformGrid,
    substeps: usize,
) -> Result<Trajectory> {
    let dim = dynamics.dimension();
    if x0.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "initial state has {} components, dynamics expects {dim}",
            x0.len()
        )));
    }
    if substeps == 0 {
        return Err(Error::InsufficientData("substeps must be positive".into()));
    }
    let n = grid.len();
    let h = grid.step() / substeps as f64;
    let mut states = DMatrix::zeros(n, dim);
    let mut derivs = DMatrix::zeros(n, dim);

    let mut x = x0.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];

    for m in 0..n {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Blowup { t: grid.point(m.saturating_sub(1)) });
        }
        dynamics.eval_into(&x, &mut k1)?;
        for i in 0..dim {
            states[(m, i)] = x[i];
            derivs[(m, i)] = k1[i];
        }
        if m + 1 == n {
            break;
        }
        for _ in 0..substeps {
            dynamics.eval_into(&x, &mut k1)?;
            for i in 0..dim {
                stage[i] = x[i] + 0.5 * h * k1[i];
            }
            dynamics.eval_into(&stage, &mut k2)?;
            for i in 0..dim {
                stage[i] = x[i] + 0.5 * h * k2[i];
            }
            dynamics.eval_into(&stage, &mut k3)?;
            for i in 0..dim {
                stage[i] = x[i] + h * k3[i];
            }
            dynamics.eval_into(&stage, &mut k4)?;
            for i in 0..dim {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Blowup { t: grid.point(m) });
            }
        }
    }
    Trajectory::with_derivatives(*grid, states, derivs)
}

/// Sampled estimate of the Lipschitz constant of the model on a box: the
/// maximum Jacobian Frobenius norm over roughly [`LIPSCHITZ_SAMPLES`] grid
/// points, inflated by [`LIPSCHITZ_INFLATION`]. An estimate, not a bound.
pub fn lipschitz_estimate(model: &SurrogateModel, state_box: &[(f64, f64)]) -> Result<f64> {
    lipschitz_estimate_with(model, state_box, LIPSCHITZ_SAMPLES)
}

pub fn lipschitz_estimate_with(
    model: &SurrogateModel,
    state_box: &[(f64, f64)],
    samples: usize,
) -> Result<f64> {
    let dim = model.basis().dimension();
    if state_box.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "box has {} components, model state dimension is {dim}",
            state_box.len()
        )));
    }
    for &(lo, hi) in state_box {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::IncompatibleDomain(format!(
                "degenerate box component [{lo}, {hi}]"
            )));
        }
    }
    let per_axis = ((samples as f64).powf(1.0 / dim as f64).round() as usize).max(2);
    let mut point = vec![0.0; dim];
    let mut counters = vec![0usize; dim];
    let mut max_grad = 0.0f64;
    loop {
        for (l, &c) in counters.iter().enumerate() {
            let (lo, hi) = state_box[l];
            point[l] = lo + (hi - lo) * c as f64 / (per_axis - 1) as f64;
        }
        let mut frob_sq = 0.0;
        for i in 0..model.n_components() {
            for l in 0..dim {
                let d = model.partial(i, &point, l)?;
                frob_sq += d * d;
            }
        }
        max_grad = max_grad.max(frob_sq.sqrt());

        let mut axis = 0;
        loop {
            if axis == dim {
                return Ok(max_grad * LIPSCHITZ_INFLATION);
            }
            counters[axis] += 1;
            if counters[axis] < per_axis {
                break;
            }
            counters[axis] = 0;
            axis += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::{MultiIndex, ProjectionBasis};
    use crate::identify::{MethodTag, Provenance, SurrogateModel};
    use approx::assert_abs_diff_eq;

    fn scalar_model(coeffs: &[(u32, f64)], max_degree: u32, lo: f64, hi: f64) -> SurrogateModel {
        let proj = ProjectionBasis::monomials(max_degree, vec![(lo, hi)]).unwrap();
        let mut weights = DMatrix::zeros(proj.len(), 1);
        for &(deg, w) in coeffs {
            let flat = proj.index_of(&MultiIndex(vec![deg])).unwrap();
            weights[(flat, 0)] = w;
        }
        SurrogateModel::new(
            proj,
            weights,
            Provenance {
                method: MethodTag::Weak,
                max_degree,
                test_functions: 0,
                interval: (lo, hi),
                rank: 0,
                underdetermined: false,
            },
        )
        .unwrap()
    }

    #[test]
    fn zero_dynamics_stays_constant() {
        let grid = UniformGrid::new(0.0, 1.0, 101).unwrap();
        let traj = integrate(&Dynamics::LinearModal(DMatrix::zeros(1, 1)), &[2.5], &grid).unwrap();
        assert!(traj.states().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn smooth_exp_matches_analytic_solution() {
        let grid = UniformGrid::new(0.0, 1.0, 10_001).unwrap();
        let traj = integrate(&Dynamics::SmoothExp, &[0.0], &grid).unwrap();
        let mut max_err = 0.0f64;
        for (m, t) in grid.points().enumerate() {
            max_err = max_err.max((traj.states()[(m, 0)] - smooth_exp_solution(t)).abs());
        }
        assert!(max_err <= 1e-8, "max error {max_err}");
        assert_abs_diff_eq!(
            traj.states()[(10_000, 0)],
            0.5 * 3.0f64.ln(),
            epsilon = 1e-8
        );
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err_at = |n: usize| {
            let grid = UniformGrid::new(0.0, 1.0, n).unwrap();
            let traj = integrate(&Dynamics::SmoothExp, &[0.0], &grid).unwrap();
            (traj.states()[(n - 1, 0)] - smooth_exp_solution(1.0)).abs()
        };
        let ratio = err_at(101) / err_at(201);
        assert!((13.0..24.0).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn sobolev_dynamics_self_consistent_under_step_halving() {
        let coarse_grid = UniformGrid::new(0.0, 2.0, 20_001).unwrap();
        let fine_grid = UniformGrid::new(0.0, 2.0, 40_001).unwrap();
        let dynamics = Dynamics::SobolevAlpha { alpha: 1.0 };
        let coarse = integrate(&dynamics, &[2.0], &coarse_grid).unwrap();
        let fine = integrate(&dynamics, &[2.0], &fine_grid).unwrap();
        let diff = (coarse.states()[(20_000, 0)] - fine.states()[(40_000, 0)]).abs();
        assert!(diff < 1e-6, "step-halving difference {diff}");
        // the trajectory must actually cross into the indicator's support
        let (lo, _) = coarse.state_range(0).unwrap();
        assert!(lo < FRAC_PI_2);
    }

    #[test]
    fn surrogate_forward_solve_reproduces_training_trajectory() {
        // dx/dt = 2x from 1; exact-recovery weights (0, 2)
        let model = scalar_model(&[(1, 2.0)], 1, 0.5, 8.0);
        let grid = UniformGrid::new(0.0, 1.0, 2001).unwrap();
        let traj = integrate(&Dynamics::Surrogate(model), &[1.0], &grid).unwrap();
        for (m, t) in grid.points().enumerate() {
            assert!((traj.states()[(m, 0)] - (2.0 * t).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn blowup_reports_first_failing_time() {
        // dx/dt = x^2 from 2 blows up at t = 0.5
        let model = scalar_model(&[(2, 1.0)], 2, 0.0, 1e9);
        let grid = UniformGrid::new(0.0, 1.0, 101).unwrap();
        match integrate(&Dynamics::Surrogate(model), &[2.0], &grid) {
            Err(Error::Blowup { t }) => assert!((0.3..0.7).contains(&t), "t = {t}"),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn lipschitz_estimate_linear_and_quadratic() {
        let linear = scalar_model(&[(1, 2.0)], 1, -1.0, 1.0);
        assert_abs_diff_eq!(
            lipschitz_estimate(&linear, &[(-1.0, 1.0)]).unwrap(),
            2.1,
            epsilon = 1e-12
        );
        let quadratic = scalar_model(&[(2, 1.0)], 2, 0.0, 1.0);
        assert_abs_diff_eq!(
            lipschitz_estimate(&quadratic, &[(0.0, 1.0)]).unwrap(),
            2.1,
            epsilon = 1e-12
        );
    }

    #[test]
    fn lipschitz_estimate_converges_with_denser_sampling() {
        // degree-5 surrogate over the range of the smooth solution on [0, 3]
        let model = scalar_model(
            &[(0, 0.9), (1, -1.7), (2, 1.4), (3, -0.6), (4, 0.2), (5, -0.03)],
            5,
            0.0,
            1.0,
        );
        let hi = smooth_exp_solution(3.0);
        let coarse = lipschitz_estimate(&model, &[(0.0, hi)]).unwrap();
        let dense = lipschitz_estimate_with(&model, &[(0.0, hi)], 1_000_000).unwrap();
        assert!((coarse - dense).abs() / dense < 0.01, "{coarse} vs {dense}");
    }
}
