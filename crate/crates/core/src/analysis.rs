//! Error decomposition for identified dynamics.
//!
//! The total consistency error of a surrogate along a trajectory splits into
//! three quadrature-computable terms: the part of the true dynamics outside
//! the test span, the residual inside the test span, and the part of the
//! surrogate outside the test span. The total never exceeds their sum, and
//! the middle term is the quantity the least-squares fit actually minimizes.

use crate::bases::TestBasis;
use crate::error::{Error, Result};
use crate::grid::{inner_product, l2_norm, SampledFunction};
use crate::identify::{MethodTag, SurrogateModel, Trajectory};

/// One row of an error sweep.
#[derive(Debug, Clone, Copy)]
pub struct ErrorDecomposition {
    /// Total error `||f(x) - p(x)||_{L2}` along the trajectory.
    pub l: f64,
    /// Dynamics content outside the test span.
    pub r1: f64,
    /// Residual inside the test span (the minimized quantity).
    pub r2: f64,
    /// Surrogate content outside the test span.
    pub r3: f64,
    pub max_degree: u32,
    pub test_degree: usize,
    pub method: MethodTag,
}

impl ErrorDecomposition {
    /// Sum of the three bound terms.
    pub fn bound(&self) -> f64 {
        self.r1 + self.r2 + self.r3
    }
}

/// L2 projection of `f` onto the test span, resampled on `f`'s grid.
pub fn project_test_space(f: &SampledFunction, test: &TestBasis) -> Result<SampledFunction> {
    let grid = f.grid();
    let (a, b) = test.interval();
    let scale = grid.span().abs().max(1.0);
    if (a - grid.start()).abs() > 1e-12 * scale || (b - grid.stop()).abs() > 1e-12 * scale {
        return Err(Error::IncompatibleDomain(format!(
            "test interval [{a}, {b}] differs from function span [{}, {}]",
            grid.start(),
            grid.stop()
        )));
    }
    let psi = test.sample_values(grid);
    let mut projected = vec![0.0; grid.len()];
    for k in 0..test.len() {
        let psi_k = SampledFunction::new(*grid, psi.column(k).iter().copied().collect())?;
        let coeff = inner_product(f, &psi_k)?;
        for (slot, v) in projected.iter_mut().zip(psi_k.values()) {
            *slot += coeff * v;
        }
    }
    SampledFunction::new(*grid, projected)
}

/// Compute the total error and its three-term decomposition for a scalar
/// model along a scalar trajectory. `f_comp` holds samples of the true
/// dynamics composed with the trajectory, so this is an analysis-mode
/// operation: it needs oracle access to the dynamics.
pub fn decompose_error(
    f_comp: &SampledFunction,
    model: &SurrogateModel,
    traj: &Trajectory,
    test: &TestBasis,
) -> Result<ErrorDecomposition> {
    if model.n_components() != 1 || traj.dimension() != 1 {
        return Err(Error::ShapeMismatch(
            "error decomposition handles scalar models over scalar trajectories".into(),
        ));
    }
    if f_comp.grid() != traj.grid() {
        return Err(Error::GridMismatch(
            "dynamics samples not on the trajectory grid".into(),
        ));
    }
    let p_comp = model.compose_component(traj, 0)?;
    let diff = f_comp.zip_with(&p_comp, |a, b| a - b)?;

    let l = l2_norm(&diff)?;
    let f_proj = project_test_space(f_comp, test)?;
    let r1 = l2_norm(&f_comp.zip_with(&f_proj, |a, b| a - b)?)?;
    let r2 = l2_norm(&project_test_space(&diff, test)?)?;
    let p_proj = project_test_space(&p_comp, test)?;
    let r3 = l2_norm(&p_comp.zip_with(&p_proj, |a, b| a - b)?)?;

    Ok(ErrorDecomposition {
        l,
        r1,
        r2,
        r3,
        max_degree: model.basis().max_degree(),
        test_degree: test.degree(),
        method: model.provenance().method,
    })
}

/// Outcome of the contraction-based solution bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolutionBound {
    /// `sqrt(beta - alpha) * epsilon / (1 - (beta - alpha) * L)`.
    Bound(f64),
    /// The contraction condition `(beta - alpha) * L < 1` fails; the bound
    /// does not apply on this interval.
    Inapplicable { contraction: f64 },
}

/// Uniform solution-error bound on `[alpha, beta]` from a consistency error
/// `epsilon` and a Lipschitz constant of the surrogate dynamics.
pub fn solution_error_bound(epsilon: f64, l_const: f64, interval: (f64, f64)) -> SolutionBound {
    let tau = interval.1 - interval.0;
    let contraction = tau * l_const;
    if contraction >= 1.0 {
        SolutionBound::Inapplicable { contraction }
    } else {
        SolutionBound::Bound(tau.sqrt() * epsilon / (1.0 - contraction))
    }
}

/// Least-squares power-law fit on log-log axes.
#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Range of the abscissa (degree) values used in the fit.
    pub window: (f64, f64),
}

/// Fit `log(y) = slope * log(x) + intercept`. The caller chooses the fit
/// window; saturation plateaus must be excluded upstream.
pub fn fit_rate(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} degrees vs {} errors",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "rate fit needs at least 4 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|&x| x <= 0.0) || ys.iter().any(|&y| y <= 0.0) {
        return Err(Error::InsufficientData(
            "rate fit needs positive degrees and errors".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|&x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| y.ln()).collect();
    let n = lx.len() as f64;
    let mean_x = lx.iter().sum::<f64>() / n;
    let mean_y = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "all fit degrees are identical".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    let ss_tot: f64 = ly.iter().map(|y| (y - mean_y).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    let window = (
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    Ok(RateFit { slope, intercept, r_squared, window })
}

/// Pointwise maximum of `|f - g|` over the shared grid.
pub fn sup_abs_difference(f: &SampledFunction, g: &SampledFunction) -> Result<f64> {
    let diff = f.zip_with(g, |a, b| (a - b).abs())?;
    Ok(diff.values().iter().copied().fold(0.0, f64::max))
}

/// One degree of a basis-degree sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub max_degree: u32,
    pub decomposition: ErrorDecomposition,
    pub rank: usize,
    pub underdetermined: bool,
    pub model: SurrogateModel,
}

/// Sweep the dictionary degree at a fixed test basis: fit from trajectory
/// data with the weak-form encoder at each degree in `degrees` and decompose
/// the error against the supplied dynamics samples.
///
/// The full system is assembled once at the largest degree; smaller
/// dictionaries reuse its columns, which is exact because the monomial sets
/// are nested. `svd_cutoff` is the relative singular-value cutoff of the
/// per-degree solve.
pub fn degree_sweep(
    traj: &Trajectory,
    f_comp: &SampledFunction,
    test: &TestBasis,
    degrees: &[u32],
    state_box: &[(f64, f64)],
    ibp_boundary: bool,
    svd_cutoff: f64,
) -> Result<Vec<SweepPoint>> {
    use crate::bases::ProjectionBasis;
    use crate::identify::{encode_weak_opts, solve_with_cutoff, GramSystem, Provenance};

    let &j_max = degrees
        .iter()
        .max()
        .ok_or_else(|| Error::InsufficientData("empty degree list".into()))?;
    let proj_full = ProjectionBasis::monomials(j_max, state_box.to_vec())?;
    let full = encode_weak_opts(traj, &proj_full, test, ibp_boundary)?;

    let mut points = Vec::with_capacity(degrees.len());
    for &j in degrees {
        let proj = ProjectionBasis::monomials(j, state_box.to_vec())?;
        let columns: Vec<usize> = proj
            .multi_indices()
            .map(|mi| proj_full.index_of(mi))
            .collect::<Result<_>>()?;
        let g = full.matrix().select_columns(columns.iter());
        let system = GramSystem::from_parts(g, full.rhs().clone(), full.method())?;
        let solution = solve_with_cutoff(&system, svd_cutoff)?;
        let provenance = Provenance {
            method: full.method(),
            max_degree: j,
            test_functions: test.len(),
            interval: test.interval(),
            rank: solution.rank,
            underdetermined: solution.underdetermined,
        };
        let model = SurrogateModel::new(proj, solution.weights, provenance)?;
        let decomposition = decompose_error(f_comp, &model, traj, test)?;
        points.push(SweepPoint {
            max_degree: j,
            decomposition,
            rank: solution.rank,
            underdetermined: solution.underdetermined,
            model,
        });
    }
    Ok(points)
}
