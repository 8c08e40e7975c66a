//! Diffusion snapshots, proper orthogonal decomposition, and reduced models.
//!
//! The pipeline: march the 1D diffusion equation with an explicit FTCS
//! scheme, build the time-averaged spatial correlation matrix, solve the
//! quadrature-weighted symmetric eigenproblem for spatial modes, project the
//! field onto them for exact temporal modes, and either identify a polynomial
//! surrogate for the mode dynamics (weak form) or integrate the Galerkin
//! proxy system. Reconstruction is the outer-product sum of modes.

use crate::bases::TestBasis;
use crate::error::{Error, Result};
use crate::fd;
use crate::grid::UniformGrid;
use crate::identify::{self, SurrogateModel, Trajectory};
use crate::ode::{integrate_substeps, Dynamics};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

/// Relative singular-value cutoff for mode-dynamics fits.
///
/// Temporal modes trace out low-dimensional manifolds, so quadratic and
/// higher dictionaries evaluated along them are nearly collinear; a plain
/// minimum-norm solve at full rank then carries huge weights whose
/// off-manifold dynamics can be unstable. Truncating at 1e-10 keeps the fit
/// residual small while discarding those directions.
pub const MODE_SURROGATE_CUTOFF: f64 = 1e-10;

/// Spatial diffusivity profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diffusivity {
    Constant(f64),
    /// `value` for `x <= cutoff`, zero beyond; the cutoff point itself is
    /// on the diffusive side.
    Step { value: f64, cutoff: f64 },
}

impl Diffusivity {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Diffusivity::Constant(v) => v,
            Diffusivity::Step { value, cutoff } => {
                if x <= cutoff {
                    value
                } else {
                    0.0
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Diffusivity::Constant(v) => format!("constant {v}"),
            Diffusivity::Step { value, cutoff } => {
                format!("{value} for x <= {cutoff}, 0 beyond")
            }
        }
    }
}

/// Space-time field sampled on a tensor grid; row = time, column = space.
#[derive(Debug, Clone)]
pub struct SnapshotField {
    x_grid: UniformGrid,
    t_grid: UniformGrid,
    values: DMatrix<f64>,
}

impl SnapshotField {
    pub fn new(x_grid: UniformGrid, t_grid: UniformGrid, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != t_grid.len() || values.ncols() != x_grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "field is {}x{}, grids want {}x{}",
                values.nrows(),
                values.ncols(),
                t_grid.len(),
                x_grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("snapshot field".into()));
        }
        Ok(Self { x_grid, t_grid, values })
    }

    pub fn x_grid(&self) -> &UniformGrid {
        &self.x_grid
    }

    pub fn t_grid(&self) -> &UniformGrid {
        &self.t_grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Pointwise absolute difference against another field on the same grids.
    pub fn abs_difference(&self, other: &SnapshotField) -> Result<SnapshotField> {
        if self.x_grid != other.x_grid || self.t_grid != other.t_grid {
            return Err(Error::GridMismatch("fields on different grids".into()));
        }
        let values = self.values.zip_map(&other.values, |a, b| (a - b).abs());
        SnapshotField::new(self.x_grid, self.t_grid, values)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Largest absolute entry in the final-time row.
    pub fn max_abs_final_time(&self) -> f64 {
        self.values
            .row(self.t_grid.len() - 1)
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Space-time L2 norm by tensorized quadrature.
    pub fn l2_norm(&self) -> f64 {
        let wx = self.x_grid.simpson_weights();
        let wt = self.t_grid.simpson_weights();
        let mut acc = 0.0;
        for (m, wtm) in wt.iter().enumerate() {
            let mut row = 0.0;
            for (j, wxj) in wx.iter().enumerate() {
                row += wxj * self.values[(m, j)] * self.values[(m, j)];
            }
            acc += wtm * row;
        }
        acc.max(0.0).sqrt()
    }

    /// CSV serialization: one row per time step, one column per grid point.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for m in 0..self.t_grid.len() {
            let mut first = true;
            for j in 0..self.x_grid.len() {
                if !first {
                    write!(out, ",")?;
                }
                write!(out, "{}", self.values[(m, j)])?;
                first = false;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn sidecar(&self, beta: String, mode_count: Option<usize>) -> FieldSidecar {
        FieldSidecar {
            x_start: self.x_grid.start(),
            x_stop: self.x_grid.stop(),
            n_x: self.x_grid.len(),
            t_start: self.t_grid.start(),
            t_stop: self.t_grid.stop(),
            n_t: self.t_grid.len(),
            beta,
            mode_count,
        }
    }
}

/// JSON sidecar describing a serialized field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub x_start: f64,
    pub x_stop: f64,
    pub n_x: usize,
    pub t_start: f64,
    pub t_stop: f64,
    pub n_t: usize,
    pub beta: String,
    pub mode_count: Option<usize>,
}

/// Forward-time centered-space march of `du/dt = beta(x) d2u/dx2` with
/// Dirichlet values pinned at both ends of every time step.
pub fn ftcs_solve(
    beta: &Diffusivity,
    x_grid: &UniformGrid,
    t_grid: &UniformGrid,
    ic: impl Fn(f64) -> f64,
    bc: (f64, f64),
) -> Result<SnapshotField> {
    let n_x = x_grid.len();
    let n_t = t_grid.len();
    if n_x < 3 {
        return Err(Error::InvalidGrid("FTCS needs at least 3 spatial points".into()));
    }
    let dx = x_grid.step();
    let dt = t_grid.step();
    let beta_at: Vec<f64> = x_grid.points().map(|x| beta.eval(x)).collect();
    let beta_max = beta_at.iter().copied().fold(0.0f64, f64::max);
    let ratio = beta_max * dt / (dx * dx);
    if ratio > 0.5 + 1e-12 {
        return Err(Error::CflViolation {
            ratio,
            required_dt: 0.5 * dx * dx / beta_max,
        });
    }

    let mut values = DMatrix::zeros(n_t, n_x);
    for (j, x) in x_grid.points().enumerate() {
        values[(0, j)] = ic(x);
    }
    values[(0, 0)] = bc.0;
    values[(0, n_x - 1)] = bc.1;

    let lambda = dt / (dx * dx);
    for m in 0..n_t - 1 {
        values[(m + 1, 0)] = bc.0;
        values[(m + 1, n_x - 1)] = bc.1;
        for j in 1..n_x - 1 {
            let curvature = values[(m, j + 1)] - 2.0 * values[(m, j)] + values[(m, j - 1)];
            values[(m + 1, j)] = values[(m, j)] + lambda * beta_at[j] * curvature;
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("FTCS solution".into()));
    }
    SnapshotField::new(*x_grid, *t_grid, values)
}

/// Spatial modes, eigenvalues, and exact temporal modes of a snapshot field.
#[derive(Debug, Clone)]
pub struct PodDecomposition {
    /// Row i holds the i-th spatial mode on the x grid, orthonormal in the
    /// quadrature-weighted L2 inner product.
    spatial_modes: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    /// Row m holds the exact temporal modes at time m.
    exact_temporal: DMatrix<f64>,
    x_grid: UniformGrid,
    t_grid: UniformGrid,
}

impl PodDecomposition {
    pub fn spatial_modes(&self) -> &DMatrix<f64> {
        &self.spatial_modes
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn exact_temporal(&self) -> &DMatrix<f64> {
        &self.exact_temporal
    }

    pub fn n_modes(&self) -> usize {
        self.spatial_modes.nrows()
    }

    pub fn x_grid(&self) -> &UniformGrid {
        &self.x_grid
    }

    pub fn t_grid(&self) -> &UniformGrid {
        &self.t_grid
    }

    /// Weak-form polynomial surrogate for the exact temporal modes.
    pub fn exact_mode_surrogate(&self, test: &TestBasis, max_degree: u32) -> Result<SurrogateModel> {
        mode_surrogate(&self.exact_temporal, &self.t_grid, test, max_degree)
    }

    /// Field reconstructed from this decomposition's own temporal modes.
    pub fn reconstruct_exact(&self) -> Result<SnapshotField> {
        reconstruct(&self.spatial_modes, &self.exact_temporal, &self.x_grid, &self.t_grid)
    }
}

/// Spatial correlation eigenproblem of the field, keeping `n_modes` modes.
///
/// The correlation matrix is the time average of outer products of snapshot
/// rows; the eigenproblem is weighted by the spatial quadrature so that the
/// discrete modes are orthonormal in L2 rather than as coordinate vectors.
/// Mode signs are fixed so each mode is nonnegative at the first interior
/// grid point.
pub fn pod_decompose(field: &SnapshotField, n_modes: usize) -> Result<PodDecomposition> {
    let n_x = field.x_grid().len();
    let n_t = field.t_grid().len();
    if n_modes > n_x {
        return Err(Error::ShapeMismatch(format!(
            "{n_modes} modes requested from {n_x} spatial points"
        )));
    }
    let u = field.values();
    let wt = field.t_grid().simpson_weights();
    let span_t = field.t_grid().span();

    // R = U^T diag(wt) U / T
    let mut u_weighted = u.clone();
    for (m, w) in wt.iter().enumerate() {
        for j in 0..n_x {
            u_weighted[(m, j)] *= w / span_t;
        }
    }
    let r = u.transpose() * u_weighted;

    let wx = field.x_grid().simpson_weights();
    debug_assert!(wx.iter().all(|&w| w > 0.0));
    let sqrt_wx: Vec<f64> = wx.iter().map(|&w| w.sqrt()).collect();
    let mut b = r;
    for i in 0..n_x {
        for j in 0..n_x {
            b[(i, j)] = 0.5 * (b[(i, j)] + b[(j, i)]);
        }
    }
    for i in 0..n_x {
        for j in 0..n_x {
            b[(i, j)] *= sqrt_wx[i] * sqrt_wx[j];
        }
    }
    let eig = b.symmetric_eigen();

    let mut order: Vec<usize> = (0..n_x).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });

    let mut spatial_modes = DMatrix::zeros(n_modes, n_x);
    let mut eigenvalues = Vec::with_capacity(n_modes);
    for (row, &idx) in order.iter().take(n_modes).enumerate() {
        eigenvalues.push(eig.eigenvalues[idx]);
        let z = eig.eigenvectors.column(idx);
        let mut mode: Vec<f64> = (0..n_x).map(|j| z[j] / sqrt_wx[j]).collect();
        let anchor = 1.min(n_x - 1);
        if mode[anchor] < 0.0 {
            for v in &mut mode {
                *v = -*v;
            }
        }
        for (j, v) in mode.into_iter().enumerate() {
            spatial_modes[(row, j)] = v;
        }
    }

    // s_i(t_m) = <u(., t_m), u_i> by spatial quadrature
    let mut exact_temporal = DMatrix::zeros(n_t, n_modes);
    for i in 0..n_modes {
        for m in 0..n_t {
            let mut acc = 0.0;
            for j in 0..n_x {
                acc += wx[j] * u[(m, j)] * spatial_modes[(i, j)];
            }
            exact_temporal[(m, i)] = acc;
        }
    }

    Ok(PodDecomposition {
        spatial_modes,
        eigenvalues,
        exact_temporal,
        x_grid: *field.x_grid(),
        t_grid: *field.t_grid(),
    })
}

/// Weak-form polynomial surrogate for sampled temporal modes, solved with
/// [`MODE_SURROGATE_CUTOFF`].
pub fn mode_surrogate(
    modes: &DMatrix<f64>,
    t_grid: &UniformGrid,
    test: &TestBasis,
    max_degree: u32,
) -> Result<SurrogateModel> {
    mode_surrogate_with(modes, t_grid, test, max_degree, MODE_SURROGATE_CUTOFF)
}

/// Weak-form polynomial surrogate for sampled temporal modes with an
/// explicit solve cutoff.
pub fn mode_surrogate_with(
    modes: &DMatrix<f64>,
    t_grid: &UniformGrid,
    test: &TestBasis,
    max_degree: u32,
    svd_cutoff: f64,
) -> Result<SurrogateModel> {
    let traj = Trajectory::new(*t_grid, modes.clone())?;
    let proj =
        crate::bases::ProjectionBasis::monomials(max_degree, traj.state_box(0.01)?)?;
    let system = identify::encode_weak(&traj, &proj, test)?;
    let solution = identify::solve_with_cutoff(&system, svd_cutoff)?;
    let provenance = identify::Provenance {
        method: system.method(),
        max_degree,
        test_functions: test.len(),
        interval: test.interval(),
        rank: solution.rank,
        underdetermined: solution.underdetermined,
    };
    SurrogateModel::new(proj, solution.weights, provenance)
}

/// Galerkin matrix of the diffusion operator on the given modes:
/// `A[i][l] = <beta d2u_l/dx2, u_i>` with fourth-order finite differences
/// for the second derivative (one-sided at the boundary points).
pub fn galerkin_matrix(
    spatial_modes: &DMatrix<f64>,
    beta: &Diffusivity,
    x_grid: &UniformGrid,
) -> Result<DMatrix<f64>> {
    let n_modes = spatial_modes.nrows();
    let n_x = spatial_modes.ncols();
    if n_x != x_grid.len() {
        return Err(Error::ShapeMismatch("modes not on the spatial grid".into()));
    }
    let wx = x_grid.simpson_weights();
    let beta_at: Vec<f64> = x_grid.points().map(|x| beta.eval(x)).collect();
    let mut a = DMatrix::zeros(n_modes, n_modes);
    for l in 0..n_modes {
        let mode: Vec<f64> = spatial_modes.row(l).iter().copied().collect();
        let d2 = fd::second_derivative_fourth_order(&mode, x_grid.step())?;
        for i in 0..n_modes {
            let mut acc = 0.0;
            for j in 0..n_x {
                acc += wx[j] * beta_at[j] * d2[j] * spatial_modes[(i, j)];
            }
            a[(i, l)] = acc;
        }
    }
    Ok(a)
}

/// Proxy temporal modes: integrate the constant-matrix Galerkin system from
/// the exact modes' initial value on the snapshot time grid.
pub fn proxy_modes(
    dec: &PodDecomposition,
    beta: &Diffusivity,
    substeps: usize,
) -> Result<DMatrix<f64>> {
    let a = galerkin_matrix(&dec.spatial_modes, beta, &dec.x_grid)?;
    let s0: Vec<f64> = dec.exact_temporal.row(0).iter().copied().collect();
    let traj = integrate_substeps(&Dynamics::LinearModal(a), &s0, &dec.t_grid, substeps)?;
    Ok(traj.states().clone())
}

/// Outer-product reconstruction `sum_i temporal[., i] * spatial[i, .]`.
pub fn reconstruct(
    spatial_modes: &DMatrix<f64>,
    temporal: &DMatrix<f64>,
    x_grid: &UniformGrid,
    t_grid: &UniformGrid,
) -> Result<SnapshotField> {
    if temporal.ncols() != spatial_modes.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} temporal columns vs {} spatial modes",
            temporal.ncols(),
            spatial_modes.nrows()
        )));
    }
    if temporal.nrows() != t_grid.len() || spatial_modes.ncols() != x_grid.len() {
        return Err(Error::ShapeMismatch("mode arrays not on the given grids".into()));
    }
    let values = if spatial_modes.nrows() == 0 {
        DMatrix::zeros(t_grid.len(), x_grid.len())
    } else {
        temporal * spatial_modes
    };
    SnapshotField::new(*x_grid, *t_grid, values)
}

/// Integrate an identified mode model on the snapshot grid, starting from
/// the decomposition's initial temporal modes.
pub fn surrogate_temporal_modes(
    dec: &PodDecomposition,
    model: &SurrogateModel,
    substeps: usize,
) -> Result<DMatrix<f64>> {
    let s0: Vec<f64> = dec.exact_temporal.row(0).iter().copied().collect();
    let traj = integrate_substeps(
        &Dynamics::Surrogate(model.clone()),
        &s0,
        &dec.t_grid,
        substeps,
    )?;
    Ok(traj.states().clone())
}

/// Spatial inner product of two mode rows under the grid quadrature.
pub fn mode_inner_product(
    a: &DMatrix<f64>,
    i: usize,
    b: &DMatrix<f64>,
    j: usize,
    x_grid: &UniformGrid,
) -> f64 {
    let wx = x_grid.simpson_weights();
    (0..x_grid.len()).map(|k| wx[k] * a[(i, k)] * b[(j, k)]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn paper_ic(x: f64) -> f64 {
        x + (2.0 * PI * x).sin() + 1.0
    }

    fn small_grids() -> (UniformGrid, UniformGrid) {
        (
            UniformGrid::new(0.0, 1.0, 101).unwrap(),
            UniformGrid::new(0.0, 0.5, 501).unwrap(),
        )
    }

    #[test]
    fn zero_diffusivity_freezes_initial_condition() {
        let (xg, tg) = small_grids();
        let field = ftcs_solve(&Diffusivity::Constant(0.0), &xg, &tg, paper_ic, (1.0, 2.0))
            .unwrap();
        for m in 0..tg.len() {
            for j in 0..xg.len() {
                assert_eq!(field.values()[(m, j)], field.values()[(0, j)]);
            }
        }
    }

    #[test]
    fn linear_profile_is_a_discrete_steady_state() {
        let (xg, tg) = small_grids();
        let field =
            ftcs_solve(&Diffusivity::Constant(5e-3), &xg, &tg, |x| 1.0 + x, (1.0, 2.0)).unwrap();
        let last = tg.len() - 1;
        for (j, x) in xg.points().enumerate() {
            assert!(
                (field.values()[(last, j)] - (1.0 + x)).abs() < 1e-11,
                "drift at x = {x}"
            );
        }
    }

    #[test]
    fn cfl_violation_reports_required_step() {
        let xg = UniformGrid::new(0.0, 1.0, 101).unwrap();
        let tg = UniformGrid::new(0.0, 1.0, 51).unwrap();
        match ftcs_solve(&Diffusivity::Constant(5e-3), &xg, &tg, paper_ic, (1.0, 2.0)) {
            Err(Error::CflViolation { ratio, required_dt }) => {
                assert!(ratio > 0.5);
                assert_abs_diff_eq!(required_dt, 0.01, epsilon = 1e-12);
            }
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn dirichlet_columns_are_pinned() {
        let (xg, tg) = small_grids();
        let field = ftcs_solve(&Diffusivity::Constant(5e-3), &xg, &tg, paper_ic, (1.0, 2.0))
            .unwrap();
        for m in 0..tg.len() {
            assert_eq!(field.values()[(m, 0)], 1.0);
            assert_eq!(field.values()[(m, xg.len() - 1)], 2.0);
        }
    }

    #[test]
    fn step_diffusivity_is_inclusive_at_the_cutoff() {
        let beta = Diffusivity::Step { value: 5e-3, cutoff: 0.5 };
        assert_eq!(beta.eval(0.5), 5e-3);
        assert_eq!(beta.eval(0.5 + 1e-12), 0.0);
    }

    #[test]
    fn rank_one_field_decomposes_to_one_mode() {
        let (xg, tg) = small_grids();
        let c = |x: f64| (PI * x).sin() + 2.0;
        let a = |t: f64| 1.0 + 0.5 * (3.0 * t).sin();
        let values = DMatrix::from_fn(tg.len(), xg.len(), |m, j| a(tg.point(m)) * c(xg.point(j)));
        let field = SnapshotField::new(xg, tg, values).unwrap();
        let dec = pod_decompose(&field, 2).unwrap();
        assert!(dec.eigenvalues()[0] > 0.0);
        assert!(dec.eigenvalues()[1].abs() < 1e-10 * dec.eigenvalues()[0]);
        // one mode reconstructs the whole field
        let recon = reconstruct(
            &dec.spatial_modes().rows(0, 1).into_owned(),
            &dec.exact_temporal().columns(0, 1).into_owned(),
            &xg,
            &tg,
        )
        .unwrap();
        let err = recon.abs_difference(&field).unwrap().max_abs();
        assert!(err < 1e-8, "rank-1 reconstruction error {err}");
    }

    #[test]
    fn orthogonal_separable_terms_span_is_recovered() {
        let (xg, tg) = small_grids();
        let phi1 = |x: f64| (PI * x).sin() * 2.0f64.sqrt();
        let phi2 = |x: f64| (2.0 * PI * x).sin() * 2.0f64.sqrt();
        let values = DMatrix::from_fn(tg.len(), xg.len(), |m, j| {
            let t = tg.point(m);
            let x = xg.point(j);
            (1.0 + 0.3 * (2.0 * t).sin()) * phi1(x) + (-t).exp() * phi2(x)
        });
        let field = SnapshotField::new(xg, tg, values).unwrap();
        let dec = pod_decompose(&field, 2).unwrap();
        // each original basis function must lie in the recovered span
        for phi in [&phi1 as &dyn Fn(f64) -> f64, &phi2] {
            let target = DMatrix::from_fn(1, xg.len(), |_, j| phi(xg.point(j)));
            let mut residual = target.clone();
            for i in 0..2 {
                let coef = mode_inner_product(&target, 0, dec.spatial_modes(), i, &xg);
                for (j, slot) in residual.iter_mut().enumerate() {
                    *slot -= coef * dec.spatial_modes()[(i, j)];
                }
            }
            let norm = mode_inner_product(&residual, 0, &residual, 0, &xg).sqrt();
            assert!(norm < 1e-8, "projector gap {norm}");
        }
    }

    #[test]
    fn modes_are_orthonormal_and_energies_ordered() {
        let (xg, tg) = small_grids();
        let field = ftcs_solve(&Diffusivity::Constant(5e-3), &xg, &tg, paper_ic, (1.0, 2.0))
            .unwrap();
        let dec = pod_decompose(&field, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let ip = mode_inner_product(dec.spatial_modes(), i, dec.spatial_modes(), j, &xg);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-6, "gram[{i}][{j}] = {ip}");
            }
        }
        assert!(dec.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        assert!(dec.eigenvalues().iter().all(|&l| l >= -1e-12));
        // first interior point fixes the sign
        for i in 0..3 {
            assert!(dec.spatial_modes()[(i, 1)] >= 0.0);
        }
    }

    #[test]
    fn retained_energy_below_total_trace() {
        let (xg, tg) = small_grids();
        let field = ftcs_solve(&Diffusivity::Constant(5e-3), &xg, &tg, paper_ic, (1.0, 2.0))
            .unwrap();
        let dec = pod_decompose(&field, 4).unwrap();
        // total trace of the weighted correlation = time-average energy
        let wx = xg.simpson_weights();
        let wt = tg.simpson_weights();
        let mut trace = 0.0;
        for (m, wtm) in wt.iter().enumerate() {
            for (j, wxj) in wx.iter().enumerate() {
                trace += wtm / tg.span() * wxj * field.values()[(m, j)].powi(2);
            }
        }
        let retained: f64 = dec.eigenvalues().iter().sum();
        assert!(retained <= trace + 1e-10, "retained {retained} > trace {trace}");
    }

    #[test]
    fn reconstruction_temporal_modes_match_inputs() {
        let (xg, tg) = small_grids();
        let field = ftcs_solve(&Diffusivity::Constant(5e-3), &xg, &tg, paper_ic, (1.0, 2.0))
            .unwrap();
        let dec = pod_decompose(&field, 2).unwrap();
        let recon = dec.reconstruct_exact().unwrap();
        let wx = xg.simpson_weights();
        for i in 0..2 {
            for m in (0..tg.len()).step_by(100) {
                let mut acc = 0.0;
                for j in 0..xg.len() {
                    acc += wx[j] * recon.values()[(m, j)] * dec.spatial_modes()[(i, j)];
                }
                assert!(
                    (acc - dec.exact_temporal()[(m, i)]).abs() < 1e-8,
                    "mode {i} at step {m}"
                );
            }
        }
    }

    #[test]
    fn galerkin_matrix_diagonal_on_sine_modes() {
        let xg = UniformGrid::new(0.0, 1.0, 201).unwrap();
        let beta = Diffusivity::Constant(5e-3);
        let modes = DMatrix::from_fn(2, xg.len(), |i, j| {
            2.0f64.sqrt() * ((i as f64 + 1.0) * PI * xg.point(j)).sin()
        });
        let a = galerkin_matrix(&modes, &beta, &xg).unwrap();
        for k in 0..2 {
            let want = -5e-3 * ((k as f64 + 1.0) * PI).powi(2);
            assert!(
                (a[(k, k)] - want).abs() < 1e-4,
                "diagonal {k}: {} vs {want}",
                a[(k, k)]
            );
            let off = a[(k, 1 - k)].abs();
            assert!(off < 1e-4, "off-diagonal {off}");
        }
    }

    #[test]
    fn proxy_modes_constant_without_diffusion() {
        let (xg, tg) = small_grids();
        let field = ftcs_solve(&Diffusivity::Constant(0.0), &xg, &tg, paper_ic, (1.0, 2.0))
            .unwrap();
        let dec = pod_decompose(&field, 2).unwrap();
        let proxy = proxy_modes(&dec, &Diffusivity::Constant(0.0), 2).unwrap();
        for i in 0..2 {
            for m in 0..tg.len() {
                assert_abs_diff_eq!(
                    proxy[(m, i)],
                    dec.exact_temporal()[(0, i)],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn proxy_and_exact_modes_share_initial_value() {
        let (xg, tg) = small_grids();
        let field = ftcs_solve(&Diffusivity::Constant(5e-3), &xg, &tg, paper_ic, (1.0, 2.0))
            .unwrap();
        let dec = pod_decompose(&field, 2).unwrap();
        let proxy = proxy_modes(&dec, &Diffusivity::Constant(5e-3), 2).unwrap();
        for i in 0..2 {
            assert_eq!(proxy[(0, i)], dec.exact_temporal()[(0, i)]);
        }
    }

    #[test]
    fn linear_mode_dynamics_exactly_recovered() {
        // modes generated by a known linear system; max degree 1 must
        // recover the matrix entries and leave constant/cross terms at zero
        let tg = UniformGrid::new(0.0, 4.0, 4001).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[-0.3, 0.1, 0.05, -0.5]);
        let traj = integrate_substeps(&Dynamics::LinearModal(a.clone()), &[1.0, 0.6], &tg, 4)
            .unwrap();
        let test = TestBasis::fourier(12, 0.0, 4.0).unwrap();
        let model = mode_surrogate(traj.states(), &tg, &test, 1).unwrap();
        let basis = model.basis();
        let idx = |e0: u32, e1: u32| {
            basis
                .index_of(&crate::bases::MultiIndex(vec![e0, e1]))
                .unwrap()
        };
        for i in 0..2 {
            assert!(model.weights()[(idx(0, 0), i)].abs() < 1e-6, "constant term");
            assert!(model.weights()[(idx(1, 1), i)].abs() < 1e-6, "cross term");
            assert_abs_diff_eq!(model.weights()[(idx(1, 0), i)], a[(i, 0)], epsilon = 1e-6);
            assert_abs_diff_eq!(model.weights()[(idx(0, 1), i)], a[(i, 1)], epsilon = 1e-6);
        }
    }

    #[test]
    fn constant_modes_give_zero_weights() {
        let tg = UniformGrid::new(0.0, 2.0, 1001).unwrap();
        let modes = DMatrix::from_fn(1001, 2, |_, i| if i == 0 { 1.2 } else { -0.4 });
        let test = TestBasis::fourier(6, 0.0, 2.0).unwrap();
        let model = mode_surrogate(&modes, &tg, &test, 1).unwrap();
        assert!(model.weights().amax() < 1e-10);
    }

    #[test]
    fn reconstruct_validates_shapes_and_handles_zero_modes() {
        let (xg, tg) = small_grids();
        let zero = reconstruct(
            &DMatrix::zeros(0, xg.len()),
            &DMatrix::zeros(tg.len(), 0),
            &xg,
            &tg,
        )
        .unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        assert!(reconstruct(
            &DMatrix::zeros(2, xg.len()),
            &DMatrix::zeros(tg.len(), 3),
            &xg,
            &tg
        )
        .is_err());
    }

    #[test]
    fn csv_row_is_time_column_is_space() {
        let xg = UniformGrid::new(0.0, 1.0, 3).unwrap();
        let tg = UniformGrid::new(0.0, 1.0, 2).unwrap();
        let field = SnapshotField::new(
            xg,
            tg,
            DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
        )
        .unwrap();
        let mut buf = Vec::new();
        field.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1,2,3\n4,5,6\n");
    }
}
