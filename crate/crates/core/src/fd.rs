//! Finite-difference stencil weights on uniform grids.
//!
//! Weights are generated by solving the small Vandermonde system for the
//! requested derivative order, so one routine covers centered, offset, and
//! one-sided stencils alike.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Weights `c` such that `sum_j c[j] * f(x + offsets[j] * h)` approximates
/// the `order`-th derivative of `f` at `x`, exact for polynomials of degree
/// below `offsets.len()`.
pub(crate) fn stencil_weights(offsets: &[i64], order: usize, h: f64) -> Result<Vec<f64>> {
    let p = offsets.len();
    if order >= p {
        return Err(Error::InsufficientData(format!(
            "{p}-point stencil cannot produce derivative order {order}"
        )));
    }
    let v = DMatrix::from_fn(p, p, |m, j| (offsets[j] as f64).powi(m as i32));
    let mut rhs = DVector::zeros(p);
    rhs[order] = (1..=order).product::<usize>() as f64 / h.powi(order as i32);
    let solution = v
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular stencil system".into()))?;
    Ok(solution.iter().copied().collect())
}

/// First derivative of sampled values, fourth-order accurate: centered
/// five-point stencils in the interior, one-sided at the two ends.
pub(crate) fn derivative_fourth_order(values: &[f64], h: f64) -> Result<Vec<f64>> {
    apply_stencils(values, h, 1)
}

/// Second derivative of sampled values, fourth-order accurate.
pub(crate) fn second_derivative_fourth_order(values: &[f64], h: f64) -> Result<Vec<f64>> {
    apply_stencils(values, h, 2)
}

fn apply_stencils(values: &[f64], h: f64, order: usize) -> Result<Vec<f64>> {
    // order 1 stays fourth-order with 5 points; order 2 needs 6 near the ends
    let width = if order == 1 { 5 } else { 6 };
    let half = 2; // centered half-width for the interior stencil
    let n = values.len();
    if n < width {
        return Err(Error::InsufficientData(format!(
            "need at least {width} samples for a fourth-order stencil, got {n}"
        )));
    }
    let centered_offsets: Vec<i64> = (-(half as i64)..=half as i64).collect();
    let centered = stencil_weights(&centered_offsets, order, h)?;
    let mut out = vec![0.0; n];
    for (i, slot) in out.iter_mut().enumerate() {
        let (base, weights) = if i >= half && i + half < n {
            (i - half, centered.clone())
        } else {
            let start = if i < half { 0 } else { n - width };
            let offsets: Vec<i64> =
                (0..width as i64).map(|o| start as i64 + o - i as i64).collect();
            (start, stencil_weights(&offsets, order, h)?)
        };
        *slot = weights
            .iter()
            .enumerate()
            .map(|(j, wj)| wj * values[base + j])
            .sum();
    }
    Ok(out)
}
