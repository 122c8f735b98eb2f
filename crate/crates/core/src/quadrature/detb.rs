//! Finite-difference residual of the determinant `det B`.
//!
//! For `e = Φ∘c` and a multi-index `I` of length `k-1`,
//! `det B = Σ_j (-1)^(j-1) ∂/∂t_j det(De_I / Dt_{-j})`, which vanishes
//! identically when the data are C². The outer derivative is taken by
//! centered differences; the inner Jacobians stay symbolic.

use super::chart::{chart_jacobian_through_cube, minor_det, ChartMap};
use super::QuadratureError;
use crate::forms::MultiIndex;
use crate::geometry::NormalSet;

/// `|Σ_j (-1)^(j-1) [M_j(t + h e_j) - M_j(t - h e_j)] / 2h|` with
/// `M_j = det(D(Φ∘c)_I / Dt_{-j})`.
pub fn det_b_residual(
    chart: &ChartMap,
    set: &NormalSet,
    index: &MultiIndex,
    t: &[f64],
    h: f64,
) -> Result<f64, QuadratureError> {
    let k = set.dim();
    if index.len() + 1 != k || chart.domain_dim() != k {
        return Err(QuadratureError::IndexLength { expected: k - 1, found: index.len() });
    }
    if let Some(&bad) = index.as_slice().iter().find(|&&i| i > chart.ambient_dim()) {
        return Err(QuadratureError::IndexLength { expected: chart.ambient_dim(), found: bad });
    }
    if h.is_nan() || h <= 0.0 || t.len() != k || t.iter().any(|&v| v - h <= 0.0 || v + h >= 1.0) {
        return Err(QuadratureError::StencilOutsideCube { h });
    }
    let mut total = 0.0;
    let mut shifted = t.to_vec();
    for j in 0..k {
        shifted[j] = t[j] + h;
        let plus = minor_det(&chart_jacobian_through_cube(chart, set, &shifted)?, index, Some(j));
        shifted[j] = t[j] - h;
        let minus = minor_det(&chart_jacobian_through_cube(chart, set, &shifted)?, index, Some(j));
        shifted[j] = t[j];
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * (plus - minus) / (2.0 * h);
    }
    Ok(total.abs())
}
