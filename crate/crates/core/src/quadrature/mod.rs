//! Cubature on the unit cube, chart maps through the cube parametrization,
//! pullback integrands and the `det B` residual.

mod chart;
mod cubature;
mod detb;
mod gauss;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chart::{chart_jacobian_through_cube, chart_point, minor_det, outward_vector, pullback_integrand, ChartMap, ChartPoint};
pub(crate) use chart::{normal_face_value, pullback_value};
pub use cubature::{integrate_unit_cube, integrate_unit_cube_with};
pub use detb::det_b_residual;
pub use gauss::gauss_legendre;

use crate::expr::{EvalError, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("quadrature needs at least one point and one cell per axis (got points={points}, cells={cells})")]
    InvalidSpec { points: usize, cells: usize },
    #[error("cannot integrate over a zero-dimensional cube")]
    ZeroDimension,
    #[error("node count overflows")]
    TooManyNodes,
    #[error("integrand is not finite ({value}) at node {node:?}")]
    NonFinite { node: Vec<f64>, value: f64 },
    #[error("evaluation failed at node {node:?}: {source}")]
    Eval { node: Vec<f64>, source: EvalError },
    #[error("chart component {component} uses `{var}`; only x1..x{k} are allowed")]
    ChartScope { component: usize, var: Var, k: usize },
    #[error("a chart from R^{k} needs at least {k} components, got {n}")]
    ChartDimension { k: usize, n: usize },
    #[error("form of degree {degree} on R^{form_n} cannot be pulled back over a {k}-dimensional set by a chart R^{chart_k} -> R^{chart_n}")]
    Shape { degree: usize, k: usize, chart_k: usize, form_n: usize, chart_n: usize },
    #[error("multi-index has the wrong shape (expected {expected}, found {found})")]
    IndexLength { expected: usize, found: usize },
    #[error("finite-difference stencil with h = {h} leaves the open unit cube")]
    StencilOutsideCube { h: f64 },
    #[error(transparent)]
    Evaluate(#[from] EvalError),
}

/// Composite tensor-product Gauss–Legendre rule: `points` nodes per axis in
/// each of `cells` subintervals per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub points: usize,
    #[serde(default = "one")]
    pub cells: usize,
}

fn one() -> usize {
    1
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { points: 12, cells: 4 }
    }
}

impl QuadratureSpec {
    pub fn new(points: usize, cells: usize) -> Result<Self, QuadratureError> {
        let spec = QuadratureSpec { points, cells };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), QuadratureError> {
        if self.points == 0 || self.cells == 0 {
            return Err(QuadratureError::InvalidSpec { points: self.points, cells: self.cells });
        }
        Ok(())
    }

    /// Nodes per axis.
    pub fn resolution(&self) -> usize {
        self.points * self.cells
    }
}

/// How cells of a cubature are scheduled. Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    /// Cells on the rayon pool; falls back to sequential without the
    /// `parallel` feature.
    #[cfg_attr(feature = "parallel", default)]
    Parallel,
}
