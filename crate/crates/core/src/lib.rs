//! Differential forms over normal and regular sets, with a quadrature-based
//! check of the Stokes identity `∫_S dω = ∫_∂S ω`.
//!
//! The pieces, bottom up:
//!
//! - [`expr`]: parsed scalar expressions with symbolic partial derivatives.
//! - [`geometry`]: normal sets, the unit-cube parametrization and its faces.
//! - [`forms`]: canonical multi-index forms and the exterior derivative.
//! - [`quadrature`]: chart maps, Jacobian minors, tensor Gauss–Legendre
//!   cubature and the `det B` residual.
//! - [`stokes`]: both sides of the identity plus the supporting checks.
//! - [`scenario`]: the JSON scenario format and the built-in catalog.
//! - [`cli`]: the command-line front end.
//!
//! With the default `parallel` feature the cubature spreads cells over the
//! rayon pool; the reduction order is fixed, so results are bit-identical for
//! any thread count.

pub mod cli;
pub mod expr;
pub mod forms;
pub mod geometry;
pub mod quadrature;
pub mod scenario;
pub mod stokes;
pub mod summation;

use thiserror::Error;

pub use expr::{Environment, Expression, Var};
pub use forms::{DifferentialForm, MultiIndex};
pub use geometry::{Face, NormalSet, RegularSet, Side};
pub use quadrature::{ChartMap, Execution, QuadratureSpec};
pub use scenario::{Scenario, ScenarioFile};
pub use stokes::VerificationReport;

/// Umbrella error for the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] expr::ParseError),
    #[error(transparent)]
    Eval(#[from] expr::EvalError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Form(#[from] forms::FormError),
    #[error(transparent)]
    Quadrature(#[from] quadrature::QuadratureError),
    #[error(transparent)]
    Stokes(#[from] stokes::StokesError),
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
}
