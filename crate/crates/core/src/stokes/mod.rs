//! Both sides of `∫_S dω = ∫_∂S ω` for `S = Φ(A)`, `A` a regular set.
//!
//! The volume side integrates the pullback of `dω` through `Φ∘c` over the
//! unit cube of every piece. The boundary side integrates, for every axis
//! `j`, `(-1)^(j-1) [b(Φ∘c) det D(Φ∘c)_I/Dt_{-j}]` between the faces
//! `t_j = 1` and `t_j = 0`. Faces shared by two pieces are integrated from
//! both sides and cancel numerically.

mod checks;
mod integrals;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checks::{
    convergence_study, dd_residual, det_b_study, ibp_residual, random_form, reparam_residual, ConvergenceRow,
    ConvergenceTable, DdResidual, DetBPoint, DetBStudy, IbpProblem, IbpReport, ReparamReport,
};
pub use integrals::{
    boundary_faces, boundary_integral, face_integral_w, volume_by_piece, volume_integral, FaceContribution,
};

use crate::expr::EvalError;
use crate::forms::{DifferentialForm, FormError};
use crate::geometry::{Face, GeometryError, RegularSet, Side};
use crate::quadrature::{ChartMap, Execution, QuadratureError, QuadratureSpec};
use crate::summation;

/// Default relative tolerance of [`verify`].
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

const SAMPLE_SEED: u64 = 0x5eed;
const ORDER_SAMPLES: usize = 64;
const OVERLAP_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StokesError {
    #[error("region dimension must be at least 2, got {0}")]
    RegionDimension(usize),
    #[error("chart domain has dimension {chart}, region has dimension {region}")]
    ChartDomain { chart: usize, region: usize },
    #[error("form lives on R^{form} but the chart maps into R^{chart}")]
    Ambient { form: usize, chart: usize },
    #[error("form has degree {found}, expected {expected} (one less than the region dimension)")]
    Degree { found: usize, expected: usize },
    #[error("tolerance must be positive and finite, got {0}")]
    Tolerance(f64),
    #[error("{}{source}", piece.map(|p| format!("piece {p}: ")).unwrap_or_default())]
    Geometry { piece: Option<usize>, source: GeometryError },
    #[error("piece {piece}{}: {source}", face.map(|f| format!(", face {f}")).unwrap_or_default())]
    Integration { piece: usize, face: Option<Face>, source: QuadratureError },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("a convergence study needs at least 3 levels, got {0}")]
    TooFewLevels(usize),
    #[error("reparametrization must map [0,1]^{k} into itself; got a map R^{domain} -> R^{ambient}")]
    ReparamShape { k: usize, domain: usize, ambient: usize },
    #[error("reparametrization is not orientation preserving: det = {det} at u = {point:?}")]
    ReparamOrientation { point: Vec<f64>, det: f64 },
    #[error("reparametrization leaves the unit cube: rho({point:?}) = {image:?}")]
    ReparamRange { point: Vec<f64>, image: Vec<f64> },
    #[error("piece index {0} out of range")]
    PieceIndex(usize),
    #[error("integration-by-parts problem is malformed: {0}")]
    Ibp(String),
}

/// Qualitative smoothness of a scenario's data, reported alongside results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothness {
    /// Polynomial data: Gauss rules are exact at modest order.
    Polynomial,
    /// C∞ data: spectral convergence in the points per cell.
    #[default]
    Smooth,
    /// Bounded but with derivative singularities on the boundary; only
    /// algebraic convergence is expected.
    Limited,
}

impl fmt::Display for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Smoothness::Polynomial => "polynomial",
            Smoothness::Smooth => "smooth",
            Smoothness::Limited => "limited",
        })
    }
}

/// A validated Stokes problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub smoothness: Smoothness,
    /// Closed-form value of both sides, when known.
    pub exact: Option<f64>,
    region: RegularSet,
    chart: ChartMap,
    form: DifferentialForm,
    derivative: DifferentialForm,
    pub quadrature: QuadratureSpec,
    pub tolerance: f64,
}

impl Scenario {
    /// Validates dimensions and degree, and samples the region for crossed
    /// bounds and overlapping pieces.
    pub fn new(
        region: RegularSet,
        chart: ChartMap,
        form: DifferentialForm,
        quadrature: QuadratureSpec,
        tolerance: f64,
    ) -> Result<Self, StokesError> {
        let k = region.dim();
        if k < 2 {
            return Err(StokesError::RegionDimension(k));
        }
        if chart.domain_dim() != k {
            return Err(StokesError::ChartDomain { chart: chart.domain_dim(), region: k });
        }
        if form.ambient_dim() != chart.ambient_dim() {
            return Err(StokesError::Ambient { form: form.ambient_dim(), chart: chart.ambient_dim() });
        }
        if form.degree() != k - 1 {
            return Err(StokesError::Degree { found: form.degree(), expected: k - 1 });
        }
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(StokesError::Tolerance(tolerance));
        }
        quadrature.validate()?;
        for (piece, set) in region.pieces().iter().enumerate() {
            set.check_ordered(ORDER_SAMPLES, SAMPLE_SEED)
                .map_err(|source| StokesError::Geometry { piece: Some(piece), source })?;
        }
        region
            .check_disjoint_interiors(OVERLAP_SAMPLES, SAMPLE_SEED)
            .map_err(|source| StokesError::Geometry { piece: None, source })?;
        let derivative = form.exterior_derivative()?;
        Ok(Scenario {
            name: String::new(),
            description: String::new(),
            smoothness: Smoothness::default(),
            exact: None,
            region,
            chart,
            form,
            derivative,
            quadrature,
            tolerance,
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_quadrature(mut self, quadrature: QuadratureSpec) -> Self {
        self.quadrature = quadrature;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Result<Self, StokesError> {
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(StokesError::Tolerance(tolerance));
        }
        self.tolerance = tolerance;
        Ok(self)
    }

    /// Same region and chart with another `(k-1)`-form.
    pub fn with_form(&self, form: DifferentialForm) -> Result<Self, StokesError> {
        let mut s = Scenario::new(self.region.clone(), self.chart.clone(), form, self.quadrature, self.tolerance)?;
        s.name = self.name.clone();
        s.description = self.description.clone();
        s.smoothness = self.smoothness;
        Ok(s)
    }

    /// Same chart and form over another region.
    pub fn with_region(&self, region: RegularSet) -> Result<Self, StokesError> {
        let mut s = Scenario::new(region, self.chart.clone(), self.form.clone(), self.quadrature, self.tolerance)?;
        s.name = self.name.clone();
        s.smoothness = self.smoothness;
        s.exact = self.exact;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn region(&self) -> &RegularSet {
        &self.region
    }

    pub fn chart(&self) -> &ChartMap {
        &self.chart
    }

    pub fn form(&self) -> &DifferentialForm {
        &self.form
    }

    /// `dω`, computed once at construction.
    pub fn derivative(&self) -> &DifferentialForm {
        &self.derivative
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceReport {
    pub axis: usize,
    pub side: Side,
    /// Signed contribution to the boundary integral.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceReport {
    pub piece: usize,
    pub volume: f64,
    pub boundary: f64,
    pub faces: Vec<FaceReport>,
}

/// Outcome of [`verify`]. Residuals are functions of `lhs` and `rhs` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub smoothness: Smoothness,
    pub quadrature: QuadratureSpec,
    pub tolerance: f64,
    /// `∫_S dω`
    pub lhs: f64,
    /// `∫_∂S ω`
    pub rhs: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exact: Option<f64>,
    pub pass: bool,
    pub pieces: Vec<PieceReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostic: Option<String>,
}

/// `|lhs - rhs| / (1 + max(|lhs|, |rhs|))`.
pub fn relative_residual(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / (1.0 + lhs.abs().max(rhs.abs()))
}

/// Computes both sides; upstream failures become a failed report carrying
/// the diagnostic.
pub fn verify(s: &Scenario) -> VerificationReport {
    verify_with(s, Execution::default())
}

pub fn verify_with(s: &Scenario, execution: Execution) -> VerificationReport {
    try_verify_with(s, execution).unwrap_or_else(|err| VerificationReport {
        scenario: s.name.clone(),
        smoothness: s.smoothness,
        quadrature: s.quadrature,
        tolerance: s.tolerance,
        lhs: f64::NAN,
        rhs: f64::NAN,
        abs_residual: f64::NAN,
        rel_residual: f64::NAN,
        exact: s.exact,
        pass: false,
        pieces: Vec::new(),
        diagnostic: Some(err.to_string()),
    })
}

pub fn try_verify(s: &Scenario) -> Result<VerificationReport, StokesError> {
    try_verify_with(s, Execution::default())
}

pub fn try_verify_with(s: &Scenario, execution: Execution) -> Result<VerificationReport, StokesError> {
    let volumes = integrals::volume_by_piece_with(s, execution)?;
    let faces = integrals::boundary_faces_with(s, execution)?;
    let pieces: Vec<PieceReport> = volumes
        .iter()
        .enumerate()
        .map(|(piece, &volume)| {
            let own: Vec<FaceReport> = faces
                .iter()
                .filter(|f| f.piece == piece)
                .map(|f| FaceReport { axis: f.face.axis, side: f.face.side, value: f.value })
                .collect();
            PieceReport { piece, volume, boundary: summation::sum(own.iter().map(|f| f.value)), faces: own }
        })
        .collect();
    let lhs = summation::sum(volumes.iter().copied());
    let rhs = summation::sum(faces.iter().map(|f| f.value));
    let rel_residual = relative_residual(lhs, rhs);
    Ok(VerificationReport {
        scenario: s.name.clone(),
        smoothness: s.smoothness,
        quadrature: s.quadrature,
        tolerance: s.tolerance,
        lhs,
        rhs,
        abs_residual: (lhs - rhs).abs(),
        rel_residual,
        exact: s.exact,
        pass: rel_residual <= s.tolerance,
        pieces,
        diagnostic: None,
    })
}
