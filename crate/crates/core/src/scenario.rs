//! JSON scenario files and the built-in catalog.
//!
//! ```json
//! {
//!   "version": "stokes-scenario/1",
//!   "name": "triangle-2d",
//!   "description": "free text",
//!   "smoothness": "polynomial",          // polynomial | smooth | limited
//!   "k": 2,                              // dimension of the parameter region
//!   "n": 2,                              // dimension of the ambient space
//!   "region": [                          // one list of k bounds per piece
//!     [ { "lower": "0", "upper": "1" },  // bounds of axis i use x1..x(i-1)
//!       { "lower": "0", "upper": "x1" } ]
//!   ],
//!   "chart": ["x1", "x2"],               // n components in x1..xk
//!   "form": [                            // (k-1)-form, coefficients in y1..yn
//!     { "indices": [2], "coeff": "y1*y2" }
//!   ],
//!   "quadrature": { "points": 12, "cells": 4 },
//!   "tolerance": 1e-6,
//!   "exact": 0.16666666666666666         // optional closed-form value
//! }
//! ```
//!
//! `description`, `smoothness`, `quadrature`, `tolerance` and `exact` are
//! optional. Unknown fields are rejected.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expression, Family, Var};
use crate::forms::DifferentialForm;
use crate::geometry::{NormalSet, RegularSet};
use crate::quadrature::{ChartMap, QuadratureSpec};
use crate::stokes::{Smoothness, StokesError, DEFAULT_TOLERANCE};

pub use crate::stokes::Scenario;

pub const VERSION: &str = "stokes-scenario/1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{field}: {message}")]
    Schema { field: String, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Scenario(#[from] StokesError),
    #[error("no built-in scenario named `{0}`")]
    UnknownBuiltin(String),
}

fn invalid(field: impl Into<String>, message: impl ToString) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), message: message.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    pub lower: String,
    pub upper: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub indices: Vec<usize>,
    pub coeff: String,
}

/// The on-disk form of a [`Scenario`]; expressions are kept as text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default)]
    pub smoothness: Smoothness,
    pub k: usize,
    pub n: usize,
    pub region: Vec<Vec<BoundSpec>>,
    pub chart: Vec<String>,
    pub form: Vec<TermSpec>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

impl ScenarioFile {
    /// Parses JSON text; schema errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            ScenarioError::Schema { field: if field == "." { "$".into() } else { field }, message: e.into_inner().to_string() }
        })?;
        if file.version != VERSION {
            return Err(invalid("version", format!("expected \"{VERSION}\", found \"{}\"", file.version)));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario files always serialize")
    }

    /// Turns the text into a validated [`Scenario`].
    pub fn to_scenario(&self) -> Result<Scenario, ScenarioError> {
        let (k, n) = (self.k, self.n);
        if k < 2 {
            return Err(invalid("k", format!("must be at least 2, got {k}")));
        }
        if n < k {
            return Err(invalid("n", format!("must be at least k = {k}, got {n}")));
        }
        if self.region.is_empty() {
            return Err(invalid("region", "needs at least one piece"));
        }
        let mut pieces = Vec::with_capacity(self.region.len());
        for (p, bounds) in self.region.iter().enumerate() {
            if bounds.len() != k {
                return Err(invalid(format!("region[{p}]"), format!("expected {k} bounds, found {}", bounds.len())));
            }
            let mut parsed = Vec::with_capacity(k);
            for (i, b) in bounds.iter().enumerate() {
                let field = |side: &str| format!("region[{p}][{i}].{side}");
                let lower = parse_scoped(&b.lower, &field("lower"), Family::X, i)?;
                let upper = parse_scoped(&b.upper, &field("upper"), Family::X, i)?;
                parsed.push((lower, upper));
            }
            pieces.push(NormalSet::new(parsed).map_err(|e| invalid(format!("region[{p}]"), e))?);
        }
        let region = RegularSet::new(pieces).map_err(|e| invalid("region", e))?;

        if self.chart.len() != n {
            return Err(invalid("chart", format!("expected {n} components, found {}", self.chart.len())));
        }
        let components = self
            .chart
            .iter()
            .enumerate()
            .map(|(i, c)| parse_scoped(c, &format!("chart[{i}]"), Family::X, k))
            .collect::<Result<Vec<_>, _>>()?;
        let chart = ChartMap::new(k, components).map_err(|e| invalid("chart", e))?;

        let mut terms = Vec::with_capacity(self.form.len());
        for (i, t) in self.form.iter().enumerate() {
            if t.indices.len() != k - 1 {
                return Err(invalid(
                    format!("form[{i}].indices"),
                    format!("expected {} indices for a form of degree k-1 = {}, found {}", k - 1, k - 1, t.indices.len()),
                ));
            }
            if let Some(&bad) = t.indices.iter().find(|&&j| j == 0 || j > n) {
                return Err(invalid(format!("form[{i}].indices"), format!("index {bad} outside 1..={n}")));
            }
            terms.push((t.indices.clone(), parse_scoped(&t.coeff, &format!("form[{i}].coeff"), Family::Y, n)?));
        }
        let form = DifferentialForm::new(n, k - 1, terms).map_err(|e| invalid("form", e))?;

        self.quadrature.validate().map_err(|e| invalid("quadrature", e))?;
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(invalid("tolerance", format!("must be positive and finite, got {}", self.tolerance)));
        }
        let mut scenario = Scenario::new(region, chart, form, self.quadrature, self.tolerance).map_err(|e| match e {
            StokesError::Geometry { piece: Some(p), source } => invalid(format!("region[{p}]"), source),
            StokesError::Geometry { piece: None, source } => invalid("region", source),
            other => ScenarioError::Scenario(other),
        })?;
        scenario.name = self.name.clone();
        scenario.description = self.description.clone();
        scenario.smoothness = self.smoothness;
        scenario.exact = self.exact;
        Ok(scenario)
    }

    /// The file describing `s`. Expressions are printed in the parser's
    /// grammar, so `from_scenario(s).to_scenario()` reproduces `s`.
    pub fn from_scenario(s: &Scenario) -> Self {
        ScenarioFile {
            version: VERSION.to_string(),
            name: s.name.clone(),
            description: s.description.clone(),
            smoothness: s.smoothness,
            k: s.dim(),
            n: s.chart().ambient_dim(),
            region: s
                .region()
                .pieces()
                .iter()
                .map(|p| p.bounds().map(|(l, u)| BoundSpec { lower: l.to_string(), upper: u.to_string() }).collect())
                .collect(),
            chart: s.chart().components().iter().map(|c| c.to_string()).collect(),
            form: s
                .form()
                .terms()
                .iter()
                .map(|t| TermSpec { indices: t.index.as_slice().to_vec(), coeff: t.coeff.to_string() })
                .collect(),
            quadrature: s.quadrature,
            tolerance: s.tolerance,
            exact: s.exact,
        }
    }
}

/// Parses `text` and checks it only uses `family` variables with index
/// `1..=max`.
fn parse_scoped(text: &str, field: &str, family: Family, max: usize) -> Result<Expression, ScenarioError> {
    let e = Expression::parse(text).map_err(|err| invalid(field, format!("{err} in \"{text}\"")))?;
    if let Some(v) = e.free_vars().into_iter().find(|v| v.family != family || v.index > max) {
        let allowed = match max {
            0 => "no variables".to_string(),
            m => format!("only {}..{}", Var { family, index: 1 }, Var { family, index: m }),
        };
        return Err(invalid(field, format!("uses `{v}`; {allowed} are allowed here")));
    }
    Ok(e)
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    load_file(path)?.to_scenario()
}

pub fn load_file(path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })?;
    ScenarioFile::from_json(&text)
}

/// Built-in scenarios, in catalog order.
const BUILTINS: &[(&str, &str)] = &[
    ("green-square", include_str!("../scenarios/green-square.json")),
    ("triangle-2d", include_str!("../scenarios/triangle-2d.json")),
    ("divergence-ball-3d", include_str!("../scenarios/divergence-ball-3d.json")),
    ("hemisphere-in-R3", include_str!("../scenarios/hemisphere-in-R3.json")),
    ("annulus-two-pieces", include_str!("../scenarios/annulus-two-pieces.json")),
    ("degenerate-collapsed-face", include_str!("../scenarios/degenerate-collapsed-face.json")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(name, _)| *name)
}

/// The raw JSON of a built-in scenario.
pub fn builtin_json(name: &str) -> Result<&'static str, ScenarioError> {
    BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| ScenarioError::UnknownBuiltin(name.to_string()))
}

pub fn builtin_file(name: &str) -> Result<ScenarioFile, ScenarioError> {
    ScenarioFile::from_json(builtin_json(name)?)
}

pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    builtin_file(name)?.to_scenario()
}

/// All built-ins keyed by name.
pub fn builtins() -> Result<BTreeMap<&'static str, Scenario>, ScenarioError> {
    builtin_names().map(|n| Ok((n, builtin(n)?))).collect()
}

/// A path on disk, or else the name of a built-in with or without `.json`.
pub fn resolve(spec: &str) -> Result<Scenario, ScenarioError> {
    let path = Path::new(spec);
    if path.exists() {
        return load_scenario(path);
    }
    let name = path.file_name().and_then(|f| f.to_str()).unwrap_or(spec);
    let name = name.strip_suffix(".json").unwrap_or(name);
    match builtin(name) {
        Err(ScenarioError::UnknownBuiltin(_)) => {
            Err(ScenarioError::Io { path: spec.to_string(), message: "no such file or built-in scenario".into() })
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_loads_and_round_trips() {
        for name in builtin_names() {
            let s = builtin(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(s.name, name);
            let again = ScenarioFile::from_json(&ScenarioFile::from_scenario(&s).to_json()).unwrap().to_scenario().unwrap();
            assert_eq!(s, again, "{name}");
        }
    }

    #[test]
    fn green_square_shape() {
        let s = builtin("green-square").unwrap();
        assert_eq!((s.dim(), s.chart().ambient_dim()), (2, 2));
    }

    fn with(edit: impl FnOnce(&mut serde_json::Value)) -> Result<Scenario, ScenarioError> {
        let mut v: serde_json::Value = serde_json::from_str(builtin_json("triangle-2d").unwrap()).unwrap();
        edit(&mut v);
        ScenarioFile::from_json(&v.to_string())?.to_scenario()
    }

    #[test]
    fn degree_mismatch_names_the_field() {
        let err = with(|v| v["form"][0]["indices"] = serde_json::json!([1, 2])).unwrap_err();
        match err {
            ScenarioError::Invalid { field, .. } => assert_eq!(field, "form[0].indices"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bound_scope_violation_names_the_field() {
        let err = with(|v| v["region"][0][1]["upper"] = "x2".into()).unwrap_err();
        match err {
            ScenarioError::Invalid { field, message } => {
                assert_eq!(field, "region[0][1].upper");
                assert!(message.contains("x2"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn third_bound_using_x3_is_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(builtin_json("divergence-ball-3d").unwrap()).unwrap();
        v["region"][0][2]["lower"] = "x3 - 2".into();
        let err = ScenarioFile::from_json(&v.to_string()).unwrap().to_scenario().unwrap_err();
        assert!(matches!(&err, ScenarioError::Invalid { field, .. } if field == "region[0][2].lower"), "{err}");
    }

    #[test]
    fn parse_error_reports_location() {
        let err = with(|v| v["chart"][1] = "x2 +* 1".into()).unwrap_err();
        let text = err.to_string();
        assert!(text.starts_with("chart[1]: ") && text.contains("offset"), "{text}");
    }

    #[test]
    fn schema_errors_carry_a_path() {
        let err = with(|v| v["quadrature"]["points"] = "many".into()).unwrap_err();
        assert!(matches!(&err, ScenarioError::Schema { field, .. } if field == "quadrature.points"), "{err}");
        let err = with(|v| v["extra"] = 1.into()).unwrap_err();
        assert!(matches!(err, ScenarioError::Schema { .. }));
        let err = with(|v| v["version"] = "stokes-scenario/0".into()).unwrap_err();
        assert!(matches!(&err, ScenarioError::Invalid { field, .. } if field == "version"));
    }

    #[test]
    fn resolve_accepts_builtin_names_with_extension() {
        assert_eq!(resolve("green-square.json").unwrap().name, "green-square");
        assert!(matches!(resolve("no-such-thing"), Err(ScenarioError::Io { .. })));
    }
}
