//! Normal and regular sets and their unit-cube parametrization.
//!
//! A normal set of dimension k is described by bound pairs
//! `f_i(x1..x_{i-1}) <= x_i <= g_i(x1..x_{i-1})`, axis by axis. The map
//! `c: [0,1]^k -> R^k` interpolates each coordinate between its bounds:
//! `c_i(t) = (1 - t_i) f_i(c_1..c_{i-1}) + t_i g_i(c_1..c_{i-1})`.
//! Its Jacobian is lower triangular with diagonal `(g_i - f_i)(c)`.

use std::fmt;

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Expression, Family, ParseError, Slice, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("a normal set needs at least one axis")]
    Empty,
    #[error("bound {side} of axis {axis} uses `{var}`; only x1..x{} are allowed there", axis - 1)]
    Scope { axis: usize, side: &'static str, var: Var },
    #[error("lower bound exceeds upper bound on axis {axis} at x = {point:?} ({lower} > {upper})")]
    BoundsCrossed { axis: usize, point: Vec<f64>, lower: f64, upper: f64 },
    #[error("a regular set needs at least one piece")]
    NoPieces,
    #[error("piece {piece} has dimension {found}, expected {expected}")]
    PieceDimension { piece: usize, expected: usize, found: usize },
    #[error("interiors of pieces {first} and {second} overlap near x = {point:?}")]
    Overlap { first: usize, second: usize, point: Vec<f64> },
    #[error("face axis {axis} is outside 1..={dim}")]
    FaceAxis { axis: usize, dim: usize },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
struct Axis {
    lower: Expression,
    upper: Expression,
    /// Partials of the bounds with respect to x1..x_{i-1}.
    d_lower: Vec<Expression>,
    d_upper: Vec<Expression>,
}

/// A normal set in fixed axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalSet {
    axes: Vec<Axis>,
}

/// Values of `c(t)` together with the bound values along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct CubePoint {
    pub x: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CubePoint {
    /// `g_i - f_i` at the point, i.e. the Jacobian diagonal.
    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }
}

impl NormalSet {
    /// Builds a normal set from `(lower, upper)` pairs; bound `i` may only
    /// reference `x1..x_{i-1}`.
    pub fn new(bounds: Vec<(Expression, Expression)>) -> Result<Self, GeometryError> {
        if bounds.is_empty() {
            return Err(GeometryError::Empty);
        }
        let mut axes = Vec::with_capacity(bounds.len());
        for (i, (lower, upper)) in bounds.into_iter().enumerate() {
            let axis = i + 1;
            for (side, e) in [("lower", &lower), ("upper", &upper)] {
                if let Some(var) = e.free_vars().into_iter().find(|v| v.family != Family::X || v.index >= axis) {
                    return Err(GeometryError::Scope { axis, side, var });
                }
            }
            let d_lower = (1..axis).map(|l| lower.differentiate(Var::x(l))).collect();
            let d_upper = (1..axis).map(|l| upper.differentiate(Var::x(l))).collect();
            axes.push(Axis { lower, upper, d_lower, d_upper });
        }
        Ok(NormalSet { axes })
    }

    /// Parses bound pairs written in the expression grammar.
    pub fn parse(bounds: &[(&str, &str)]) -> Result<Self, GeometryError> {
        let pairs = bounds
            .iter()
            .map(|(l, u)| Ok((Expression::parse(l)?, Expression::parse(u)?)))
            .collect::<Result<Vec<_>, ParseError>>()?;
        NormalSet::new(pairs)
    }

    /// The unit box `[0,1]^k`.
    pub fn unit_box(k: usize) -> Self {
        NormalSet::new(vec![(Expression::zero(), Expression::one()); k]).expect("constant bounds are in scope")
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// `(lower, upper)` of every axis, in order.
    pub fn bounds(&self) -> impl Iterator<Item = (&Expression, &Expression)> {
        self.axes.iter().map(|a| (&a.lower, &a.upper))
    }

    /// Evaluates `c(t)` and the bounds encountered on the way.
    pub fn cube_point(&self, t: &[f64]) -> Result<CubePoint, EvalError> {
        let k = self.dim();
        debug_assert_eq!(t.len(), k);
        let mut x = Vec::with_capacity(k);
        let mut lower = Vec::with_capacity(k);
        let mut upper = Vec::with_capacity(k);
        for (axis, &ti) in self.axes.iter().zip(t) {
            let env = Slice::x(&x);
            let f = axis.lower.evaluate(&env)?;
            let g = axis.upper.evaluate(&env)?;
            x.push((1.0 - ti) * f + ti * g);
            lower.push(f);
            upper.push(g);
        }
        Ok(CubePoint { x, lower, upper })
    }

    /// `c(t)` for `t` in the unit cube.
    pub fn cube_param(&self, t: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok(self.cube_point(t)?.x)
    }

    /// `Dc/Dt` at `t`: row i holds the partials of `c_i`. Entries above the
    /// diagonal are exactly zero.
    pub fn cube_param_jacobian(&self, t: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let point = self.cube_point(t)?;
        self.jacobian_at(&point, t)
    }

    /// Jacobian reusing an already evaluated [`CubePoint`].
    pub fn jacobian_at(&self, point: &CubePoint, t: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let k = self.dim();
        let mut jac = DMatrix::zeros(k, k);
        let mut weights = Vec::with_capacity(k);
        for (i, axis) in self.axes.iter().enumerate() {
            jac[(i, i)] = point.width(i);
            if i == 0 {
                continue;
            }
            let env = Slice::x(&point.x[..i]);
            let ti = t[i];
            weights.clear();
            for l in 0..i {
                // a zero interpolation weight never evaluates its bound's
                // derivative, which may be singular on that face
                let mut w = 0.0;
                if ti != 1.0 {
                    w += (1.0 - ti) * axis.d_lower[l].evaluate(&env)?;
                }
                if ti != 0.0 {
                    w += ti * axis.d_upper[l].evaluate(&env)?;
                }
                weights.push(w);
            }
            for m in 0..i {
                let mut acc = 0.0;
                for l in m..i {
                    acc += weights[l] * jac[(l, m)];
                }
                jac[(i, m)] = acc;
            }
        }
        Ok(jac)
    }

    /// Point of the face: `c` at `t_j` fixed to 0 or 1 and the other
    /// coordinates taken from `s`.
    pub fn face_param(&self, face: Face, s: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.cube_param(&face.lift(s))
    }

    /// Partials of one bound of `axis` (1-based) with respect to
    /// `x1..x_{axis-1}`, evaluated at `prefix = (x1..x_{axis-1})`.
    pub fn bound_partials(&self, axis: usize, side: Side, prefix: &[f64]) -> Result<Vec<f64>, EvalError> {
        let a = &self.axes[axis - 1];
        let partials = match side {
            Side::Bottom => &a.d_lower,
            Side::Top => &a.d_upper,
        };
        let env = Slice::x(prefix);
        partials.iter().map(|p| p.evaluate(&env)).collect()
    }

    /// Closed membership test with zero tolerance.
    pub fn contains(&self, x: &[f64]) -> Result<bool, EvalError> {
        if x.len() != self.dim() {
            return Ok(false);
        }
        for (i, axis) in self.axes.iter().enumerate() {
            let env = Slice::x(&x[..i]);
            let f = axis.lower.evaluate(&env)?;
            let g = axis.upper.evaluate(&env)?;
            if !(f <= x[i] && x[i] <= g) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Membership with strict inequalities shrunk by `margin`.
    fn contains_interior(&self, x: &[f64], margin: f64) -> Result<bool, EvalError> {
        for (i, axis) in self.axes.iter().enumerate() {
            let env = Slice::x(&x[..i]);
            let f = axis.lower.evaluate(&env)?;
            let g = axis.upper.evaluate(&env)?;
            if !(f + margin < x[i] && x[i] < g - margin) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Coordinate-by-coordinate inverse of `c`. Axes whose width is below
    /// `1e-12` are assigned `t_i = 0`.
    pub fn cube_param_inverse(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut t = Vec::with_capacity(self.dim());
        for (i, axis) in self.axes.iter().enumerate() {
            let env = Slice::x(&x[..i]);
            let f = axis.lower.evaluate(&env)?;
            let g = axis.upper.evaluate(&env)?;
            t.push(if g - f < 1e-12 { 0.0 } else { (x[i] - f) / (g - f) });
        }
        Ok(t)
    }

    /// Inner approximation with bounds `min(f + eps, g)` and
    /// `max(g - eps, min(f + eps, g))`.
    pub fn shrink(&self, eps: f64) -> NormalSet {
        assert!(eps > 0.0, "shrink needs a positive epsilon");
        let eps = Expression::constant(eps);
        let bounds = self
            .axes
            .iter()
            .map(|a| {
                let lower = a.lower.add(&eps).min(&a.upper);
                let upper = a.upper.sub(&eps).max(&lower);
                (lower, upper)
            })
            .collect();
        NormalSet::new(bounds).expect("shrinking keeps variable scope")
    }

    /// Sampled check that `f_i <= g_i` wherever the parametrization reaches.
    pub fn check_ordered(&self, samples: usize, seed: u64) -> Result<(), GeometryError> {
        let mut rng = StdRng::seed_from_u64(seed);
        let k = self.dim();
        for n in 0..samples {
            // include the cube corners first, then random points
            let t: Vec<f64> = if n < (1 << k.min(10)) {
                (0..k).map(|i| ((n >> i) & 1) as f64).collect()
            } else {
                (0..k).map(|_| rng.random::<f64>()).collect()
            };
            let p = self.cube_point(&t)?;
            for i in 0..k {
                if p.lower[i] > p.upper[i] {
                    return Err(GeometryError::BoundsCrossed {
                        axis: i + 1,
                        point: p.x[..i].to_vec(),
                        lower: p.lower[i],
                        upper: p.upper[i],
                    });
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for NormalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.axes.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{} <= x{} <= {}", a.lower, i + 1, a.upper)?;
        }
        Ok(())
    }
}

/// Finite union of normal sets with disjoint interiors.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularSet {
    pieces: Vec<NormalSet>,
}

impl RegularSet {
    pub fn new(pieces: Vec<NormalSet>) -> Result<Self, GeometryError> {
        let first = pieces.first().ok_or(GeometryError::NoPieces)?;
        let expected = first.dim();
        for (piece, p) in pieces.iter().enumerate() {
            if p.dim() != expected {
                return Err(GeometryError::PieceDimension { piece, expected, found: p.dim() });
            }
        }
        Ok(RegularSet { pieces })
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].dim()
    }

    pub fn pieces(&self) -> &[NormalSet] {
        &self.pieces
    }

    /// Heuristic disjointness check: points sampled well inside one piece
    /// must not lie strictly inside another.
    pub fn check_disjoint_interiors(&self, samples: usize, seed: u64) -> Result<(), GeometryError> {
        if self.pieces.len() < 2 {
            return Ok(());
        }
        let mut rng = StdRng::seed_from_u64(seed);
        let k = self.dim();
        for (a, piece) in self.pieces.iter().enumerate() {
            for _ in 0..samples {
                let t: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..0.95)).collect();
                let p = piece.cube_point(&t)?;
                if (0..k).any(|i| p.width(i) <= 1e-9) {
                    continue;
                }
                for (b, other) in self.pieces.iter().enumerate() {
                    if a != b && other.contains_interior(&p.x, 1e-9)? {
                        let (first, second) = (a.min(b), a.max(b));
                        return Err(GeometryError::Overlap { first, second, point: p.x });
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `t_j = 0`
    Bottom,
    /// `t_j = 1`
    Top,
}

impl Side {
    pub fn value(self) -> f64 {
        match self {
            Side::Bottom => 0.0,
            Side::Top => 1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Bottom => "bottom",
            Side::Top => "top",
        })
    }
}

/// A face of the unit cube: axis `j` (1-based) frozen at 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

impl Face {
    pub fn new(axis: usize, side: Side, dim: usize) -> Result<Self, GeometryError> {
        if axis == 0 || axis > dim {
            return Err(GeometryError::FaceAxis { axis, dim });
        }
        Ok(Face { axis, side })
    }

    /// All 2k faces, axis-major, bottom before top.
    pub fn all(dim: usize) -> impl Iterator<Item = Face> {
        (1..=dim).flat_map(|axis| [Side::Bottom, Side::Top].map(|side| Face { axis, side }))
    }

    /// Inserts the frozen coordinate into a point of the (k-1)-cube.
    pub fn lift(&self, s: &[f64]) -> Vec<f64> {
        let j = self.axis - 1;
        let mut t = Vec::with_capacity(s.len() + 1);
        t.extend_from_slice(&s[..j]);
        t.push(self.side.value());
        t.extend_from_slice(&s[j..]);
        t
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}={}", self.axis, self.side.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> NormalSet {
        NormalSet::parse(&[("0", "1"), ("0", "x1")]).unwrap()
    }

    #[test]
    fn box_is_identity() {
        let b = NormalSet::unit_box(3);
        let t = [0.2, 0.7, 0.4];
        assert_eq!(b.cube_param(&t).unwrap(), t.to_vec());
        assert_eq!(b.cube_param_jacobian(&t).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn triangle_parametrization() {
        let tri = triangle();
        assert_eq!(tri.cube_param(&[0.5, 0.4]).unwrap(), vec![0.5, 0.2]);
        let j = tri.cube_param_jacobian(&[0.5, 0.4]).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.4, 0.5]));
        assert_eq!(j.determinant(), 0.5);
    }

    #[test]
    fn origin_maps_to_lower_chain() {
        let n = NormalSet::parse(&[("-1", "2"), ("x1^2", "3"), ("x1 + x2", "10")]).unwrap();
        assert_eq!(n.cube_param(&[0.0, 0.0, 0.0]).unwrap(), vec![-1.0, 1.0, 0.0]);
    }

    #[test]
    fn degenerate_axis_has_zero_determinant() {
        let n = NormalSet::parse(&[("0", "1"), ("x1", "x1")]).unwrap();
        let j = n.cube_param_jacobian(&[0.3, 0.6]).unwrap();
        assert_eq!(j[(1, 1)], 0.0);
        assert_eq!(j.determinant(), 0.0);
    }

    #[test]
    fn faces() {
        let b = NormalSet::unit_box(2);
        let top1 = Face::new(1, Side::Top, 2).unwrap();
        assert_eq!(b.face_param(top1, &[0.3]).unwrap(), vec![1.0, 0.3]);
        let tri = triangle();
        let top2 = Face::new(2, Side::Top, 2).unwrap();
        assert_eq!(tri.face_param(top2, &[0.3]).unwrap(), vec![0.3, 0.3]);
        assert!(Face::new(3, Side::Top, 2).is_err());
        assert!(Face::new(0, Side::Top, 2).is_err());
        assert_eq!(Face::all(2).count(), 4);
    }

    #[test]
    fn collapsed_face_coincides() {
        let n = NormalSet::parse(&[("0", "1"), ("x1^2", "x1")]).unwrap();
        // at x1 = 1 both x2 bounds equal 1: top and bottom faces of axis 2 meet
        let bottom = n.face_param(Face { axis: 2, side: Side::Bottom }, &[1.0]).unwrap();
        let top = n.face_param(Face { axis: 2, side: Side::Top }, &[1.0]).unwrap();
        assert_eq!(bottom, top);
    }

    #[test]
    fn membership() {
        let b = NormalSet::unit_box(2);
        assert!(b.contains(&[0.5, 0.5]).unwrap());
        assert!(!b.contains(&[1.5, 0.0]).unwrap());
        assert!(b.contains(&[1.0, 0.0]).unwrap());
        assert!(!triangle().contains(&[0.5, 0.6]).unwrap());
    }

    #[test]
    fn shrink_box_and_degenerate() {
        let s = NormalSet::unit_box(2).shrink(0.1);
        let p = s.cube_point(&[0.0, 1.0]).unwrap();
        assert!((p.x[0] - 0.1).abs() < 1e-15 && (p.x[1] - 0.9).abs() < 1e-15);
        let d = NormalSet::parse(&[("0", "1"), ("x1", "x1")]).unwrap().shrink(0.3);
        let p = d.cube_point(&[0.5, 0.7]).unwrap();
        assert_eq!(p.lower[1], p.upper[1]);
        assert_eq!(p.lower[1], p.x[0]);
    }

    #[test]
    fn shrink_triangle() {
        let s = triangle().shrink(0.25);
        let (lower, upper): (Vec<_>, Vec<_>) = s.bounds().map(|(l, u)| (l.to_string(), u.to_string())).unzip();
        assert_eq!(lower[1], "min(0.25, x1)");
        assert_eq!(upper[1], "max(x1 - 0.25, min(0.25, x1))");
        let p = s.cube_point(&[0.0, 0.0]).unwrap();
        assert_eq!(p.x[0], 0.25);
        let p = s.cube_point(&[1.0, 1.0]).unwrap();
        assert_eq!(p.x, vec![0.75, 0.5]);
    }

    #[test]
    fn scope_violations() {
        let err = NormalSet::parse(&[("0", "1"), ("0", "1"), ("x3", "1")]).unwrap_err();
        assert!(matches!(err, GeometryError::Scope { axis: 3, var, .. } if var == Var::x(3)));
        assert!(NormalSet::parse(&[("x1", "1")]).is_err());
        assert!(NormalSet::parse(&[("0", "1"), ("0", "y1")]).is_err());
        assert!(matches!(NormalSet::new(vec![]), Err(GeometryError::Empty)));
    }

    #[test]
    fn crossed_bounds_are_detected() {
        let n = NormalSet::parse(&[("0", "1"), ("0", "x1 - 0.5")]).unwrap();
        assert!(matches!(n.check_ordered(64, 1), Err(GeometryError::BoundsCrossed { axis: 2, .. })));
        assert!(triangle().check_ordered(64, 1).is_ok());
    }

    #[test]
    fn regular_set_overlap_detection() {
        let left = NormalSet::parse(&[("0", "0.5"), ("0", "1")]).unwrap();
        let right = NormalSet::parse(&[("0.5", "1"), ("0", "1")]).unwrap();
        let ok = RegularSet::new(vec![left.clone(), right]).unwrap();
        assert!(ok.check_disjoint_interiors(200, 3).is_ok());
        let bad = RegularSet::new(vec![left, NormalSet::unit_box(2)]).unwrap();
        assert!(matches!(bad.check_disjoint_interiors(200, 3), Err(GeometryError::Overlap { .. })));
        assert!(RegularSet::new(vec![]).is_err());
        assert!(RegularSet::new(vec![NormalSet::unit_box(2), NormalSet::unit_box(3)]).is_err());
    }
}
