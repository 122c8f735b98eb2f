//! Chart maps `Φ: R^k -> R^n` composed with the cube parametrization, and
//! the pullback integrands built from their Jacobian minors.

use nalgebra::DMatrix;

use super::QuadratureError;
use crate::expr::{EvalError, Expression, Family, ParseError, Slice, Var};
use crate::forms::{DifferentialForm, MultiIndex};
use crate::geometry::{CubePoint, Face, NormalSet, Side};

/// `Φ` with its symbolic partials `∂Φ_i/∂x_j` cached.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartMap {
    k: usize,
    components: Vec<Expression>,
    partials: Vec<Vec<Expression>>,
}

impl ChartMap {
    pub fn new(k: usize, components: Vec<Expression>) -> Result<Self, QuadratureError> {
        if k == 0 || components.len() < k {
            return Err(QuadratureError::ChartDimension { k, n: components.len() });
        }
        for (i, c) in components.iter().enumerate() {
            if let Some(var) = c.free_vars().into_iter().find(|v| v.family != Family::X || v.index > k) {
                return Err(QuadratureError::ChartScope { component: i + 1, var, k });
            }
        }
        let partials = components
            .iter()
            .map(|c| (1..=k).map(|j| c.differentiate(Var::x(j))).collect())
            .collect();
        Ok(ChartMap { k, components, partials })
    }

    pub fn parse(k: usize, components: &[&str]) -> Result<Self, crate::Error> {
        let comps = components
            .iter()
            .map(|c| Expression::parse(c))
            .collect::<Result<Vec<_>, ParseError>>()?;
        Ok(ChartMap::new(k, comps)?)
    }

    pub fn identity(k: usize) -> Self {
        ChartMap::new(k, (1..=k).map(|i| Expression::var(Var::x(i))).collect()).expect("identity is in scope")
    }

    /// Domain dimension.
    pub fn domain_dim(&self) -> usize {
        self.k
    }

    /// Ambient dimension.
    pub fn ambient_dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let env = Slice::x(x);
        self.components.iter().map(|c| c.evaluate(&env)).collect()
    }

    /// `DΦ(x)`, an `n × k` matrix.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let env = Slice::x(x);
        let n = self.ambient_dim();
        let mut jac = DMatrix::zeros(n, self.k);
        for (i, row) in self.partials.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                jac[(i, j)] = match p.as_constant() {
                    Some(v) => v,
                    None => p.evaluate(&env)?,
                };
            }
        }
        Ok(jac)
    }

    /// Composition `self ∘ inner` as a new chart on `inner`'s domain.
    pub fn compose(&self, inner: &ChartMap) -> Result<ChartMap, QuadratureError> {
        if inner.ambient_dim() != self.k {
            return Err(QuadratureError::ChartDimension { k: self.k, n: inner.ambient_dim() });
        }
        let comps = self.components.iter().map(|c| substitute_x(c, inner.components())).collect();
        ChartMap::new(inner.k, comps)
    }
}

/// Replaces `x_i` by `values[i-1]`.
fn substitute_x(e: &Expression, values: &[Expression]) -> Expression {
    use crate::expr::Node;
    match e.node() {
        Node::Const(_) => e.clone(),
        Node::Var(v) if v.family == Family::X => values[v.index - 1].clone(),
        Node::Var(_) => e.clone(),
        Node::Neg(a) => Expression::new(Node::Neg(substitute_x(a, values))),
        Node::Binary(op, a, b) => Expression::new(Node::Binary(*op, substitute_x(a, values), substitute_x(b, values))),
        Node::Pow(a, p) => Expression::new(Node::Pow(substitute_x(a, values), *p)),
        Node::Call(f, a) => Expression::new(Node::Call(*f, substitute_x(a, values))),
        Node::Min(a, b) => Expression::new(Node::Min(substitute_x(a, values), substitute_x(b, values))),
        Node::Max(a, b) => Expression::new(Node::Max(substitute_x(a, values), substitute_x(b, values))),
        Node::IfLe(a, b, c, d) => Expression::new(Node::IfLe(
            substitute_x(a, values),
            substitute_x(b, values),
            substitute_x(c, values),
            substitute_x(d, values),
        )),
    }
}

/// Everything known about `Φ∘c` at one cube point.
#[derive(Debug, Clone)]
pub struct ChartPoint {
    pub cube: CubePoint,
    /// `Φ(c(t))`
    pub y: Vec<f64>,
    /// `D(Φ∘c)/Dt`, `n × k`.
    pub jacobian: DMatrix<f64>,
}

/// `D(Φ∘c)/Dt = DΦ(c(t)) · Dc/Dt`.
pub fn chart_jacobian_through_cube(chart: &ChartMap, set: &NormalSet, t: &[f64]) -> Result<DMatrix<f64>, EvalError> {
    Ok(chart_point(chart, set, t)?.jacobian)
}

pub fn chart_point(chart: &ChartMap, set: &NormalSet, t: &[f64]) -> Result<ChartPoint, EvalError> {
    let cube = set.cube_point(t)?;
    chart_point_from(chart, set, cube, t)
}

fn chart_point_from(chart: &ChartMap, set: &NormalSet, cube: CubePoint, t: &[f64]) -> Result<ChartPoint, EvalError> {
    let dc = set.jacobian_at(&cube, t)?;
    let y = chart.evaluate(&cube.x)?;
    let jacobian = chart.jacobian(&cube.x)? * dc;
    Ok(ChartPoint { cube, y, jacobian })
}

/// Determinant of the submatrix with the given rows and all columns except
/// `skip_col`.
pub fn minor_det(m: &DMatrix<f64>, rows: &MultiIndex, skip_col: Option<usize>) -> f64 {
    let cols: Vec<usize> = (0..m.ncols()).filter(|&c| Some(c) != skip_col).collect();
    let rows: Vec<usize> = rows.rows().collect();
    debug_assert_eq!(rows.len(), cols.len());
    if rows.is_empty() {
        return 1.0;
    }
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])]);
    sub.determinant()
}

fn width_product(cube: &CubePoint, skip: Option<usize>) -> f64 {
    (0..cube.x.len()).filter(|&i| Some(i) != skip).map(|i| cube.width(i)).product()
}

/// The integrand of `∫ ω` over `Φ(N)` in cube coordinates:
/// `Σ_I b_I(Φ(c(t))) · det D(Φ∘c)_I/Dt`. Points where the cube map
/// degenerates (`Π (g_i - f_i) = 0`) contribute zero without evaluating
/// derivatives.
pub fn pullback_integrand(
    form: &DifferentialForm,
    chart: &ChartMap,
    set: &NormalSet,
    t: &[f64],
) -> Result<f64, QuadratureError> {
    let k = set.dim();
    if form.degree() != k || chart.domain_dim() != k || form.ambient_dim() != chart.ambient_dim() {
        return Err(QuadratureError::Shape {
            degree: form.degree(),
            k,
            chart_k: chart.domain_dim(),
            form_n: form.ambient_dim(),
            chart_n: chart.ambient_dim(),
        });
    }
    Ok(pullback_value(form, chart, set, t, None)?)
}

/// Shared kernel: with `skip_col = Some(j)` this is the face integrand of a
/// `(k-1)`-form (column `j` removed), otherwise the full `k`-form integrand.
pub(crate) fn pullback_value(
    form: &DifferentialForm,
    chart: &ChartMap,
    set: &NormalSet,
    t: &[f64],
    skip_col: Option<usize>,
) -> Result<f64, EvalError> {
    if form.is_zero() {
        return Ok(0.0);
    }
    let cube = set.cube_point(t)?;
    if width_product(&cube, skip_col) == 0.0 {
        return Ok(0.0);
    }
    let p = chart_point_from(chart, set, cube, t)?;
    let env = Slice::y(&p.y);
    let mut total = 0.0;
    for term in form.terms() {
        let det = minor_det(&p.jacobian, &term.index, skip_col);
        if det != 0.0 {
            total += term.coeff.evaluate(&env)? * det;
        }
    }
    Ok(total)
}

/// Integrand of the outward-normal formulation on one face:
/// `Σ_I b_I(Φ(z)) · det[N(z); DΦ_I(z)] · Π_{i≠j} (g_i - f_i)` with the
/// unnormalized outward vector `N`.
pub(crate) fn normal_face_value(
    form: &DifferentialForm,
    chart: &ChartMap,
    set: &NormalSet,
    face: Face,
    s: &[f64],
) -> Result<f64, EvalError> {
    if form.is_zero() {
        return Ok(0.0);
    }
    let t = face.lift(s);
    let j = face.axis - 1;
    let cube = set.cube_point(&t)?;
    let measure = width_product(&cube, Some(j));
    if measure == 0.0 {
        return Ok(0.0);
    }
    let z = &cube.x;
    let k = z.len();
    let normal = outward_vector(set, face, z)?;
    let y = chart.evaluate(z)?;
    let dphi = chart.jacobian(z)?;
    let env = Slice::y(&y);
    let mut total = 0.0;
    for term in form.terms() {
        let rows: Vec<usize> = term.index.rows().collect();
        let w = DMatrix::from_fn(k, k, |r, c| if r == 0 { normal[c] } else { dphi[(rows[r - 1], c)] }).determinant();
        if w != 0.0 {
            total += term.coeff.evaluate(&env)? * w;
        }
    }
    Ok(total * measure)
}

/// Unnormalized outward vector of a face at `z`: `(-∂g_j, 1, 0..)` on top,
/// `(∂f_j, -1, 0..)` on the bottom.
pub fn outward_vector(set: &NormalSet, face: Face, z: &[f64]) -> Result<Vec<f64>, EvalError> {
    let j = face.axis - 1;
    let grad = set.bound_partials(face.axis, face.side, &z[..j])?;
    let mut n = vec![0.0; z.len()];
    match face.side {
        Side::Top => {
            for (l, g) in grad.iter().enumerate() {
                n[l] = -g;
            }
            n[j] = 1.0;
        }
        Side::Bottom => {
            n[..j].copy_from_slice(&grad);
            n[j] = -1.0;
        }
    }
    Ok(n)
}
