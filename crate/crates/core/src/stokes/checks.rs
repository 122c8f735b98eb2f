//! Supporting checks: integration by parts, reparametrization independence,
//! convergence tables, `d(dω) = 0` and the `det B` study.

use rand::rngs::StdRng;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{integrals, relative_residual, try_verify, Scenario, StokesError};
use crate::expr::{random, Expression, Family, Slice, Var};
use crate::forms::{DifferentialForm, MultiIndex};
use crate::geometry::{Face, Side};
use crate::quadrature::{
    chart_point, det_b_residual, integrate_unit_cube, minor_det, ChartMap,
    QuadratureError, QuadratureSpec,
};
use crate::summation;

/// `∫_T f_{|j} g = ∫_{T_{-j}} [f g]_{x_j=a_j}^{b_j} - ∫_T f g_{|j}` on the box
/// `T = Π [a_i, b_i]`. With one axis this is the univariate rule.
#[derive(Debug, Clone, PartialEq)]
pub struct IbpProblem {
    pub f: Expression,
    pub g: Expression,
    /// 1-based.
    pub axis: usize,
    pub segment: Vec<(f64, f64)>,
}

impl IbpProblem {
    pub fn univariate(f: Expression, g: Expression, a: f64, b: f64) -> Self {
        IbpProblem { f, g, axis: 1, segment: vec![(a, b)] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbpReport {
    /// `∫ f_{|j} g`
    pub derivative_term: f64,
    /// `∫ [f g]`
    pub boundary_term: f64,
    /// `∫ f g_{|j}`
    pub counter_term: f64,
    /// `|derivative_term - boundary_term + counter_term|`
    pub residual: f64,
}

pub fn ibp_residual(problem: &IbpProblem, quadrature: &QuadratureSpec) -> Result<IbpReport, StokesError> {
    let k = problem.segment.len();
    if k == 0 || problem.axis == 0 || problem.axis > k {
        return Err(StokesError::Ibp(format!("axis {} outside 1..={k}", problem.axis)));
    }
    if let Some(&(a, b)) = problem.segment.iter().find(|(a, b)| !a.is_finite() || !b.is_finite() || a >= b) {
        return Err(StokesError::Ibp(format!("interval ({a}, {b}) is empty or unbounded")));
    }
    for e in [&problem.f, &problem.g] {
        if let Some(v) = e.free_vars().into_iter().find(|v| v.family != Family::X || v.index > k) {
            return Err(StokesError::Ibp(format!("`{e}` uses {v}; only x1..x{k} are allowed")));
        }
    }
    let j = problem.axis - 1;
    let var = Var::x(problem.axis);
    let df = problem.f.differentiate(var);
    let dg = problem.g.differentiate(var);
    let lo: Vec<f64> = problem.segment.iter().map(|s| s.0).collect();
    let span: Vec<f64> = problem.segment.iter().map(|s| s.1 - s.0).collect();
    let volume: f64 = span.iter().product();
    let to_box = |t: &[f64]| -> Vec<f64> { t.iter().enumerate().map(|(i, &v)| lo[i] + span[i] * v).collect() };

    let product = |a: &Expression, b: &Expression| {
        let (a, b) = (a.clone(), b.clone());
        let to_box = &to_box;
        move |t: &[f64]| {
            let x = to_box(t);
            let env = Slice::x(&x);
            Ok(a.evaluate(&env)? * b.evaluate(&env)? * volume)
        }
    };
    let derivative_term = integrate_unit_cube(product(&df, &problem.g), k, quadrature)?;
    let counter_term = integrate_unit_cube(product(&problem.f, &dg), k, quadrature)?;

    let jump = |s: &[f64]| {
        let mut t = Vec::with_capacity(k);
        t.extend_from_slice(&s[..j]);
        t.push(0.0);
        t.extend_from_slice(&s[j..]);
        let mut edge = |v: f64| {
            t[j] = v;
            let x = to_box(&t);
            let env = Slice::x(&x);
            Ok::<_, crate::expr::EvalError>(problem.f.evaluate(&env)? * problem.g.evaluate(&env)?)
        };
        Ok((edge(1.0)? - edge(0.0)?) * volume / span[j])
    };
    let boundary_term = if k == 1 { jump(&[]).map_err(QuadratureError::from)? } else { integrate_unit_cube(jump, k - 1, quadrature)? };

    Ok(IbpReport {
        derivative_term,
        boundary_term,
        counter_term,
        residual: (derivative_term - boundary_term + counter_term).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReparamReport {
    pub volume: f64,
    pub volume_reparam: f64,
    pub boundary: f64,
    pub boundary_reparam: f64,
    /// Larger of the two absolute differences.
    pub residual: f64,
}

const REPARAM_SAMPLES: usize = 256;

/// Integrates both sides once through `Φ∘c` and once through `Φ∘c∘ρ`,
/// with `D(Φ∘c∘ρ)(u) = D(Φ∘c)(ρ(u)) · Dρ(u)`. No inverse of `ρ` is needed.
pub fn reparam_residual(s: &Scenario, rho: &ChartMap) -> Result<ReparamReport, StokesError> {
    let k = s.dim();
    if rho.domain_dim() != k || rho.ambient_dim() != k {
        return Err(StokesError::ReparamShape { k, domain: rho.domain_dim(), ambient: rho.ambient_dim() });
    }
    check_reparam(rho, k)?;

    let volume = integrals::volume_integral(s)?;
    let boundary = integrals::boundary_integral(s)?;

    let mut volumes = Vec::new();
    let mut faces = Vec::new();
    for (piece, set) in s.region().pieces().iter().enumerate() {
        let through = |u: &[f64], skip: Option<usize>, form: &DifferentialForm| {
            let t = rho.evaluate(u)?;
            let cube = set.cube_point(&t)?;
            if skip.is_none() && (0..k).map(|i| cube.width(i)).product::<f64>() == 0.0 {
                return Ok(0.0);
            }
            let p = chart_point(s.chart(), set, &t)?;
            let jac = &p.jacobian * rho.jacobian(u)?;
            let env = Slice::y(&p.y);
            let mut total = 0.0;
            for term in form.terms() {
                let det = minor_det(&jac, &term.index, skip);
                if det != 0.0 {
                    total += term.coeff.evaluate(&env)? * det;
                }
            }
            Ok(total)
        };
        let v = integrate_unit_cube(|u| through(u, None, s.derivative()), k, &s.quadrature)
            .map_err(|source| StokesError::Integration { piece, face: None, source })?;
        volumes.push(v);
        for face in Face::all(k) {
            let col = face.axis - 1;
            let value = integrate_unit_cube(|w| through(&face.lift(w), Some(col), s.form()), k - 1, &s.quadrature)
                .map_err(|source| StokesError::Integration { piece, face: Some(face), source })?;
            let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
            faces.push(match face.side {
                Side::Top => sign * value,
                Side::Bottom => -sign * value,
            });
        }
    }
    let volume_reparam = summation::sum(volumes);
    let boundary_reparam = summation::sum(faces);
    Ok(ReparamReport {
        volume,
        volume_reparam,
        boundary,
        boundary_reparam,
        residual: (volume - volume_reparam).abs().max((boundary - boundary_reparam).abs()),
    })
}

/// Sampled check that `ρ` keeps the cube and has positive Jacobian inside.
fn check_reparam(rho: &ChartMap, k: usize) -> Result<(), StokesError> {
    const SLACK: f64 = 1e-12;
    let mut rng = StdRng::seed_from_u64(0x7240);
    let corners = 1usize << k.min(10);
    for n in 0..corners + REPARAM_SAMPLES {
        let interior = n >= corners;
        let u: Vec<f64> = if interior {
            (0..k).map(|_| rng.random_range(0.001..0.999)).collect()
        } else {
            (0..k).map(|i| ((n >> i) & 1) as f64).collect()
        };
        let image = rho.evaluate(&u)?;
        if image.iter().any(|&v| !(-SLACK..=1.0 + SLACK).contains(&v)) {
            return Err(StokesError::ReparamRange { point: u, image });
        }
        if interior {
            let det = rho.jacobian(&u)?.determinant();
            if det.is_nan() || det <= 0.0 {
                return Err(StokesError::ReparamOrientation { point: u, det });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub quadrature: QuadratureSpec,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
    /// `|lhs - exact|`, when the scenario has a closed form.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lhs_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rhs_error: Option<f64>,
    /// `ln(r_{i-1}/r_i) / ln(N_i/N_{i-1})` with `N = points · cells`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub scenario: String,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Whether the relative residual shrinks from each level to the next.
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].rel_residual < w[0].rel_residual)
    }
}

pub fn convergence_study(s: &Scenario, levels: &[QuadratureSpec]) -> Result<ConvergenceTable, StokesError> {
    if levels.len() < 3 {
        return Err(StokesError::TooFewLevels(levels.len()));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels.len());
    for &spec in levels {
        spec.validate()?;
        let report = try_verify(&s.clone().with_quadrature(spec))?;
        let order = rows.last().and_then(|prev| {
            order_estimate(prev.rel_residual, report.rel_residual, prev.quadrature.resolution(), spec.resolution())
        });
        rows.push(ConvergenceRow {
            quadrature: spec,
            lhs: report.lhs,
            rhs: report.rhs,
            abs_residual: report.abs_residual,
            rel_residual: relative_residual(report.lhs, report.rhs),
            lhs_error: s.exact.map(|e| (report.lhs - e).abs()),
            rhs_error: s.exact.map(|e| (report.rhs - e).abs()),
            order,
        });
    }
    Ok(ConvergenceTable { scenario: s.name.clone(), rows })
}

fn order_estimate(r0: f64, r1: f64, n0: usize, n1: usize) -> Option<f64> {
    (r0 > 0.0 && r1 > 0.0 && n0 != n1).then(|| (r0 / r1).ln() / (n1 as f64 / n0 as f64).ln())
}

/// Worst coefficient of `d(dω)` over a point set, relative to the size of
/// the second derivatives it is assembled from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdResidual {
    pub n: usize,
    pub degree: usize,
    /// `degree + 2 > n`: `d(dω)` has no components at all.
    pub trivial: bool,
    pub max_abs: f64,
    /// `max |c(y)| / (1 + scale(y))`, scale being the largest second partial
    /// of any coefficient of `ω` at `y`.
    pub max_ratio: f64,
}

pub fn dd_residual(form: &DifferentialForm, points: &[Vec<f64>]) -> Result<DdResidual, StokesError> {
    let (n, degree) = (form.ambient_dim(), form.degree());
    if degree + 2 > n {
        return Ok(DdResidual { n, degree, trivial: true, max_abs: 0.0, max_ratio: 0.0 });
    }
    let dd = form.exterior_derivative()?.exterior_derivative()?;
    let hessians: Vec<Expression> = form
        .terms()
        .iter()
        .flat_map(|t| {
            (1..=n).flat_map(move |i| {
                let di = t.coeff.differentiate(Var::y(i));
                (i..=n).map(move |l| di.differentiate(Var::y(l)))
            })
        })
        .collect();
    let mut max_abs: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;
    for y in points {
        let env = Slice::y(y);
        let mut scale: f64 = 0.0;
        for h in &hessians {
            scale = scale.max(h.evaluate(&env)?.abs());
        }
        for c in dd.coefficients_at(y)? {
            max_abs = max_abs.max(c.abs());
            max_ratio = max_ratio.max(c.abs() / (1.0 + scale));
        }
    }
    Ok(DdResidual { n, degree, trivial: false, max_abs, max_ratio })
}

/// A random form on R^n with C∞ coefficients in `y1..yn`.
pub fn random_form<R: Rng + ?Sized>(rng: &mut R, n: usize, degree: usize, depth: u32) -> DifferentialForm {
    assert!(n >= 1 && degree <= n);
    let all = subsets(n, degree);
    let count = rng.random_range(1..=all.len().min(3));
    let terms = sample(rng, all.len(), count)
        .into_iter()
        .map(|i| (all[i].clone(), random::smooth(rng, Family::Y, n, depth)))
        .collect();
    DifferentialForm::new(n, degree, terms).expect("generated terms are in scope")
}

/// Strictly increasing `len`-subsets of `1..=n` in lexicographic order.
fn subsets(n: usize, len: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, len: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for i in start..=n {
            cur.push(i);
            go(i + 1, n, len, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(1, n, len, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetBPoint {
    pub piece: usize,
    pub index: Vec<usize>,
    pub t: Vec<f64>,
    /// One residual per step size.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetBStudy {
    pub steps: Vec<f64>,
    pub points: Vec<DetBPoint>,
    /// Root mean square of the residuals at each step.
    pub rms: Vec<f64>,
    /// Least-squares slope of `ln rms` against `ln h`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub order: Option<f64>,
}

/// `det B` residuals of `Φ∘c` at `samples` random interior points (pieces
/// taken in turn) for every `(k-1)`-index of `1..=n`, at each step in
/// `steps`.
pub fn det_b_study(s: &Scenario, samples: usize, steps: &[f64], seed: u64) -> Result<DetBStudy, StokesError> {
    let k = s.dim();
    let n = s.chart().ambient_dim();
    let hmax = steps.iter().copied().fold(0.0, f64::max);
    let margin = (2.0 * hmax).max(0.02);
    if margin >= 0.5 {
        return Err(QuadratureError::StencilOutsideCube { h: hmax }.into());
    }
    let indices: Vec<MultiIndex> =
        subsets(n, k - 1).into_iter().map(|i| MultiIndex::new(i, n).expect("valid subset")).collect();
    let mut rng = StdRng::seed_from_u64(seed);
    let pieces = s.region().pieces();
    let mut points = Vec::new();
    for p in 0..samples {
        let piece = p % pieces.len();
        let set = &pieces[piece];
        let t: Vec<f64> = (0..k).map(|_| rng.random_range(margin..1.0 - margin)).collect();
        for index in &indices {
            let residuals = steps
                .iter()
                .map(|&h| det_b_residual(s.chart(), set, index, &t, h))
                .collect::<Result<Vec<_>, _>>()?;
            points.push(DetBPoint { piece, index: index.as_slice().to_vec(), t: t.clone(), residuals });
        }
    }
    let rms: Vec<f64> = (0..steps.len())
        .map(|i| {
            let m = points.len().max(1) as f64;
            (points.iter().map(|p| p.residuals[i].powi(2)).sum::<f64>() / m).sqrt()
        })
        .collect();
    let order = fit_slope(steps, &rms);
    Ok(DetBStudy { steps: steps.to_vec(), points, rms, order })
}

/// Least-squares slope of `ln y` against `ln x`; `None` if any `y` is zero.
pub(crate) fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || y.iter().any(|&v| v.is_nan() || v <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_enumerate_in_order() {
        assert_eq!(subsets(3, 2), vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(subsets(2, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn order_estimate_matches_power_law() {
        let p = order_estimate(1.0 / 16.0, 1.0 / 256.0, 4, 16).unwrap();
        assert!((p - 2.0).abs() < 1e-12);
        assert_eq!(order_estimate(0.0, 1.0, 4, 8), None);
    }

    #[test]
    fn slope_of_exact_power() {
        let h = [1e-3, 5e-4, 2.5e-4];
        let r: Vec<f64> = h.iter().map(|v| 3.0 * v * v).collect();
        assert!((fit_slope(&h, &r).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn univariate_polynomial_ibp() {
        let x = Expression::parse("x1").unwrap();
        let r = ibp_residual(&IbpProblem::univariate(x.clone(), x, 0.0, 1.0), &QuadratureSpec::new(4, 1).unwrap()).unwrap();
        assert!(r.residual <= 1e-14, "{r:?}");
        assert!((r.boundary_term - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ibp_rejects_out_of_scope_variables() {
        let p = IbpProblem::univariate(Expression::parse("x2").unwrap(), Expression::one(), 0.0, 1.0);
        assert!(matches!(ibp_residual(&p, &QuadratureSpec::default()), Err(StokesError::Ibp(_))));
    }

    #[test]
    fn dd_of_low_degree_is_trivial_when_degree_is_high() {
        let f = DifferentialForm::parse(2, 1, &[(&[1], "y1*y2")]).unwrap();
        assert!(dd_residual(&f, &[vec![0.1, 0.2]]).unwrap().trivial);
    }
}
