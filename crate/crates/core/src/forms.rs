//! Differential forms `Σ b_I(y) dy_I` in canonical (strictly increasing)
//! multi-index storage, and their exterior derivative.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::expr::{EvalError, Expression, Family, Slice, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormError {
    #[error("index {index} is outside 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("a form of degree {degree} in R^{n} is identically zero; degrees above the ambient dimension are rejected")]
    DegreeAboveDimension { degree: usize, n: usize },
    #[error("term has {found} indices but the form has degree {degree}")]
    TermDegree { degree: usize, found: usize },
    #[error("coefficient `{coeff}` uses `{var}`; only y1..y{n} are allowed")]
    Scope { coeff: String, var: Var, n: usize },
    #[error("cannot combine a degree {0} form with a degree {1} form")]
    DegreeMismatch(usize, usize),
    #[error("cannot combine forms on R^{0} and R^{1}")]
    DimensionMismatch(usize, usize),
    #[error("the exterior derivative of a degree {degree} form on R^{n} exceeds the ambient dimension")]
    DerivativeOfTopForm { degree: usize, n: usize },
}

/// Strictly increasing list of 1-based coordinate indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    /// Accepts only strictly increasing indices within `1..=n`.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self, FormError> {
        if let Some(&index) = indices.iter().find(|&&i| i == 0 || i > n) {
            return Err(FormError::IndexOutOfRange { index, n });
        }
        assert!(indices.windows(2).all(|w| w[0] < w[1]), "multi-index must be strictly increasing");
        Ok(MultiIndex(indices))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Zero-based row positions for selecting Jacobian minors.
    pub fn rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|i| i - 1)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (n, i) in self.0.iter().enumerate() {
            if n > 0 {
                f.write_str("^")?;
            }
            write!(f, "dy{i}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormTerm {
    pub index: MultiIndex,
    pub coeff: Expression,
}

/// Sorts `indices`, multiplying `coeff` by the sign of the sorting
/// permutation. Returns `None` when an index repeats or the coefficient
/// folds to zero.
pub fn canonicalize(indices: &[usize], coeff: Expression, n: usize) -> Result<Option<FormTerm>, FormError> {
    if let Some(&index) = indices.iter().find(|&&i| i == 0 || i > n) {
        return Err(FormError::IndexOutOfRange { index, n });
    }
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) || coeff.is_zero() {
        return Ok(None);
    }
    let inversions = indices
        .iter()
        .enumerate()
        .map(|(a, &i)| indices[a + 1..].iter().filter(|&&j| j < i).count())
        .sum::<usize>();
    let coeff = if inversions % 2 == 1 { coeff.neg() } else { coeff };
    Ok(Some(FormTerm { index: MultiIndex(sorted), coeff }))
}

/// A differential form of fixed degree on R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialForm {
    degree: usize,
    n: usize,
    /// Sorted by multi-index, one term per index.
    terms: Vec<FormTerm>,
}

impl DifferentialForm {
    /// Builds a form from `(indices, coefficient)` pairs in any index order;
    /// terms are canonicalized and like indices merged.
    pub fn new(n: usize, degree: usize, terms: Vec<(Vec<usize>, Expression)>) -> Result<Self, FormError> {
        if degree > n {
            return Err(FormError::DegreeAboveDimension { degree, n });
        }
        let mut merged = BTreeMap::new();
        for (indices, coeff) in terms {
            if indices.len() != degree {
                return Err(FormError::TermDegree { degree, found: indices.len() });
            }
            if let Some(var) = coeff.free_vars().into_iter().find(|v| v.family != Family::Y || v.index > n) {
                return Err(FormError::Scope { coeff: coeff.to_string(), var, n });
            }
            if let Some(term) = canonicalize(&indices, coeff, n)? {
                accumulate(&mut merged, term);
            }
        }
        Ok(Self::from_merged(n, degree, merged))
    }

    /// Parses coefficients written in the expression grammar.
    pub fn parse(n: usize, degree: usize, terms: &[(&[usize], &str)]) -> Result<Self, crate::Error> {
        let terms = terms
            .iter()
            .map(|(i, c)| Ok((i.to_vec(), Expression::parse(c)?)))
            .collect::<Result<Vec<_>, crate::Error>>()?;
        Ok(DifferentialForm::new(n, degree, terms)?)
    }

    pub fn zero(n: usize, degree: usize) -> Result<Self, FormError> {
        DifferentialForm::new(n, degree, Vec::new())
    }

    fn from_merged(n: usize, degree: usize, merged: BTreeMap<MultiIndex, Expression>) -> Self {
        let terms = merged
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(index, coeff)| FormTerm { index, coeff })
            .collect();
        DifferentialForm { degree, n, terms }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[FormTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `dω = Σ_I Σ_i ∂b_I/∂y_i dy_i ∧ dy_I`.
    pub fn exterior_derivative(&self) -> Result<DifferentialForm, FormError> {
        if self.degree >= self.n {
            return Err(FormError::DerivativeOfTopForm { degree: self.degree, n: self.n });
        }
        let mut merged = BTreeMap::new();
        for term in &self.terms {
            for i in 1..=self.n {
                let db = term.coeff.differentiate(Var::y(i));
                if db.is_zero() {
                    continue;
                }
                let mut indices = Vec::with_capacity(self.degree + 1);
                indices.push(i);
                indices.extend_from_slice(term.index.as_slice());
                if let Some(t) = canonicalize(&indices, db, self.n)? {
                    accumulate(&mut merged, t);
                }
            }
        }
        Ok(Self::from_merged(self.n, self.degree + 1, merged))
    }

    pub fn add(&self, other: &DifferentialForm) -> Result<DifferentialForm, FormError> {
        self.check_compatible(other)?;
        let mut merged: BTreeMap<_, _> = self.terms.iter().map(|t| (t.index.clone(), t.coeff.clone())).collect();
        for t in &other.terms {
            accumulate(&mut merged, t.clone());
        }
        Ok(Self::from_merged(self.n, self.degree, merged))
    }

    /// Multiplies every coefficient by `factor`.
    pub fn scale(&self, factor: &Expression) -> DifferentialForm {
        let merged = self.terms.iter().map(|t| (t.index.clone(), factor.mul(&t.coeff))).collect();
        Self::from_merged(self.n, self.degree, merged)
    }

    fn check_compatible(&self, other: &DifferentialForm) -> Result<(), FormError> {
        if self.degree != other.degree {
            return Err(FormError::DegreeMismatch(self.degree, other.degree));
        }
        if self.n != other.n {
            return Err(FormError::DimensionMismatch(self.n, other.n));
        }
        Ok(())
    }

    /// Coefficient values at the ambient point `y`.
    pub fn coefficients_at(&self, y: &[f64]) -> Result<Vec<f64>, EvalError> {
        let env = Slice::y(y);
        self.terms.iter().map(|t| t.coeff.evaluate(&env)).collect()
    }
}

fn accumulate(merged: &mut BTreeMap<MultiIndex, Expression>, term: FormTerm) {
    merged
        .entry(term.index)
        .and_modify(|c| *c = c.add(&term.coeff))
        .or_insert(term.coeff);
}

impl fmt::Display for DifferentialForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (n, t) in self.terms.iter().enumerate() {
            if n > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({})", t.coeff)?;
            if !t.index.is_empty() {
                write!(f, " {}", t.index)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Environment;

    fn e(s: &str) -> Expression {
        Expression::parse(s).unwrap()
    }

    #[test]
    fn canonicalize_signs() {
        let b = e("y1");
        let t = canonicalize(&[2, 1], b.clone(), 3).unwrap().unwrap();
        assert_eq!(t.index.as_slice(), &[1, 2]);
        assert_eq!(t.coeff, b.neg());
        assert!(canonicalize(&[3, 3], b.clone(), 3).unwrap().is_none());
        let t = canonicalize(&[3, 1, 2], b.clone(), 3).unwrap().unwrap();
        assert_eq!(t.index.as_slice(), &[1, 2, 3]);
        assert_eq!(t.coeff, b);
        assert!(matches!(canonicalize(&[4], b, 3), Err(FormError::IndexOutOfRange { index: 4, n: 3 })));
    }

    #[test]
    fn exterior_derivative_of_y1_dy2() {
        let w = DifferentialForm::new(2, 1, vec![(vec![2], e("y1"))]).unwrap();
        let dw = w.exterior_derivative().unwrap();
        assert_eq!(dw.degree(), 2);
        assert_eq!(dw.terms().len(), 1);
        assert_eq!(dw.terms()[0].index.as_slice(), &[1, 2]);
        assert_eq!(dw.terms()[0].coeff, Expression::one());
    }

    #[test]
    fn constant_coefficients_have_zero_derivative() {
        let w = DifferentialForm::new(3, 1, vec![(vec![1], e("2")), (vec![3], e("-pi"))]).unwrap();
        assert!(w.exterior_derivative().unwrap().is_zero());
    }

    #[test]
    fn dd_of_sin_product_vanishes() {
        let w = DifferentialForm::new(3, 1, vec![(vec![3], e("sin(y1*y2)"))]).unwrap();
        let ddw = w.exterior_derivative().unwrap().exterior_derivative().unwrap();
        for i in 0..100 {
            let y = [0.1 * i as f64 - 5.0, (i as f64).sin() * 3.0, 0.7];
            for c in ddw.coefficients_at(&y).unwrap() {
                assert!(c.abs() <= 1e-9, "{c}");
            }
        }
    }

    #[test]
    fn add_merges_and_cancels() {
        let w = DifferentialForm::new(2, 1, vec![(vec![1], e("y2")), (vec![2], e("y1"))]).unwrap();
        let minus = w.scale(&Expression::constant(-1.0));
        let sum = w.add(&minus).unwrap();
        // coefficients are not simplified symbolically, only folded
        let y = [0.3, -1.2];
        assert!(sum.coefficients_at(&y).unwrap().iter().all(|c| *c == 0.0));

        let a = DifferentialForm::new(2, 1, vec![(vec![1], e("y2"))]).unwrap();
        let b = DifferentialForm::new(2, 1, vec![(vec![2], e("y1"))]).unwrap();
        assert_eq!(a.add(&b).unwrap(), w);

        let c = DifferentialForm::new(2, 1, vec![(vec![1], e("y1"))]).unwrap();
        let ac = a.add(&c).unwrap();
        assert_eq!(ac.terms().len(), 1);
        assert_eq!(ac.terms()[0].coeff.to_string(), "y2 + y1");

        let two = DifferentialForm::zero(2, 2).unwrap();
        assert_eq!(a.add(&two), Err(FormError::DegreeMismatch(1, 2)));
        let r3 = DifferentialForm::zero(3, 1).unwrap();
        assert_eq!(a.add(&r3), Err(FormError::DimensionMismatch(2, 3)));
    }

    #[test]
    fn literal_cancellation_drops_terms() {
        let w = DifferentialForm::new(2, 2, vec![(vec![1, 2], e("3")), (vec![2, 1], e("3"))]).unwrap();
        assert!(w.is_zero());
    }

    #[test]
    fn construction_guards() {
        assert!(matches!(DifferentialForm::zero(2, 3), Err(FormError::DegreeAboveDimension { .. })));
        assert!(matches!(
            DifferentialForm::new(2, 1, vec![(vec![1, 2], e("1"))]),
            Err(FormError::TermDegree { .. })
        ));
        assert!(matches!(
            DifferentialForm::new(2, 1, vec![(vec![1], e("x1"))]),
            Err(FormError::Scope { .. })
        ));
        assert!(matches!(
            DifferentialForm::new(2, 1, vec![(vec![1], e("y3"))]),
            Err(FormError::Scope { .. })
        ));
        let top = DifferentialForm::new(2, 2, vec![(vec![1, 2], e("y1"))]).unwrap();
        assert!(matches!(top.exterior_derivative(), Err(FormError::DerivativeOfTopForm { .. })));
    }

    #[test]
    fn zero_form_derivative_is_gradient() {
        let f = DifferentialForm::new(2, 0, vec![(vec![], e("y1^2*y2"))]).unwrap();
        let df = f.exterior_derivative().unwrap();
        let env = Environment::from_slice(Family::Y, &[2.0, 3.0]);
        let vals: Vec<f64> = df.terms().iter().map(|t| t.coeff.evaluate(&env).unwrap()).collect();
        assert_eq!(vals, vec![12.0, 4.0]);
    }
}
