//! Scalar expressions over named coordinates.
//!
//! Expressions are immutable trees behind an [`Arc`], so cloning is cheap and
//! subtrees are shared freely by [`Expression::differentiate`]. Variables come
//! in three families: `x1..xk` (parameter space), `y1..yn` (ambient space) and
//! `t1..tk` (unit cube). The grammar accepted by [`Expression::parse`] is:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          exponent must fold to a constant
//! primary := number | 'pi' | variable | func '(' args ')' | '(' expr ')'
//! func    := sin | cos | exp | log | sqrt | abs      (one argument)
//!          | min | max                               (two arguments)
//!          | ifle                                    (four arguments)
//! ```
//!
//! `ifle(a, b, p, q)` evaluates to `p` when `a <= b` and to `q` otherwise. It
//! is what derivatives of `min`, `max` and `abs` are written in terms of.

mod diff;
mod eval;
mod parse;
pub mod random;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

pub use eval::{Bindings, Environment, EvalError, Slice};
pub use parse::ParseError;

/// Variable family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    X,
    Y,
    T,
}

impl Family {
    fn prefix(self) -> char {
        match self {
            Family::X => 'x',
            Family::Y => 'y',
            Family::T => 't',
        }
    }
}

/// A named coordinate such as `x2`. Indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub family: Family,
    pub index: usize,
}

impl Var {
    pub const fn x(index: usize) -> Self {
        Var { family: Family::X, index }
    }

    pub const fn y(index: usize) -> Self {
        Var { family: Family::Y, index }
    }

    pub const fn t(index: usize) -> Self {
        Var { family: Family::T, index }
    }

    /// Parses `x3`, `y1`, ... Returns `None` for anything else.
    pub fn from_name(name: &str) -> Option<Self> {
        let mut chars = name.chars();
        let family = match chars.next()? {
            'x' => Family::X,
            'y' => Family::Y,
            't' => Family::T,
            _ => return None,
        };
        let digits = chars.as_str();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
            return None;
        }
        let index = digits.parse().ok()?;
        Some(Var { family, index })
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.family.prefix(), self.index)
    }
}

/// One-argument functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Expression tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Var),
    Neg(Expression),
    Binary(BinOp, Expression, Expression),
    /// Power with a constant exponent.
    Pow(Expression, f64),
    Call(Func, Expression),
    Min(Expression, Expression),
    Max(Expression, Expression),
    /// `ifle(a, b, p, q)`: `p` if `a <= b`, else `q`.
    IfLe(Expression, Expression, Expression, Expression),
}

/// Shared immutable expression.
#[derive(Clone, PartialEq)]
pub struct Expression(Arc<Node>);

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({self})")
    }
}

impl From<f64> for Expression {
    fn from(value: f64) -> Self {
        Expression::constant(value)
    }
}

impl From<Var> for Expression {
    fn from(var: Var) -> Self {
        Expression::var(var)
    }
}

impl Expression {
    pub fn new(node: Node) -> Self {
        Expression(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse::parse(text)
    }

    pub fn constant(value: f64) -> Self {
        Expression::new(Node::Const(value))
    }

    pub fn zero() -> Self {
        Expression::constant(0.0)
    }

    pub fn one() -> Self {
        Expression::constant(1.0)
    }

    pub fn var(var: Var) -> Self {
        Expression::new(Node::Var(var))
    }

    /// Value of the expression if it is a literal constant.
    pub fn as_constant(&self) -> Option<f64> {
        match self.node() {
            Node::Const(v) => Some(*v),
            _ => None,
        }
    }

    /// True for the literal constant zero (after folding).
    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_constant() == Some(1.0)
    }

    // Smart constructors: constant folding plus the 0/1 identities, nothing else.

    pub fn neg(&self) -> Self {
        match self.node() {
            Node::Const(v) => Expression::constant(-v),
            Node::Neg(inner) => inner.clone(),
            _ => Expression::new(Node::Neg(self.clone())),
        }
    }

    pub fn add(&self, rhs: &Expression) -> Self {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if let Some(v) = fold(self, rhs, |a, b| a + b) {
            return v;
        }
        Expression::new(Node::Binary(BinOp::Add, self.clone(), rhs.clone()))
    }

    pub fn sub(&self, rhs: &Expression) -> Self {
        if rhs.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return rhs.neg();
        }
        if let Some(v) = fold(self, rhs, |a, b| a - b) {
            return v;
        }
        Expression::new(Node::Binary(BinOp::Sub, self.clone(), rhs.clone()))
    }

    pub fn mul(&self, rhs: &Expression) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Expression::zero();
        }
        if self.is_one() {
            return rhs.clone();
        }
        if rhs.is_one() {
            return self.clone();
        }
        if let Some(v) = fold(self, rhs, |a, b| a * b) {
            return v;
        }
        Expression::new(Node::Binary(BinOp::Mul, self.clone(), rhs.clone()))
    }

    pub fn div(&self, rhs: &Expression) -> Self {
        if rhs.is_one() {
            return self.clone();
        }
        if self.is_zero() && rhs.as_constant().is_none_or(|c| c != 0.0) {
            return Expression::zero();
        }
        if rhs.as_constant().is_some_and(|c| c != 0.0) {
            if let Some(v) = fold(self, rhs, |a, b| a / b) {
                return v;
            }
        }
        Expression::new(Node::Binary(BinOp::Div, self.clone(), rhs.clone()))
    }

    pub fn pow(&self, exponent: f64) -> Self {
        if exponent == 0.0 {
            return Expression::one();
        }
        if exponent == 1.0 {
            return self.clone();
        }
        if let Some(base) = self.as_constant() {
            let v = base.powf(exponent);
            if v.is_finite() {
                return Expression::constant(v);
            }
        }
        Expression::new(Node::Pow(self.clone(), exponent))
    }

    pub fn call(func: Func, arg: &Expression) -> Self {
        Expression::new(Node::Call(func, arg.clone()))
    }

    pub fn min(&self, rhs: &Expression) -> Self {
        if let Some(v) = fold(self, rhs, |a, b| if a <= b { a } else { b }) {
            return v;
        }
        Expression::new(Node::Min(self.clone(), rhs.clone()))
    }

    pub fn max(&self, rhs: &Expression) -> Self {
        if let Some(v) = fold(self, rhs, |a, b| if a >= b { a } else { b }) {
            return v;
        }
        Expression::new(Node::Max(self.clone(), rhs.clone()))
    }

    pub fn if_le(a: &Expression, b: &Expression, then: &Expression, otherwise: &Expression) -> Self {
        if then == otherwise {
            return then.clone();
        }
        Expression::new(Node::IfLe(a.clone(), b.clone(), then.clone(), otherwise.clone()))
    }

    /// All variables occurring in the expression.
    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self.node() {
            Node::Const(_) => {}
            Node::Var(v) => {
                out.insert(*v);
            }
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.collect_vars(out),
            Node::Binary(_, a, b) | Node::Min(a, b) | Node::Max(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Node::IfLe(a, b, c, d) => {
                for e in [a, b, c, d] {
                    e.collect_vars(out);
                }
            }
        }
    }
}

fn fold(a: &Expression, b: &Expression, op: impl Fn(f64, f64) -> f64) -> Option<Expression> {
    let v = op(a.as_constant()?, b.as_constant()?);
    v.is_finite().then(|| Expression::constant(v))
}

// Printing. Precedence levels: 1 additive, 2 multiplicative, 3 prefix minus,
// 4 power, 5 atoms. Children are parenthesized whenever their level is below
// what the parser would need to rebuild the same tree.

fn level(e: &Expression) -> u8 {
    match e.node() {
        Node::Const(v) if v.is_sign_negative() => 3,
        Node::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        Node::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Neg(_) => 3,
        Node::Pow(..) => 4,
        _ => 5,
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        write!(f, "{v}")
    } else {
        write!(f, "{v:e}")
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &Expression, min_level: u8) -> fmt::Result {
    if level(e) < min_level {
        write!(f, "(")?;
        write_expr(f, e)?;
        write!(f, ")")
    } else {
        write_expr(f, e)
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expression) -> fmt::Result {
    match e.node() {
        Node::Const(v) => write_number(f, *v),
        Node::Var(v) => write!(f, "{v}"),
        Node::Neg(a) => {
            write!(f, "-")?;
            write_at(f, a, 3)
        }
        Node::Binary(op, a, b) => {
            let (sym, lvl) = match op {
                BinOp::Add => (" + ", 1),
                BinOp::Sub => (" - ", 1),
                BinOp::Mul => ("*", 2),
                BinOp::Div => ("/", 2),
            };
            write_at(f, a, lvl)?;
            write!(f, "{sym}")?;
            write_at(f, b, lvl + 1)
        }
        Node::Pow(a, p) => {
            write_at(f, a, 5)?;
            write!(f, "^")?;
            if p.is_sign_negative() {
                write!(f, "(")?;
                write_number(f, *p)?;
                write!(f, ")")
            } else {
                write_number(f, *p)
            }
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(f, a)?;
            write!(f, ")")
        }
        Node::Min(a, b) | Node::Max(a, b) => {
            let name = if matches!(e.node(), Node::Min(..)) { "min" } else { "max" };
            write!(f, "{name}(")?;
            write_expr(f, a)?;
            write!(f, ", ")?;
            write_expr(f, b)?;
            write!(f, ")")
        }
        Node::IfLe(a, b, c, d) => {
            write!(f, "ifle(")?;
            write_expr(f, a)?;
            write!(f, ", ")?;
            write_expr(f, b)?;
            write!(f, ", ")?;
            write_expr(f, c)?;
            write!(f, ", ")?;
            write_expr(f, d)?;
            write!(f, ")")
        }
    }
}

/// Canonical printed form; parses back to the same tree.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expression {
        Expression::parse(s).unwrap()
    }

    #[test]
    fn var_names() {
        assert_eq!(Var::from_name("x12"), Some(Var::x(12)));
        assert_eq!(Var::from_name("t1"), Some(Var::t(1)));
        assert_eq!(Var::from_name("x0"), None);
        assert_eq!(Var::from_name("x01"), None);
        assert_eq!(Var::from_name("z1"), None);
        assert_eq!(Var::from_name("y"), None);
    }

    #[test]
    fn printing_round_trips_structure() {
        for s in [
            "x1^2 + sin(x2)",
            "x1 - (x2 - x3)",
            "x1 - x2 - x3",
            "x1/(x2*x3)",
            "-x1^2",
            "(-x1)^2",
            "x1^(-0.5)",
            "-2*x1",
            "min(x1 + 0.1, x2)",
            "ifle(x1, 0, -y1, y2)",
            "1e-7*x1 + 1e20",
            "--x1",
            "x1*-x2",
            "(x1 + x2)^3",
            "exp(-(x1 + 1))",
        ] {
            let e = p(s);
            let printed = e.to_string();
            assert_eq!(p(&printed), e, "{s} printed as {printed}");
        }
    }

    #[test]
    fn folding_identities() {
        let x = Expression::var(Var::x(1));
        assert_eq!(x.mul(&Expression::zero()), Expression::zero());
        assert_eq!(x.mul(&Expression::one()), x);
        assert_eq!(Expression::zero().add(&x), x);
        assert_eq!(Expression::constant(2.0).mul(&Expression::constant(3.0)), Expression::constant(6.0));
        assert_eq!(x.pow(1.0), x);
        assert_eq!(x.neg().neg(), x);
        // division by a literal zero is kept so evaluation can report it
        let d = Expression::one().div(&Expression::zero());
        assert!(d.as_constant().is_none());
    }

    #[test]
    fn free_vars_collects_all_families() {
        let e = p("x1*y2 + t3 - min(x1, pi)");
        let vars: Vec<_> = e.free_vars().into_iter().collect();
        assert_eq!(vars, vec![Var::x(1), Var::y(2), Var::t(3)]);
    }
}
