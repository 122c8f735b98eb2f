use std::collections::BTreeMap;

use thiserror::Error;

use super::{BinOp, Expression, Family, Func, Node, ParseError, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(Var),
    #[error("{reason} in `{expr}`")]
    Domain { expr: String, reason: &'static str },
}

impl EvalError {
    fn domain(e: &Expression, reason: &'static str) -> Self {
        EvalError::Domain { expr: e.to_string(), reason }
    }
}

/// Source of variable values for evaluation.
pub trait Bindings {
    fn value(&self, var: Var) -> Option<f64>;
}

/// Name-keyed variable assignment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Environment {
    values: BTreeMap<Var, f64>,
}

impl Environment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, var: Var, value: f64) -> &mut Self {
        self.values.insert(var, value);
        self
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.values.insert(var, value);
        self
    }

    /// Binds a variable by name (`"x1"`, `"y3"`, ...).
    pub fn bind(&mut self, name: &str, value: f64) -> Result<&mut Self, ParseError> {
        let var = Var::from_name(name).ok_or_else(|| ParseError::unknown_identifier(name, 0))?;
        Ok(self.set(var, value))
    }

    /// Binds `x1..` (or `y1..`, `t1..`) to consecutive values.
    pub fn from_slice(family: Family, values: &[f64]) -> Self {
        let mut env = Environment::new();
        for (i, v) in values.iter().enumerate() {
            env.set(Var { family, index: i + 1 }, *v);
        }
        env
    }
}

impl Bindings for Environment {
    fn value(&self, var: Var) -> Option<f64> {
        self.values.get(&var).copied()
    }
}

/// Borrowed binding of one variable family to a slice; the hot-path
/// environment used by the quadrature kernels.
#[derive(Debug, Clone, Copy)]
pub struct Slice<'a> {
    pub family: Family,
    pub values: &'a [f64],
}

impl<'a> Slice<'a> {
    pub fn x(values: &'a [f64]) -> Self {
        Slice { family: Family::X, values }
    }

    pub fn y(values: &'a [f64]) -> Self {
        Slice { family: Family::Y, values }
    }

    pub fn t(values: &'a [f64]) -> Self {
        Slice { family: Family::T, values }
    }
}

impl Bindings for Slice<'_> {
    #[inline]
    fn value(&self, var: Var) -> Option<f64> {
        if var.family != self.family || var.index == 0 {
            return None;
        }
        self.values.get(var.index - 1).copied()
    }
}

impl Expression {
    /// Evaluates in double precision. Unbound variables and domain violations
    /// (log or sqrt of a negative, division by zero, non-finite powers) are
    /// errors naming the offending subexpression.
    pub fn evaluate<B: Bindings + ?Sized>(&self, env: &B) -> Result<f64, EvalError> {
        match self.node() {
            Node::Const(v) => Ok(*v),
            Node::Var(v) => env.value(*v).ok_or(EvalError::Unbound(*v)),
            Node::Neg(a) => Ok(-a.evaluate(env)?),
            Node::Binary(op, a, b) => {
                let a = a.evaluate(env)?;
                let b = b.evaluate(env)?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(EvalError::domain(self, "division by zero"))
                        } else {
                            Ok(a / b)
                        }
                    }
                }
            }
            Node::Pow(a, p) => {
                let base = a.evaluate(env)?;
                let v = powf(base, *p);
                if v.is_nan() || (base == 0.0 && *p < 0.0) {
                    Err(EvalError::domain(self, "power outside its domain"))
                } else {
                    Ok(v)
                }
            }
            Node::Call(func, a) => {
                let v = a.evaluate(env)?;
                match func {
                    Func::Sin => Ok(v.sin()),
                    Func::Cos => Ok(v.cos()),
                    Func::Exp => Ok(v.exp()),
                    Func::Log if v <= 0.0 => Err(EvalError::domain(self, "log of a non-positive value")),
                    Func::Log => Ok(v.ln()),
                    Func::Sqrt if v < 0.0 => Err(EvalError::domain(self, "sqrt of a negative value")),
                    Func::Sqrt => Ok(v.sqrt()),
                    Func::Abs => Ok(v.abs()),
                }
            }
            Node::Min(a, b) => {
                let (a, b) = (a.evaluate(env)?, b.evaluate(env)?);
                Ok(if a <= b { a } else { b })
            }
            Node::Max(a, b) => {
                let (a, b) = (a.evaluate(env)?, b.evaluate(env)?);
                Ok(if a >= b { a } else { b })
            }
            Node::IfLe(a, b, then, otherwise) => {
                if a.evaluate(env)? <= b.evaluate(env)? {
                    then.evaluate(env)
                } else {
                    otherwise.evaluate(env)
                }
            }
        }
    }
}

#[inline]
fn powf(base: f64, p: f64) -> f64 {
    if p == 2.0 {
        base * base
    } else if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
        base.powi(p as i32)
    } else {
        base.powf(p)
    }
}
