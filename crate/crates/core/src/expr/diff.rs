use super::{BinOp, Expression, Func, Node, Var};

impl Expression {
    /// Symbolic partial derivative with respect to `var`.
    ///
    /// Branch rules: `min(a, b)` follows `a` when `a <= b` (ties included) and
    /// `max(a, b)` follows `a` when `a >= b`. `abs(a)` is treated as
    /// `max(a, -a)`, so its derivative is `a'` for `a >= 0` and `-a'` otherwise.
    /// `ifle` differentiates its two branches under the same condition.
    pub fn differentiate(&self, var: Var) -> Expression {
        match self.node() {
            Node::Const(_) => Expression::zero(),
            Node::Var(v) => {
                if *v == var {
                    Expression::one()
                } else {
                    Expression::zero()
                }
            }
            Node::Neg(a) => a.differentiate(var).neg(),
            Node::Binary(op, a, b) => {
                let da = a.differentiate(var);
                let db = b.differentiate(var);
                match op {
                    BinOp::Add => da.add(&db),
                    BinOp::Sub => da.sub(&db),
                    BinOp::Mul => da.mul(b).add(&a.mul(&db)),
                    BinOp::Div => {
                        if db.is_zero() {
                            da.div(b)
                        } else {
                            da.mul(b).sub(&a.mul(&db)).div(&b.pow(2.0))
                        }
                    }
                }
            }
            Node::Pow(a, p) => {
                let da = a.differentiate(var);
                if da.is_zero() {
                    return Expression::zero();
                }
                Expression::constant(*p).mul(&a.pow(p - 1.0)).mul(&da)
            }
            Node::Call(func, a) => {
                let da = a.differentiate(var);
                if da.is_zero() {
                    return Expression::zero();
                }
                match func {
                    Func::Sin => Expression::call(Func::Cos, a).mul(&da),
                    Func::Cos => Expression::call(Func::Sin, a).neg().mul(&da),
                    Func::Exp => self.mul(&da),
                    Func::Log => da.div(a),
                    Func::Sqrt => da.div(&Expression::constant(2.0).mul(self)),
                    Func::Abs => Expression::if_le(&Expression::zero(), a, &da, &da.neg()),
                }
            }
            Node::Min(a, b) => Expression::if_le(a, b, &a.differentiate(var), &b.differentiate(var)),
            Node::Max(a, b) => Expression::if_le(b, a, &a.differentiate(var), &b.differentiate(var)),
            Node::IfLe(a, b, then, otherwise) => {
                Expression::if_le(a, b, &then.differentiate(var), &otherwise.differentiate(var))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Environment, Family};

    fn d(s: &str, var: Var) -> Expression {
        Expression::parse(s).unwrap().differentiate(var)
    }

    fn at(e: &Expression, xs: &[f64]) -> f64 {
        e.evaluate(&Environment::from_slice(Family::X, xs)).unwrap()
    }

    #[test]
    fn power_rule_prints_simply() {
        assert_eq!(d("x1^2 + sin(x2)", Var::x(1)).to_string(), "2*x1");
        assert_eq!(d("7", Var::x(1)).to_string(), "0");
        assert_eq!(d("x2", Var::x(1)).to_string(), "0");
    }

    #[test]
    fn product_matches_centered_difference() {
        let e = Expression::parse("x1*x2").unwrap();
        let de = e.differentiate(Var::x(1));
        assert_eq!(at(&de, &[2.0, 5.0]), 5.0);
        let h = 1e-5;
        let fd = (at(&e, &[2.0 + h, 5.0]) - at(&e, &[2.0 - h, 5.0])) / (2.0 * h);
        assert!((fd - 5.0).abs() <= 1e-8);
    }

    #[test]
    fn min_max_branch_rule_at_ties() {
        let dmin = d("min(x1, 2*x1)", Var::x(1));
        // at x1 = 0 the two branches tie; min follows its first argument
        assert_eq!(at(&dmin, &[0.0]), 1.0);
        assert_eq!(at(&dmin, &[1.0]), 1.0);
        assert_eq!(at(&dmin, &[-1.0]), 2.0);
        let dmax = d("max(x1, 2*x1)", Var::x(1));
        assert_eq!(at(&dmax, &[0.0]), 1.0);
        assert_eq!(at(&dmax, &[1.0]), 2.0);
        assert_eq!(at(&dmax, &[-1.0]), 1.0);
    }

    #[test]
    fn abs_uses_sign_branches() {
        let da = d("abs(x1^3)", Var::x(1));
        assert_eq!(at(&da, &[2.0]), 12.0);
        assert_eq!(at(&da, &[-2.0]), -12.0);
    }

    #[test]
    fn elementary_functions() {
        let cases = [
            ("exp(2*x1)", 0.3, 2.0 * (0.6f64).exp()),
            ("log(x1)", 0.5, 2.0),
            ("sqrt(x1)", 4.0, 0.25),
            ("cos(x1)", 1.0, -(1.0f64).sin()),
            ("1/x1", 2.0, -0.25),
            ("x1^(-2)", 2.0, -0.25),
        ];
        for (s, x, expected) in cases {
            let v = at(&d(s, Var::x(1)), &[x]);
            assert!((v - expected).abs() < 1e-14, "{s}: {v} vs {expected}");
        }
    }
}
