//! Random C∞ expressions for property checks.
//!
//! Generated expressions are smooth on all of R^n and stay moderate on the
//! cube [-1, 1]^n: every nonlinear node is one of `sin`, `cos`, a bounded
//! exponential, `sqrt(1 + a^2)`, `log(1 + a^2)`, `a / (1 + a^2)` or a low
//! integer power, and constants are drawn from [-2, 2].

use rand::Rng;

use super::{Expression, Family, Func, Var};

pub fn smooth<R: Rng + ?Sized>(rng: &mut R, family: Family, vars: usize, depth: u32) -> Expression {
    assert!(vars >= 1);
    if depth == 0 || rng.random_bool(0.2) {
        return leaf(rng, family, vars);
    }
    let sub = |rng: &mut R| smooth(rng, family, vars, depth - 1);
    let one = Expression::one();
    match rng.random_range(0..10) {
        0 => sub(rng).add(&sub(rng)),
        1 => sub(rng).sub(&sub(rng)),
        2 | 3 => sub(rng).mul(&sub(rng)),
        4 => Expression::call(Func::Sin, &sub(rng)),
        5 => Expression::call(Func::Cos, &sub(rng)),
        6 => Expression::call(Func::Exp, &Expression::call(Func::Sin, &sub(rng))),
        7 => {
            let a = sub(rng);
            let inner = one.add(&a.pow(2.0));
            if rng.random_bool(0.5) {
                Expression::call(Func::Sqrt, &inner)
            } else {
                Expression::call(Func::Log, &inner)
            }
        }
        8 => {
            let a = sub(rng);
            a.div(&one.add(&a.pow(2.0)))
        }
        _ => sub(rng).pow(rng.random_range(2..=3) as f64),
    }
}

fn leaf<R: Rng + ?Sized>(rng: &mut R, family: Family, vars: usize) -> Expression {
    if rng.random_bool(0.25) {
        let c: f64 = rng.random_range(-2.0..2.0);
        // keep printed constants short so round trips are readable
        Expression::constant((c * 1000.0).round() / 1000.0)
    } else {
        Expression::var(Var { family, index: rng.random_range(1..=vars) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Slice;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn generated_expressions_evaluate_on_the_cube() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let e = smooth(&mut rng, Family::Y, 3, 4);
            assert!(e.free_vars().iter().all(|v| v.family == Family::Y && v.index <= 3));
            let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let v = e.evaluate(&Slice::y(&p)).unwrap();
            assert!(v.is_finite());
        }
    }
}
