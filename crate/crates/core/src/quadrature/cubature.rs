//! Composite tensor-product Gauss–Legendre cubature on the unit cube.
//!
//! The cube is split into `m^d` congruent cells and each cell carries the
//! tensor `q`-point rule. Cells are summed in lexicographic order, nodes inside
//! a cell likewise, both with compensated accumulation. Cells may be evaluated
//! on different threads; the reduction order is fixed, so the result does not
//! depend on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::{gauss_legendre, Execution, QuadratureError, QuadratureSpec};
use crate::expr::EvalError;
use crate::summation::Neumaier;

/// Integrates `f` over `[0,1]^dim` with the default [`Execution`].
pub fn integrate_unit_cube<F>(f: F, dim: usize, spec: &QuadratureSpec) -> Result<f64, QuadratureError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError> + Sync,
{
    integrate_unit_cube_with(f, dim, spec, Execution::default())
}

pub fn integrate_unit_cube_with<F>(
    f: F,
    dim: usize,
    spec: &QuadratureSpec,
    execution: Execution,
) -> Result<f64, QuadratureError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError> + Sync,
{
    if dim == 0 {
        return Err(QuadratureError::ZeroDimension);
    }
    spec.validate()?;
    let rule = CellRule::new(spec.points, spec.cells);
    let cells = spec
        .cells
        .checked_pow(dim as u32)
        .ok_or(QuadratureError::TooManyNodes)?;
    spec.points.checked_pow(dim as u32).ok_or(QuadratureError::TooManyNodes)?;

    let cell = |id: usize| rule.integrate_cell(&f, dim, id);
    let sums: Vec<Result<f64, QuadratureError>> = match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..cells).into_par_iter().map(cell).collect(),
        _ => (0..cells).map(cell).collect(),
    };
    let mut acc = Neumaier::new();
    for s in sums {
        acc.add(s?);
    }
    Ok(acc.total())
}

struct CellRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    cells: usize,
}

impl CellRule {
    fn new(points: usize, cells: usize) -> Self {
        let (nodes, weights) = gauss_legendre(points);
        CellRule { nodes, weights, cells }
    }

    fn integrate_cell<F>(&self, f: &F, dim: usize, id: usize) -> Result<f64, QuadratureError>
    where
        F: Fn(&[f64]) -> Result<f64, EvalError>,
    {
        let q = self.nodes.len();
        let m = self.cells as f64;
        // cell coordinates, axis 0 most significant
        let mut origin = vec![0.0; dim];
        let mut rest = id;
        for axis in (0..dim).rev() {
            origin[axis] = (rest % self.cells) as f64;
            rest /= self.cells;
        }
        let mut digits = vec![0usize; dim];
        let mut point = vec![0.0; dim];
        let mut acc = Neumaier::new();
        loop {
            let mut w = 1.0;
            for axis in 0..dim {
                point[axis] = (origin[axis] + self.nodes[digits[axis]]) / m;
                w *= self.weights[digits[axis]] / m;
            }
            let value = f(&point).map_err(|source| QuadratureError::Eval { node: point.clone(), source })?;
            if !value.is_finite() {
                return Err(QuadratureError::NonFinite { node: point, value });
            }
            acc.add(w * value);

            // odometer increment, last axis fastest
            let mut axis = dim;
            loop {
                if axis == 0 {
                    return Ok(acc.total());
                }
                axis -= 1;
                digits[axis] += 1;
                if digits[axis] < q {
                    break;
                }
                digits[axis] = 0;
            }
        }
    }
}
