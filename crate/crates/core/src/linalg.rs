//! Implicit solves `(I − c L) x = b` for the grid Laplacian.
//!
//! The 1-D layout uses the Thomas algorithm; other layouts use conjugate
//! gradients in the volume-weighted inner product with a Jacobi preconditioner.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{apply_laplacian, inner, Grid};
use crate::tolerances;

/// Solves `(I − c L) x = rhs` for `c ≥ 0`.
pub(crate) fn solve_implicit(grid: &Grid, c: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    match grid.tridiagonal() {
        Some((lower, upper)) => Ok(thomas(c, &lower, &upper, rhs)),
        None => conjugate_gradient(grid, c, rhs),
    }
}

fn thomas(c: f64, lower: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let diag = |i: usize| 1.0 + c * (lower[i] + upper[i]);
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = -c * upper[0] / diag(0);
    dp[0] = rhs[0] / diag(0);
    for i in 1..n {
        let a = -c * lower[i];
        let m = diag(i) - a * cp[i - 1];
        cp[i] = -c * upper[i] / m;
        dp[i] = (rhs[i] - a * dp[i - 1]) / m;
    }
    let mut x = dp;
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    x
}

fn conjugate_gradient(grid: &Grid, c: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = grid.len();
    let mut diag = vec![1.0; n];
    for f in &grid.faces {
        diag[f.a] += c * f.trans / grid.volumes[f.a];
        diag[f.b] += c * f.trans / grid.volumes[f.b];
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        apply_laplacian(grid, x, 1.0, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi - c * *o;
        }
    };
    let b_norm = libm::sqrt(inner(grid, rhs, rhs));
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = inner(grid, &r, &z);
    let max_iter = 20 * n + 100;
    let mut res = b_norm;
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let alpha = rz / inner(grid, &p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = libm::sqrt(inner(grid, &r, &r));
        if res <= tolerances::LINEAR_SOLVE_REL * b_norm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = inner(grid, &r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence { what: "conjugate gradient", iterations: max_iter, residual: res / b_norm })
}
