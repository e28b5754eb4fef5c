//! Small dense-vector kernels and a conjugate-gradient solver.

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Outcome of an iterative linear solve.
#[derive(Debug, Clone)]
pub struct Solve {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Max-norm of `b - A x` at exit.
    pub residual: f64,
}

/// Conjugate gradients for a symmetric positive definite operator.
///
/// Stops when the max-norm of the true residual drops below `tol`. The
/// recursive residual is re-synchronised with `b - A x` every 50 steps.
pub fn conjugate_gradient<F>(apply: F, b: &[f64], tol: f64, max_iter: usize) -> Result<Solve>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    if sup_norm(&r) <= tol {
        return Ok(Solve { x, iterations: 0, residual: sup_norm(&r) });
    }
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Singular(format!(
                "operator not positive definite (p·Ap = {pap:e} at step {it})"
            )));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if it % 50 == 0 {
            apply(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
        }
        let rr_new = dot(&r, &r);
        if sup_norm(&r) <= tol {
            // confirm against the true residual
            apply(&x, &mut ap);
            let true_res = b.iter().zip(&ap).fold(0.0f64, |m, (bi, ai)| m.max((bi - ai).abs()));
            if true_res <= tol {
                return Ok(Solve { x, iterations: it, residual: true_res });
            }
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            let rr_true = dot(&r, &r);
            p.copy_from_slice(&r);
            rr = rr_true;
            continue;
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    apply(&x, &mut ap);
    let residual = b.iter().zip(&ap).fold(0.0f64, |m, (bi, ai)| m.max((bi - ai).abs()));
    Err(Error::Singular(format!(
        "conjugate gradient stalled after {max_iter} steps (residual {residual:e})"
    )))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
