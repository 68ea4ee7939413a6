//! Single kernel columns on balls too large for a dense eigen-decomposition.
//!
//! `alpha = 2` is a sparse linear solve. Other orders use Lanczos with full
//! reorthogonalization; `f(-Delta) e_x` is approximated by `Q f(T) e_1`.

use crate::cayley::Ball;
use crate::error::{invalid, Error, Result};
use crate::linalg::{conjugate_gradient, tridiag_eig};

use super::{neg_laplacian_apply, KernelMethod, SubordinationRule};

/// Green's function column `g = (-Delta)^{-1} delta_source` by conjugate gradients.
pub fn green_column(ball: &Ball, source: usize, tol: f64) -> Result<Vec<f64>> {
    let mut b = vec![0.0; ball.len()];
    b[source] = 1.0;
    let out = conjugate_gradient(|x, y| neg_laplacian_apply(ball, x, y), &b, tol, 20 * ball.len() + 100)?;
    Ok(out.x)
}

#[derive(Clone, Debug)]
pub struct KrylovColumn {
    pub values: Vec<f64>,
    pub steps: usize,
    /// Relative change over the last check interval.
    pub change: f64,
}

/// Column `R_alpha(., source)` by Lanczos.
///
/// Stops once the relative change between checks (every 10 steps) falls
/// below `tol`, or when the Krylov space is exhausted.
pub fn riesz_column(
    ball: &Ball,
    alpha: f64,
    source: usize,
    method: KernelMethod,
    tol: f64,
    max_steps: usize,
) -> Result<KrylovColumn> {
    let m = ball.len();
    if !(alpha > 0.0) {
        return invalid("alpha must be positive");
    }
    let max_steps = max_steps.min(m).max(1);
    let mut basis: Vec<f64> = Vec::with_capacity(m * max_steps.min(1024));
    let mut diag = Vec::new();
    let mut off = Vec::new();
    let mut q = vec![0.0; m];
    q[source] = 1.0;
    let mut w = vec![0.0; m];
    let mut h = Vec::new();
    let mut last: Option<Vec<f64>> = None;
    let mut change = f64::INFINITY;

    for k in 0..max_steps {
        basis.extend_from_slice(&q);
        neg_laplacian_apply(ball, &q, &mut w);
        let a: f64 = w.iter().zip(&q).map(|(x, y)| x * y).sum();
        diag.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            h.resize(k + 1, 0.0);
            unsafe {
                blas::dgemv(b'T', m as i32, (k + 1) as i32, 1.0, &basis, m as i32, &w, 1, 0.0, &mut h, 1);
                blas::dgemv(b'N', m as i32, (k + 1) as i32, -1.0, &basis, m as i32, &h, 1, 1.0, &mut w, 1);
            }
        }
        let beta = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let invariant = beta <= 1e-13 * a.abs().max(1.0);
        let last_step = k + 1 == max_steps;
        if (k + 1) % 10 == 0 || invariant || last_step {
            let col = evaluate(&basis, m, &diag, &off, alpha, method)?;
            if let Some(prev) = &last {
                let num: f64 = col.iter().zip(prev).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let den: f64 = col.iter().map(|a| a * a).sum::<f64>().sqrt();
                change = num / den;
            }
            if change <= tol || invariant || k + 1 == m {
                return Ok(KrylovColumn { values: col, steps: k + 1, change });
            }
            if last_step {
                return Err(Error::Numerical(format!(
                    "Lanczos stopped after {} steps with relative change {change:e}",
                    k + 1
                )));
            }
            last = Some(col);
        }
        off.push(beta);
        for (qi, wi) in q.iter_mut().zip(&w) {
            *qi = wi / beta;
        }
    }
    unreachable!("loop returns on its final step")
}

fn evaluate(basis: &[f64], m: usize, diag: &[f64], off: &[f64], alpha: f64, method: KernelMethod) -> Result<Vec<f64>> {
    let k = diag.len();
    let (theta, s) = tridiag_eig(diag, &off[..k - 1])?;
    let f: Box<dyn Fn(f64) -> f64> = match method {
        KernelMethod::Spectral => Box::new(move |l: f64| l.powf(-0.5 * alpha)),
        KernelMethod::Subordination(q) => {
            let rule = SubordinationRule::new(alpha, theta[0], q)?;
            Box::new(move |l: f64| rule.weight(l))
        }
    };
    let y: Vec<f64> = (0..k)
        .map(|i| (0..k).map(|j| s[(i, j)] * s[(0, j)] * f(theta[j])).sum())
        .collect();
    let mut col = vec![0.0; m];
    unsafe {
        blas::dgemv(b'N', m as i32, k as i32, 1.0, basis, m as i32, &y, 1, 0.0, &mut col, 1);
    }
    Ok(col)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cayley::GroupSpec;
    use crate::kernel::{riesz_kernel, spectral_decompose};

    #[test]
    fn lanczos_matches_dense_column() {
        let b = crate::cayley::Ball::centered(GroupSpec::FreeAbelian(3), 6).unwrap();
        let s = spectral_decompose(&b).unwrap();
        for alpha in [0.5, 1.0, 2.0] {
            let k = riesz_kernel(&s, alpha).unwrap();
            let c = riesz_column(&b, alpha, 0, KernelMethod::Spectral, 1e-13, 1000).unwrap();
            for (i, v) in c.values.iter().enumerate() {
                assert!((v - k.entry(i, 0)).abs() < 1e-11 * k.entry(0, 0), "alpha {alpha} vertex {i}");
            }
        }
        let g = green_column(&b, 0, 1e-14).unwrap();
        let k2 = riesz_kernel(&s, 2.0).unwrap();
        assert!((g[0] - k2.entry(0, 0)).abs() < 1e-12);
    }
}
