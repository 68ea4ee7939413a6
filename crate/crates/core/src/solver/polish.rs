//! Newton polish of the Euler-Lagrange system in logarithmic variables.
//!
//! The iterate is first scaled to `v = t u` solving `L(v) + w(v) = 0` with unit
//! coefficient; Newton then works on `log v`, which keeps `v` positive. A
//! Newton step is kept only if the renormalized iterate does not lower the
//! objective. The p-biharmonic family is polished on the mixed system
//! `Delta v = psi(s)`, `Delta s = w(v)` with `s = |Delta v|^{p-2} Delta v`,
//! whose unknowns stay bounded where `Delta v` is tiny.

use crate::calculus::{laplacian_vec, norm2, spow};
use crate::kernel::dirichlet_matrix;
use crate::linalg::{lu_solve, Mat};
use crate::error::Result;

use super::ascent::{Mixed, State};
use super::model::Model;
use super::{Family, Phase, SolveConfig, TraceEntry};

const MAX_STEPS: usize = 40;
/// Newton keeps iterating through this many consecutive rejected steps;
/// near convergence the objective gain drops below rounding.
const MAX_REJECTS: usize = 3;

pub(crate) fn run(model: &Model, config: &SolveConfig, st: &mut State) -> Result<()> {
    let positive = model.support.iter().all(|&i| st.u[i] > 0.0);
    if !positive || !(st.stat.lambda > 0.0) {
        return Ok(());
    }
    let a = model.family().operator_degree(model.p());
    let h = model.objective_degree() - 1.0;
    let t = st.stat.lambda.powf(1.0 / (h - a));
    let v: Vec<f64> = st.u.iter().map(|x| t * x).collect();
    if model.family() == Family::PBiharmonic {
        if !model.is_masked() {
            mixed(model, config, st, v)?;
        }
        return Ok(());
    }
    direct(model, config, st, v)
}

fn target(config: &SolveConfig) -> f64 {
    (1e-3 * config.tol_residual).max(1e-15)
}

fn direct(model: &Model, config: &SolveConfig, st: &mut State, v: Vec<f64>) -> Result<()> {
    let eqs = |v: &[f64]| -> Vec<f64> {
        let l = model.operator(v);
        let w = model.w(v);
        model.restrict(&l.iter().zip(&w).map(|(a, b)| a + b).collect::<Vec<_>>())
    };
    let mut lv: Vec<f64> = model.restrict(&v).iter().map(|x| x.ln()).collect();
    let mut rejects = 0;
    for _ in 0..MAX_STEPS {
        if st.stat.residual <= target(config) {
            break;
        }
        let v = model.scatter(&lv.iter().map(|x| x.exp()).collect::<Vec<_>>());
        let g = eqs(&v);
        let g0 = norm2(&g);
        let mut jac = model.operator_jacobian(&v);
        let jw = model.w_jacobian(&v);
        for (a, b) in jac.as_mut_slice().iter_mut().zip(jw.as_slice()) {
            *a += b;
        }
        let mut jac = if model.is_masked() { jac.select(&model.support) } else { jac };
        jac.scale_cols(&model.restrict(&v));
        let Ok(dx) = lu_solve(jac, &g.iter().map(|x| -x).collect::<Vec<_>>()) else {
            break;
        };
        let Some((next, step)) = line_search(&lv, &dx, g0, |x| {
            norm2(&eqs(&model.scatter(&x.iter().map(|y| y.exp()).collect::<Vec<_>>())))
        }) else {
            break;
        };
        let vn = model.scatter(&next.iter().map(|x| x.exp()).collect::<Vec<_>>());
        lv = next;
        if accept(model, st, &vn, step, None)? {
            rejects = 0;
        } else {
            rejects += 1;
            if rejects > MAX_REJECTS {
                break;
            }
        }
    }
    Ok(())
}

fn mixed(model: &Model, config: &SolveConfig, st: &mut State, v: Vec<f64>) -> Result<()> {
    let ball = model.ball();
    let m = ball.len();
    let p = model.p();
    let q = 1.0 / (p - 1.0);
    let eqs = |lv: &[f64], s: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let v: Vec<f64> = lv.iter().map(|x| x.exp()).collect();
        let lap_v = laplacian_vec(ball, &v);
        let lap_s = laplacian_vec(ball, s);
        let w = model.w(&v);
        let mut f: Vec<f64> = lap_v.iter().zip(s).map(|(a, b)| a - spow(*b, q)).collect();
        f.extend(lap_s.iter().zip(&w).map(|(a, b)| a - b));
        (f, w)
    };
    let mut lv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let mut s: Vec<f64> = laplacian_vec(ball, &v).into_iter().map(|x| spow(x, p - 1.0)).collect();
    let mut neg_a = dirichlet_matrix(ball);
    neg_a.as_mut_slice().iter_mut().for_each(|x| *x = -*x);
    let mut rejects = 0;
    for _ in 0..MAX_STEPS {
        let v: Vec<f64> = lv.iter().map(|x| x.exp()).collect();
        let (f, _) = eqs(&lv, &s);
        let f0 = norm2(&f);
        let jw = model.w_jacobian(&v);
        let mut jac = Mat::zeros(2 * m, 2 * m);
        for j in 0..m {
            for i in 0..m {
                jac[(i, j)] = neg_a[(i, j)] * v[j];
                jac[(m + i, j)] = -jw[(i, j)] * v[j];
                jac[(m + i, m + j)] = neg_a[(i, j)];
            }
            jac[(j, m + j)] = -q * s[j].abs().powf(q - 1.0);
        }
        let Ok(dx) = lu_solve(jac, &f.iter().map(|x| -x).collect::<Vec<_>>()) else {
            break;
        };
        let mut x: Vec<f64> = lv.clone();
        x.extend_from_slice(&s);
        let Some((next, step)) = line_search(&x, &dx, f0, |y| norm2(&eqs(&y[..m], &y[m..]).0)) else {
            break;
        };
        let (nf, nw) = eqs(&next[..m], &next[m..]);
        let vn: Vec<f64> = next[..m].iter().map(|y| y.exp()).collect();
        let lap_v = laplacian_vec(ball, &vn);
        let info = Mixed {
            v: vn.clone(),
            residual: norm2(&nf[m..]) / norm2(&nw),
            consistency: norm2(&nf[..m]) / norm2(&lap_v),
        };
        lv = next[..m].to_vec();
        s = next[m..].to_vec();
        if accept(model, st, &vn, step, Some(info.residual))? {
            rejects = 0;
            let done = info.residual <= target(config) && info.consistency <= target(config);
            st.mixed = Some(info);
            if done {
                break;
            }
        } else {
            rejects += 1;
            if rejects > MAX_REJECTS {
                break;
            }
        }
    }
    Ok(())
}

/// Backtracking on the residual norm with a sufficient-decrease factor.
fn line_search(x: &[f64], dx: &[f64], f0: f64, norm_at: impl Fn(&[f64]) -> f64) -> Option<(Vec<f64>, f64)> {
    let mut step = 1.0;
    while step > 1e-12 {
        let y: Vec<f64> = x.iter().zip(dx).map(|(a, b)| a + step * b).collect();
        let f = norm_at(&y);
        if f.is_finite() && f < (1.0 - 1e-4 * step) * f0 {
            return Some((y, step));
        }
        step *= 0.5;
    }
    None
}

/// Renormalize `v` and adopt it if the objective does not drop.
fn accept(model: &Model, st: &mut State, v: &[f64], step: f64, mixed_residual: Option<f64>) -> Result<bool> {
    let Some((u, q)) = model.adopt(v, st.value) else {
        return Ok(false);
    };
    let stat = model.stationarity(&u)?;
    st.u = u;
    st.value = q;
    st.stat = stat;
    st.iter += 1;
    st.trace.push(TraceEntry {
        iteration: st.iter,
        phase: Phase::Polish,
        value: q,
        step,
        shift: None,
        residual: mixed_residual.unwrap_or(stat.residual),
    });
    Ok(true)
}
