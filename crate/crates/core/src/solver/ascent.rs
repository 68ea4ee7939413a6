use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::calculus::{dot, grad_energy_at, laplacian_vec, LatticeFunction};
use crate::cayley::{translate, GroupElement};
use crate::error::{invalid, Error, Result};
use crate::linalg::Cholesky;

use super::model::{Model, Objective};
use super::{polish, system, Family, Init, Phase, SolveConfig, SolveResult, Stationarity, Status, TraceEntry, STALL_WINDOW};

pub(crate) struct State {
    pub u: Vec<f64>,
    pub value: f64,
    pub stat: Stationarity,
    /// Residual and consistency of the mixed p-biharmonic system, once polished there.
    pub mixed: Option<Mixed>,
    pub tau: f64,
    pub iter: usize,
    pub stall_run: usize,
    pub trace: Vec<TraceEntry>,
}

#[derive(Clone, Debug)]
pub(crate) struct Mixed {
    pub v: Vec<f64>,
    pub residual: f64,
    pub consistency: f64,
}

impl State {
    /// Residual on which convergence is judged.
    pub fn residual(&self) -> f64 {
        self.mixed.as_ref().map_or(self.stat.residual, |m| m.residual)
    }
}

enum Outcome {
    Reached,
    MaxIter,
    Stalled,
}

pub(crate) fn run(model: &Model, config: &SolveConfig) -> Result<SolveResult> {
    config.validate()?;
    let u = initial(model, config)?;
    let value = model.value(&u);
    let stat = model.stationarity(&u)?;
    let mut st = State {
        u,
        value,
        stat,
        mixed: None,
        tau: config.step0,
        iter: 0,
        stall_run: 0,
        trace: Vec::new(),
    };
    st.trace.push(TraceEntry {
        iteration: 0,
        phase: Phase::Ascent,
        value,
        step: 0.0,
        shift: None,
        residual: stat.residual,
    });
    let fixed = match model.family() {
        Family::FirstOrder | Family::Biharmonic => Some(model.preconditioner(&st.u)?),
        _ => None,
    };

    let first_target = if config.polish { config.tol_residual.max(config.polish_from) } else { config.tol_residual };
    let mut outcome = ascend(model, config, &mut st, fixed.as_ref(), first_target)?;
    let mut diagnostics = BTreeMap::new();
    sign_cleanup(model, &mut st, &mut diagnostics)?;
    if config.polish {
        polish::run(model, config, &mut st)?;
    }
    if st.residual() > config.tol_residual && st.mixed.is_none() && !matches!(outcome, Outcome::MaxIter) {
        outcome = ascend(model, config, &mut st, fixed.as_ref(), config.tol_residual)?;
        sign_cleanup(model, &mut st, &mut diagnostics)?;
    }
    let status = if st.residual() <= config.tol_residual {
        Status::Converged
    } else if matches!(outcome, Outcome::MaxIter) {
        Status::MaxIter
    } else {
        Status::Stalled
    };
    finish(model, st, status, diagnostics)
}

fn initial(model: &Model, config: &SolveConfig) -> Result<Vec<f64>> {
    let ball = model.ball();
    let mut u: Vec<f64> = match &config.init {
        Init::NormalizedBump { width } => {
            let w = width.unwrap_or(ball.radius() as f64 / 6.0).max(f64::MIN_POSITIVE);
            ball.distances().iter().map(|&d| (-(d as f64 / w).powi(2)).exp()).collect()
        }
        Init::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            (0..ball.len()).map(|_| StandardNormal.sample(&mut rng)).collect()
        }
        Init::Warm { values } => {
            if values.len() != ball.len() {
                return invalid(format!("warm start has {} values, ball has {}", values.len(), ball.len()));
            }
            values.clone()
        }
    };
    model.project(&mut u);
    model
        .normalize(&u)
        .ok_or_else(|| Error::Invalid("initial guess has zero constraint norm on the support".into()))
}

fn ascend(model: &Model, config: &SolveConfig, st: &mut State, fixed: Option<&Cholesky>, target: f64) -> Result<Outcome> {
    loop {
        if st.stat.residual <= target {
            return Ok(Outcome::Reached);
        }
        if st.iter >= config.max_iter {
            return Ok(Outcome::MaxIter);
        }
        st.iter += 1;
        let fresh;
        let pre = match fixed {
            Some(c) => c,
            None => {
                fresh = model.preconditioner(&st.u)?;
                &fresh
            }
        };
        let gq = model.gradient(&st.u);
        let gc = model.constraint_gradient(&st.u);
        let pg = model.scatter(&pre.solve(&model.restrict(&gq)));
        let pc = model.scatter(&pre.solve(&model.restrict(&gc)));
        let beta = dot(&gc, &pg) / dot(&gc, &pc);
        let dir: Vec<f64> = pg.iter().zip(&pc).map(|(a, b)| a - beta * b).collect();
        if !beta.is_finite() || dir.iter().any(|v| !v.is_finite()) {
            return Err(nan_dump(model, st, "ascent direction"));
        }

        let mut accepted = None;
        while st.tau > 1e-40 {
            let trial: Vec<f64> = st.u.iter().zip(&dir).map(|(u, d)| u + st.tau * d).collect();
            if let Some(cand) = model.normalize(&trial) {
                let q = model.value(&cand);
                if q.is_nan() {
                    return Err(nan_dump(model, st, "trial objective"));
                }
                if q >= st.value {
                    accepted = Some((cand, q, st.tau));
                    break;
                }
            }
            st.tau *= config.backtrack;
        }
        let Some((cand, q, step)) = accepted else {
            st.tau = config.step0;
            return Ok(Outcome::Stalled);
        };
        st.tau *= config.growth;
        let gain = (q - st.value) / st.value.abs().max(f64::MIN_POSITIVE);
        st.stall_run = if gain < config.tol_stall { st.stall_run + 1 } else { 0 };
        st.u = cand;
        st.value = q;

        let mut shift = None;
        if config.recenter_every > 0 && st.iter % config.recenter_every == 0 && !model.is_masked() {
            shift = recenter(model, st)?;
        }
        st.stat = model.stationarity(&st.u)?;
        st.trace.push(TraceEntry {
            iteration: st.iter,
            phase: Phase::Ascent,
            value: st.value,
            step,
            shift,
            residual: st.stat.residual,
        });
        if st.stall_run >= STALL_WINDOW {
            return Ok(Outcome::Stalled);
        }
    }
}

/// Move the vertex of largest local constraint density to the center; kept
/// only when the objective does not drop.
fn recenter(model: &Model, st: &mut State) -> Result<Option<GroupElement>> {
    let ball = model.ball();
    let density: Vec<f64> = if model.family().is_second_order() {
        laplacian_vec(ball, &st.u).into_iter().map(f64::abs).collect()
    } else {
        (0..ball.len()).map(|x| grad_energy_at(ball, &st.u, x, 2.0)).collect()
    };
    let mut best = 0;
    for (i, d) in density.iter().enumerate() {
        if *d > density[best] {
            best = i;
        }
    }
    let center = ball.center();
    let target = ball.vertex(best);
    if target == center {
        return Ok(None);
    }
    let g = ball.group().multiply(target, &ball.group().invert(center));
    let f = LatticeFunction::new(Arc::clone(model.problem.domain()), st.u.clone())?;
    let moved = translate(&f, &g)?.function.into_values();
    let Some(cand) = model.normalize(&moved) else {
        return Ok(None);
    };
    let q = model.value(&cand);
    if q >= st.value {
        st.u = cand;
        st.value = q;
        Ok(Some(g))
    } else {
        Ok(None)
    }
}

/// Replace `u` by `|u|` when that keeps the objective and does not raise the constraint.
fn sign_cleanup(model: &Model, st: &mut State, diag: &mut BTreeMap<String, f64>) -> Result<()> {
    let abs: Vec<f64> = st.u.iter().map(|v| v.abs()).collect();
    let q_abs = model.value(&abs);
    let c = model.constraint(&st.u);
    let c_abs = model.constraint(&abs);
    diag.insert("sign_cleanup_value_gain".into(), q_abs - st.value);
    diag.insert("sign_cleanup_constraint_change".into(), c_abs - c);
    if abs == st.u {
        return Ok(());
    }
    if q_abs >= st.value && c_abs <= c {
        if let Some((u, q)) = model.adopt(&abs, st.value) {
            st.u = u;
            st.value = q;
            st.stat = model.stationarity(&st.u)?;
        }
    }
    Ok(())
}

fn nan_dump(model: &Model, st: &State, what: &str) -> Error {
    let bad = st.u.iter().filter(|v| !v.is_finite()).count();
    Error::Numerical(format!(
        "non-finite {what} at iteration {}: objective {}, residual {}, step {}, {bad} non-finite entries of {}",
        st.iter,
        st.value,
        st.stat.residual,
        st.tau,
        model.len()
    ))
}

fn finish(model: &Model, st: State, status: Status, mut diagnostics: BTreeMap<String, f64>) -> Result<SolveResult> {
    let problem = model.problem;
    let domain = Arc::clone(problem.domain());
    let p = problem.p();
    if st.u.iter().any(|v| *v < 0.0) {
        diagnostics.insert("negative_entries".into(), st.u.iter().filter(|v| **v < 0.0).count() as f64);
    }
    let u_star = LatticeFunction::new(Arc::clone(&domain), st.u.clone())?;
    diagnostics.insert("constraint_norm".into(), model.constraint_norm(&st.u));
    diagnostics.insert("pointwise_residual".into(), st.stat.residual);
    let lu = model.operator(&st.u);
    let wu = model.w(&st.u);
    diagnostics.insert("homogeneity_lambda".into(), -dot(&lu, &st.u) / dot(&wu, &st.u));

    let (lambda, residual, residual_literal, u_solution) = match &st.mixed {
        Some(mx) => {
            let t = crate::calculus::norm2(&mx.v) / crate::calculus::norm2(&st.u);
            let lambda = t.powf(model.objective_degree() - 1.0 - model.family().operator_degree(p));
            diagnostics.insert("mixed_consistency".into(), mx.consistency);
            diagnostics.insert("pointwise_lambda".into(), st.stat.lambda);
            (lambda, mx.residual, mx.residual * lambda, mx.v.clone())
        }
        None => {
            let (sol, unnormalized) = system::rescale(model, &st.u, st.stat.lambda, st.stat.residual)?;
            diagnostics.insert("unnormalized_residual".into(), unnormalized);
            (st.stat.lambda, st.stat.residual, st.stat.residual_literal, sol)
        }
    };
    let v_solution = match (problem.family(), model.objective) {
        (Family::FirstOrder, Objective::Choquard) => {
            let a: Vec<f64> = u_solution.iter().map(|x| x.abs().powf(p)).collect();
            Some(LatticeFunction::new(Arc::clone(&domain), problem.kernel().apply(&a))?)
        }
        _ => None,
    };
    Ok(SolveResult {
        family: problem.family(),
        alpha: problem.alpha(),
        p,
        label: problem.label().to_string(),
        objective: match model.objective {
            Objective::Choquard => "choquard".into(),
            Objective::Equivalent { .. } => "equivalent".into(),
        },
        k_hat: model.k_hat(st.value),
        lambda,
        residual,
        residual_literal,
        u_solution: LatticeFunction::new(domain, u_solution)?,
        v_solution,
        trace: st.trace,
        status,
        iterations: st.iter,
        diagnostics,
        u_star,
    })
}
