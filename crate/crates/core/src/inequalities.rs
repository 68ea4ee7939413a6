//! Random-witness harness for the Sobolev, HLS and Brezis-Lieb statements.
//!
//! Every `max_ratio` is the largest ratio seen over the trials, so it is a
//! lower bound on the true best constant, never an estimate from above.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{d1p_norm, d2p_norm, grad_energy_at, laplacian_vec, lp_norm_slice, LatticeFunction};
use crate::cayley::Ball;
use crate::error::{invalid, Error, Result};
use crate::kernel::RieszKernel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum Distribution {
    GaussianIid,
    SparseSpikes(usize),
    SmoothedBump(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomFunctionSpec {
    pub distribution: Distribution,
    pub support_radius: u32,
    pub seed: u64,
}

impl RandomFunctionSpec {
    pub fn gaussian(support_radius: u32, seed: u64) -> Self {
        RandomFunctionSpec {
            distribution: Distribution::GaussianIid,
            support_radius,
            seed,
        }
    }

    fn validate(&self, ball: &Ball) -> Result<()> {
        if 2 * self.support_radius > ball.radius() {
            return invalid(format!(
                "support radius {} exceeds half the ball radius {}",
                self.support_radius,
                ball.radius()
            ));
        }
        match self.distribution {
            Distribution::SparseSpikes(0) => invalid("SparseSpikes needs at least one spike"),
            Distribution::SmoothedBump(w) if !(w > 0.0) => invalid("SmoothedBump width must be positive"),
            _ => Ok(()),
        }
    }

    /// Independent stream per `(trial, slot)`.
    fn rng(&self, trial: u64, slot: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial * 4 + slot);
        rng
    }

    /// Draw the function for one trial; `slot` separates several draws per trial.
    pub fn sample(&self, ball: &Ball, trial: u64, slot: u64) -> Result<Vec<f64>> {
        self.validate(ball)?;
        let mut rng = self.rng(trial, slot);
        let support: Vec<usize> = (0..ball.len())
            .filter(|&i| ball.distance(i) <= self.support_radius)
            .collect();
        let mut u = vec![0.0; ball.len()];
        match self.distribution {
            Distribution::GaussianIid => {
                for &i in &support {
                    u[i] = rng.sample(StandardNormal);
                }
            }
            Distribution::SparseSpikes(k) => {
                for _ in 0..k {
                    let i = support[rng.random_range(0..support.len())];
                    u[i] += rng.sample::<f64, _>(StandardNormal);
                }
            }
            Distribution::SmoothedBump(width) => {
                let inner: Vec<usize> = support
                    .iter()
                    .copied()
                    .filter(|&i| 2 * ball.distance(i) <= self.support_radius)
                    .collect();
                let c = inner[rng.random_range(0..inner.len())];
                let amp = 0.5 + rng.random::<f64>();
                let d = graph_distances(ball, c, self.support_radius);
                for &i in &support {
                    if let Some(di) = d[i] {
                        u[i] = amp * (-(di as f64 / width).powi(2)).exp();
                    }
                }
            }
        }
        Ok(u)
    }
}

/// Breadth-first distances inside the ball from vertex `c`, capped at `cap`.
fn graph_distances(ball: &Ball, c: usize, cap: u32) -> Vec<Option<u32>> {
    let mut d = vec![None; ball.len()];
    d[c] = Some(0);
    let mut q = VecDeque::from([c]);
    while let Some(i) = q.pop_front() {
        let di = d[i].unwrap();
        if di >= cap {
            continue;
        }
        for j in ball.interior_neighbors(i) {
            if d[j].is_none() {
                d[j] = Some(di + 1);
                q.push_back(j);
            }
        }
    }
    d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub trials: usize,
    pub max_ratio: f64,
    /// Index of the maximizing trial.
    pub arg_max_trial: usize,
    /// Witness function values at the maximizing trial, in vertex order.
    pub arg_max: Vec<Vec<f64>>,
    pub violations: usize,
    pub out_of_theorem: bool,
    pub notes: Vec<String>,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.max_ratio.is_finite() && self.max_ratio > 0.0
    }

    /// Witnesses as lattice functions on `domain`.
    pub fn witnesses(&self, domain: &Arc<Ball>) -> Result<Vec<LatticeFunction>> {
        self.arg_max
            .iter()
            .map(|v| LatticeFunction::new(Arc::clone(domain), v.clone()))
            .collect()
    }
}

struct Trial {
    ratio: f64,
    violation: bool,
    witness: Vec<Vec<f64>>,
}

fn run_trials(name: &str, trials: usize, out_of_theorem: bool, notes: Vec<String>, f: impl Fn(u64) -> Result<Trial> + Sync) -> Result<InequalityReport> {
    if trials == 0 {
        return invalid("at least one trial is required");
    }
    let results: Vec<Trial> = (0..trials as u64).into_par_iter().map(&f).collect::<Result<_>>()?;
    let mut best = 0;
    let mut violations = 0;
    for (k, t) in results.iter().enumerate() {
        if t.violation {
            violations += 1;
        }
        if t.ratio > results[best].ratio || !results[best].ratio.is_finite() {
            best = k;
        }
    }
    Ok(InequalityReport {
        name: name.to_string(),
        trials,
        max_ratio: results[best].ratio,
        arg_max_trial: best,
        arg_max: results[best].witness.clone(),
        violations,
        out_of_theorem,
        notes,
    })
}

fn bad(x: f64) -> bool {
    !x.is_finite() || x < 0.0
}

/// `||u||_{l^q} <= C ||u||_{D^{1,p}}`.
pub fn check_sobolev(domain: &Arc<Ball>, spec: &RandomFunctionSpec, p: f64, q: f64, trials: usize) -> Result<InequalityReport> {
    let n = domain.spec().homogeneous_dimension() as f64;
    if !(p >= 1.0 && p < n) {
        return invalid(format!("Sobolev check needs 1 <= p < N = {n}, got p = {p}"));
    }
    spec.validate(domain)?;
    let crit = n * p / (n - p);
    let out = q < crit;
    let notes = if out { vec![format!("q = {q} is below the critical exponent {crit}")] } else { vec![] };
    run_trials("sobolev", trials, out, notes, |t| {
        let u = spec.sample(domain, t, 0)?;
        let a = lp_norm_slice(&u, q);
        let b = d1p_norm(domain, &u, p);
        let ratio = a / b;
        Ok(Trial {
            ratio,
            violation: bad(a) || bad(b) || !(ratio > 0.0) || !ratio.is_finite(),
            witness: vec![u],
        })
    })
}

/// `sum_x sum_y R(x, y) f(x) g(y)`, with or without the diagonal.
pub fn hls_form(kernel: &RieszKernel, f: &[f64], g: &[f64], include_diagonal: bool) -> f64 {
    let rg = if include_diagonal { kernel.apply(g) } else { kernel.apply_off_diagonal(g) };
    f.iter().zip(&rg).map(|(a, b)| a * b).sum()
}

/// Bilinear HLS ratio over nonnegative random pairs; off-diagonal by default.
pub fn check_hls_bilinear(kernel: &RieszKernel, spec: &RandomFunctionSpec, r: f64, s: f64, trials: usize) -> Result<InequalityReport> {
    check_hls_bilinear_with(kernel, spec, r, s, trials, false)
}

pub fn check_hls_bilinear_with(kernel: &RieszKernel, spec: &RandomFunctionSpec, r: f64, s: f64, trials: usize, include_diagonal: bool) -> Result<InequalityReport> {
    let domain = kernel.domain();
    let n = domain.spec().homogeneous_dimension() as f64;
    let alpha = kernel.alpha();
    if !(r > 1.0) || !(s > 1.0) {
        return invalid(format!("HLS needs r > 1 and s > 1, got r = {r}, s = {s}"));
    }
    let lhs = 1.0 / r + 1.0 / s + (n - alpha) / n;
    if lhs < 2.0 - 1e-12 {
        return invalid(format!("1/r + 1/s + (N - alpha)/N = {lhs} violates the requirement >= 2"));
    }
    spec.validate(domain)?;
    run_trials("hls", trials, false, vec![], |t| {
        let f: Vec<f64> = spec.sample(domain, t, 0)?.into_iter().map(f64::abs).collect();
        let g: Vec<f64> = spec.sample(domain, t, 1)?.into_iter().map(f64::abs).collect();
        let form = hls_form(kernel, &f, &g, include_diagonal);
        let ratio = form / (lp_norm_slice(&f, r) * lp_norm_slice(&g, s));
        let negative = f.iter().chain(&g).any(|v| *v < 0.0);
        Ok(Trial {
            ratio,
            violation: negative || bad(form) || !ratio.is_finite(),
            witness: vec![f, g],
        })
    })
}

/// `Q(u) = sum_x (R * |u|^p)(x) |u(x)|^p`, diagonal included.
pub fn functional_q(kernel: &RieszKernel, u: &[f64], p: f64) -> f64 {
    let a: Vec<f64> = u.iter().map(|v| v.abs().powf(p)).collect();
    let ka = kernel.apply(&a);
    a.iter().zip(&ka).map(|(x, y)| x * y).sum()
}

/// `Q(u) / ||u||_{D^{1,2}}^{2p}`, a lower bound for the best constant.
pub fn check_main_inequality(kernel: &RieszKernel, spec: &RandomFunctionSpec, p: f64, trials: usize) -> Result<InequalityReport> {
    let domain = kernel.domain();
    let n = domain.spec().homogeneous_dimension() as f64;
    let alpha = kernel.alpha();
    spec.validate(domain)?;
    let mut notes = vec![];
    let out = if n <= 2.0 {
        notes.push("N <= 2 has no critical exponent".to_string());
        true
    } else {
        let crit = (n + alpha) / (n - 2.0);
        if p < crit {
            notes.push(format!("p = {p} is below the critical exponent {crit}"));
        }
        p < crit
    };
    run_trials("main", trials, out, notes, |t| {
        let u = spec.sample(domain, t, 0)?;
        let q = functional_q(kernel, &u, p);
        let q_abs = functional_q(kernel, &u.iter().map(|v| v.abs()).collect::<Vec<_>>(), p);
        let d = d1p_norm(domain, &u, 2.0);
        let ratio = q / d.powf(2.0 * p);
        Ok(Trial {
            ratio,
            violation: bad(q) || bad(d) || !ratio.is_finite() || q_abs < q,
            witness: vec![u],
        })
    })
}

/// `||u||_{l^{p**}} <= C ||u||_{D^{2,p}}` with `p** = Np/(N-2p)`.
pub fn check_second_order_sobolev(domain: &Arc<Ball>, spec: &RandomFunctionSpec, p: f64, trials: usize) -> Result<InequalityReport> {
    let n = domain.spec().homogeneous_dimension() as f64;
    if !(p > 1.0 && 2.0 * p < n) {
        return invalid(format!("second-order Sobolev needs 1 < p < N/2 = {}, got p = {p}", n / 2.0));
    }
    spec.validate(domain)?;
    let pss = n * p / (n - 2.0 * p);
    run_trials("second_order_sobolev", trials, false, vec![format!("p** = {pss}")], |t| {
        let u = spec.sample(domain, t, 0)?;
        let a = lp_norm_slice(&u, pss);
        let b = d2p_norm(domain, &u, p);
        let ratio = a / b;
        Ok(Trial {
            ratio,
            violation: bad(a) || bad(b) || !(ratio > 0.0) || !ratio.is_finite(),
            witness: vec![u],
        })
    })
}

/// Functional whose splitting the defect measures.
#[derive(Clone, Debug)]
pub enum BrezisLiebMode {
    /// `sum_{x in Omega} |grad f(x)|_p^p`.
    GradientP(f64),
    /// `sum_{x in Omega} |Delta f(x)|^p`.
    LaplacianP(f64),
    /// `sum_{x in Omega} (R * |f|^p)(x) |f(x)|^p`.
    Nonlocal(f64, Arc<RieszKernel>),
}

impl BrezisLiebMode {
    pub fn label(&self) -> &'static str {
        match self {
            BrezisLiebMode::GradientP(_) => "gradient",
            BrezisLiebMode::LaplacianP(_) => "laplacian",
            BrezisLiebMode::Nonlocal(..) => "nonlocal",
        }
    }

    /// The functional restricted to `omega` (all vertices when `None`).
    pub fn evaluate(&self, f: &LatticeFunction, omega: Option<&[bool]>) -> f64 {
        let ball = f.domain();
        let u = f.values();
        let inside = |i: usize| omega.is_none_or(|o| o[i]);
        match self {
            BrezisLiebMode::GradientP(p) => (0..u.len()).filter(|&i| inside(i)).map(|i| grad_energy_at(ball, u, i, *p)).sum(),
            BrezisLiebMode::LaplacianP(p) => {
                let l = laplacian_vec(ball, u);
                (0..u.len()).filter(|&i| inside(i)).map(|i| l[i].abs().powf(*p)).sum()
            }
            BrezisLiebMode::Nonlocal(p, k) => {
                let a: Vec<f64> = u.iter().map(|v| v.abs().powf(*p)).collect();
                let ka = k.apply(&a);
                (0..u.len()).filter(|&i| inside(i)).map(|i| ka[i] * a[i]).sum()
            }
        }
    }
}

/// `|A(u_n) - A(u_n - u) - A(u)|` for each term of the sequence.
pub fn brezis_lieb_defect(u_seq: &[LatticeFunction], u: &LatticeFunction, mode: &BrezisLiebMode, omega: Option<&[bool]>) -> Result<Vec<f64>> {
    if let Some(o) = omega {
        if o.len() != u.domain().len() {
            return Err(Error::DomainMismatch("sub-domain mask length differs from the ball".into()));
        }
    }
    if let BrezisLiebMode::Nonlocal(_, k) = mode {
        if !k.domain().same_as(u.domain()) {
            return Err(Error::DomainMismatch("kernel and functions differ".into()));
        }
    }
    let a_u = mode.evaluate(u, omega);
    u_seq
        .iter()
        .map(|un| {
            un.check_same_domain(u)?;
            let diff: Vec<f64> = un.values().iter().zip(u.values()).map(|(a, b)| a - b).collect();
            let d = un.with_values(diff)?;
            Ok((mode.evaluate(un, omega) - mode.evaluate(&d, omega) - a_u).abs())
        })
        .collect()
}

/// `u + delta_{g_n}` for the given vertices.
pub fn separating_bumps(u: &LatticeFunction, sites: &[usize]) -> Result<Vec<LatticeFunction>> {
    sites
        .iter()
        .map(|&i| {
            let mut v = u.values().to_vec();
            v[i] += 1.0;
            u.with_values(v)
        })
        .collect()
}

/// `u + w / n` for `n = 1..=terms`.
pub fn shrinking_perturbations(u: &LatticeFunction, w: &LatticeFunction, terms: usize) -> Result<Vec<LatticeFunction>> {
    u.check_same_domain(w)?;
    (1..=terms)
        .map(|n| {
            let v = u.values().iter().zip(w.values()).map(|(a, b)| a + b / n as f64).collect();
            u.with_values(v)
        })
        .collect()
}

/// `u + 2^{-n} w` for `n = 0..terms`.
///
/// Reaches the regime where the defect is dominated by its first-order term
/// far sooner than `u + w / n`, whose defect can cross zero late.
pub fn geometric_perturbations(u: &LatticeFunction, w: &LatticeFunction, terms: usize) -> Result<Vec<LatticeFunction>> {
    u.check_same_domain(w)?;
    (0..terms)
        .map(|n| {
            let h = 0.5f64.powi(n as i32);
            let v = u.values().iter().zip(w.values()).map(|(a, b)| a + h * b).collect();
            u.with_values(v)
        })
        .collect()
}

/// Exact value of the nonlocal cross term for a unit bump at `site` that
/// does not meet the support of `u`: `2 (R * |u|^p)(site)`.
pub fn nonlocal_bump_cross_term(kernel: &RieszKernel, u: &[f64], p: f64, site: usize) -> f64 {
    let a: Vec<f64> = u.iter().map(|v| v.abs().powf(p)).collect();
    2.0 * (0..a.len()).map(|j| kernel.entry(site, j) * a[j]).sum::<f64>()
}

/// `(a + b)^p >= a^p + b^p` for `a, b >= 0`, `p >= 1`.
pub fn power_superadditive(a: f64, b: f64, p: f64) -> bool {
    (a + b).powf(p) >= a.powf(p) + b.powf(p)
}
