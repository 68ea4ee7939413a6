//! Constrained maximization of the Choquard functional and its variants.
//!
//! [`maximize`] runs a preconditioned projected ascent on the constraint
//! sphere, replaces the iterate by its absolute value, and finishes with a
//! Newton polish of the Euler-Lagrange system. Every accepted iterate,
//! ascent or polish, has an objective value no smaller than its predecessor.

mod ascent;
mod model;
mod polish;
mod problem;
mod sweep;
mod system;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calculus::LatticeFunction;
use crate::cayley::GroupElement;
use crate::error::{invalid, Error, Result};

use model::{Model, Objective};

pub use problem::{Admissibility, Family, Problem};
pub use sweep::{sweep, SweepGrid, SweepResult, SweepRow, SweepTrend, SWEEP_HEADER};
pub use system::{build_system, rescale_to_solution, SystemReport};

/// Length of the run of negligible improvements that counts as a stall.
pub const STALL_WINDOW: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Init {
    /// `exp(-(d/width)^2)` in the word distance from the center; the default
    /// width is a sixth of the radius.
    NormalizedBump { width: Option<f64> },
    /// Seeded standard normal values.
    Random,
    /// Start from given values in vertex order.
    Warm { values: Vec<f64> },
}

impl Default for Init {
    fn default() -> Self {
        Init::NormalizedBump { width: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub max_iter: usize,
    pub step0: f64,
    /// Step multiplier after a rejected trial, in (0, 1).
    pub backtrack: f64,
    /// Step multiplier after an accepted step, above 1.
    pub growth: f64,
    pub tol_residual: f64,
    /// Relative improvement below which a step counts toward a stall.
    pub tol_stall: f64,
    /// Recentering period in iterations; 0 disables it.
    pub recenter_every: usize,
    pub seed: u64,
    pub init: Init,
    /// Finish with a Newton polish once the ascent residual reaches `polish_from`.
    pub polish: bool,
    pub polish_from: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_iter: 2000,
            step0: 1.0,
            backtrack: 0.5,
            growth: 2.0,
            tol_residual: 1e-10,
            tol_stall: 1e-15,
            recenter_every: 25,
            seed: 0,
            init: Init::default(),
            polish: true,
            polish_from: 1e-3,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step0", self.step0),
            ("tol_residual", self.tol_residual),
            ("tol_stall", self.tol_stall),
            ("polish_from", self.polish_from),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return invalid(format!("backtrack must lie in (0, 1), got {}", self.backtrack));
        }
        if !(self.growth > 1.0 && self.growth.is_finite()) {
            return invalid(format!("growth must exceed 1, got {}", self.growth));
        }
        if let Init::NormalizedBump { width: Some(w) } = self.init {
            if !(w > 0.0 && w.is_finite()) {
                return invalid(format!("bump width must be positive, got {w}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIter,
    Stalled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Ascent,
    Polish,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub phase: Phase,
    /// Objective value of the accepted iterate.
    pub value: f64,
    pub step: f64,
    /// Translation applied by recentering at this iteration.
    pub shift: Option<GroupElement>,
    pub residual: f64,
}

/// Least-squares Lagrange multiplier of `L(u) + lambda w(u) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stationarity {
    pub lambda: f64,
    /// `‖L + lambda w‖ / ‖lambda w‖`, invariant under scaling of `u`.
    pub residual: f64,
    /// `‖L + lambda w‖ / ‖w‖`.
    pub residual_literal: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub family: Family,
    pub alpha: f64,
    pub p: f64,
    pub label: String,
    /// `"choquard"` or `"equivalent"`.
    pub objective: String,
    /// Constraint-normalized maximizer, entrywise nonnegative.
    pub u_star: LatticeFunction,
    pub k_hat: f64,
    pub lambda: f64,
    /// Residual on which convergence is judged.
    pub residual: f64,
    pub residual_literal: f64,
    /// Solution of `L(u) + w(u) = 0` with unit coefficient.
    pub u_solution: LatticeFunction,
    /// `R * u^p` for the first-order family.
    pub v_solution: Option<LatticeFunction>,
    pub trace: Vec<TraceEntry>,
    pub status: Status,
    pub iterations: usize,
    pub diagnostics: BTreeMap<String, f64>,
}

/// The JSON part of a [`SolveResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub family: Family,
    pub group: String,
    pub radius: u32,
    pub vertices: usize,
    pub alpha: f64,
    pub p: f64,
    pub label: String,
    pub objective: String,
    pub k_hat: f64,
    pub lambda: f64,
    pub residual: f64,
    pub residual_literal: f64,
    pub status: Status,
    pub iterations: usize,
    pub diagnostics: BTreeMap<String, f64>,
    pub trace: Vec<TraceEntry>,
}

impl SolveResult {
    pub fn summary(&self) -> SolveSummary {
        let dom = self.u_star.domain();
        SolveSummary {
            family: self.family,
            group: dom.spec().to_string(),
            radius: dom.radius(),
            vertices: dom.len(),
            alpha: self.alpha,
            p: self.p,
            label: self.label.clone(),
            objective: self.objective.clone(),
            k_hat: self.k_hat,
            lambda: self.lambda,
            residual: self.residual,
            residual_literal: self.residual_literal,
            status: self.status,
            iterations: self.iterations,
            diagnostics: self.diagnostics.clone(),
            trace: self.trace.clone(),
        }
    }

    /// Write `{stem}.json` and the `u_star`, `u` and `v` CSVs into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, serde_json::to_string_pretty(&self.summary())?)?;
        let mut out = vec![json];
        let mut csv = |name: &str, f: &LatticeFunction| -> Result<()> {
            let path = dir.join(format!("{stem}_{name}.csv"));
            f.save_csv(&path)?;
            out.push(path);
            Ok(())
        };
        csv("u_star", &self.u_star)?;
        csv("u", &self.u_solution)?;
        if let Some(v) = &self.v_solution {
            csv("v", v)?;
        }
        Ok(out)
    }
}

fn check_domain(problem: &Problem, u: &LatticeFunction) -> Result<()> {
    if !u.domain().same_as(problem.domain()) {
        return Err(Error::DomainMismatch("function and problem live on different balls".into()));
    }
    Ok(())
}

/// `Q(u) = sum_x (R * |u|^p)(x) |u(x)|^p`.
pub fn functional_q(problem: &Problem, u: &LatticeFunction) -> Result<f64> {
    check_domain(problem, u)?;
    Ok(Model::new(problem, Objective::Choquard).value(u.values()))
}

/// `2p (R * |u|^p) |u|^{p-2} u`, zero where `u` vanishes.
pub fn functional_gradient(problem: &Problem, u: &LatticeFunction) -> Result<LatticeFunction> {
    check_domain(problem, u)?;
    let m = Model::new(problem, Objective::Choquard);
    let d = m.objective_degree();
    u.with_values(m.w(u.values()).into_iter().map(|v| d * v).collect())
}

/// Energy whose root is the family's constraint norm.
pub fn constraint_energy(problem: &Problem, u: &LatticeFunction) -> Result<f64> {
    check_domain(problem, u)?;
    Ok(Model::new(problem, Objective::Choquard).constraint(u.values()))
}

pub fn constraint_norm(problem: &Problem, u: &LatticeFunction) -> Result<f64> {
    check_domain(problem, u)?;
    Ok(Model::new(problem, Objective::Choquard).constraint_norm(u.values()))
}

/// Gradient of [`constraint_energy`].
pub fn constraint_gradient(problem: &Problem, u: &LatticeFunction) -> Result<LatticeFunction> {
    check_domain(problem, u)?;
    let m = Model::new(problem, Objective::Choquard);
    let kappa_l = m.constraint_gradient_unprojected(u.values());
    u.with_values(kappa_l)
}

/// The family operator `L(u)`.
pub fn family_operator(problem: &Problem, u: &LatticeFunction) -> Result<LatticeFunction> {
    check_domain(problem, u)?;
    u.with_values(Model::new(problem, Objective::Choquard).operator(u.values()))
}

fn equivalent_model(problem: &Problem) -> Result<Model<'_>> {
    if problem.family() != Family::FirstOrder {
        return invalid(format!("the equivalent form is defined for the first-order family, not {}", problem.family()));
    }
    let n = problem.dimension() as f64;
    let s = 2.0 * n / (n - problem.alpha());
    Ok(Model::new(problem, Objective::Equivalent { s }))
}

/// `G(u) = sum_x (R * |u|^p)(x)^s` with `s = 2N/(N-alpha)`.
pub fn equivalent_functional(problem: &Problem, u: &LatticeFunction) -> Result<f64> {
    check_domain(problem, u)?;
    Ok(equivalent_model(problem)?.value(u.values()))
}

/// `s p (R * (R * |u|^p)^{s-1}) |u|^{p-2} u`.
pub fn equivalent_gradient(problem: &Problem, u: &LatticeFunction) -> Result<LatticeFunction> {
    check_domain(problem, u)?;
    let m = equivalent_model(problem)?;
    let d = m.objective_degree();
    u.with_values(m.w(u.values()).into_iter().map(|v| d * v).collect())
}

/// Multiplier and residual of `L(u) + lambda w(u) = 0`, with
/// `w(u) = (R * |u|^p)|u|^{p-2}u`, over the problem's support.
pub fn euler_lagrange_residual(problem: &Problem, u: &LatticeFunction) -> Result<Stationarity> {
    check_domain(problem, u)?;
    Model::new(problem, Objective::Choquard).stationarity(u.values())
}

/// The same for the equivalent form, `w(u) = (R * (R * |u|^p)^{s-1})|u|^{p-2}u`.
pub fn equivalent_residual(problem: &Problem, u: &LatticeFunction) -> Result<Stationarity> {
    check_domain(problem, u)?;
    equivalent_model(problem)?.stationarity(u.values())
}

/// Maximize `Q` on the constraint sphere of the problem's family.
pub fn maximize(problem: &Problem, config: &SolveConfig) -> Result<SolveResult> {
    ascent::run(&Model::new(problem, Objective::Choquard), config)
}

/// Maximize `‖R * |u|^p‖_{2N/(N-alpha)}` under `‖u‖_{D^{1,2}} = 1`.
pub fn solve_equivalent_form(problem: &Problem, config: &SolveConfig) -> Result<SolveResult> {
    ascent::run(&equivalent_model(problem)?, config)
}
