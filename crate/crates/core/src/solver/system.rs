use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calculus::{laplacian_vec, norm2, LatticeFunction};
use crate::error::{invalid, Error, Result};
use crate::kernel::SpectralData;

use super::model::{Model, Objective};
use super::{check_domain, Family, Problem};

/// Scale a stationary point of the constrained problem to a solution with unit coefficient.
///
/// From `L(u) + lambda w(u) = 0` and the homogeneities `L(tu) = t^a L(u)`,
/// `w(tu) = t^h w(u)`, the choice `t = lambda^{1/(h-a)}` gives `L(tu) + w(tu) = 0`.
/// Returns the scaled values and their unnormalized residual.
pub(crate) fn rescale(model: &Model, u: &[f64], lambda: f64, normalized_residual: f64) -> Result<(Vec<f64>, f64)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("multiplier must be positive, got {lambda}"));
    }
    let a = model.family().operator_degree(model.p());
    let h = model.objective_degree() - 1.0;
    let t = lambda.powf(1.0 / (h - a));
    let v: Vec<f64> = u.iter().map(|x| t * x).collect();
    let l = model.restrict(&model.operator(&v));
    let w = model.restrict(&model.w(&v));
    let r: Vec<f64> = l.iter().zip(&w).map(|(a, b)| a + b).collect();
    let unnormalized = norm2(&r) / norm2(&w);
    // The two residuals agree in exact arithmetic; the floor absorbs rounding.
    if !(unnormalized <= 10.0 * normalized_residual + 1e-13) {
        return Err(Error::Numerical(format!(
            "rescaled residual {unnormalized:e} exceeds ten times the normalized residual {normalized_residual:e}"
        )));
    }
    Ok((v, unnormalized))
}

/// `t u_star` with `t = lambda^{1/(2p-1-a)}`, so that `L(tu) + w(tu) = 0`.
pub fn rescale_to_solution(problem: &Problem, u_star: &LatticeFunction, lambda: f64) -> Result<LatticeFunction> {
    check_domain(problem, u_star)?;
    let model = Model::new(problem, Objective::Choquard);
    let stat = model.stationarity(u_star.values())?;
    let (v, _) = rescale(&model, u_star.values(), lambda, stat.residual)?;
    u_star.with_values(v)
}

/// The pair `(u, v = R * u^p)` solving `(-Delta)^{alpha/2} v = u^p`, `Delta u + v u^{p-1} = 0`.
#[derive(Clone, Debug)]
pub struct SystemReport {
    pub u: LatticeFunction,
    pub v: LatticeFunction,
    /// `‖(-Delta)^{alpha/2} v - u^p‖ / ‖u^p‖`.
    pub fractional_residual: f64,
    /// `‖Delta u + v u^{p-1}‖ / ‖v u^{p-1}‖` over the support.
    pub equation_residual: f64,
    pub v_min: f64,
    /// Minimum of `u` over support vertices within half the radius.
    pub u_bulk_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub fractional_residual: f64,
    pub equation_residual: f64,
    pub v_min: f64,
    pub u_bulk_min: f64,
}

impl SystemReport {
    pub fn summary(&self) -> SystemSummary {
        SystemSummary {
            fractional_residual: self.fractional_residual,
            equation_residual: self.equation_residual,
            v_min: self.v_min,
            u_bulk_min: self.u_bulk_min,
        }
    }
}

pub fn build_system(problem: &Problem, spectral: &SpectralData, u_solution: &LatticeFunction) -> Result<SystemReport> {
    check_domain(problem, u_solution)?;
    if problem.family() != Family::FirstOrder {
        return invalid(format!("the system form belongs to the first-order family, not {}", problem.family()));
    }
    if !spectral.domain().same_as(problem.domain()) {
        return Err(Error::DomainMismatch("spectral data and problem live on different balls".into()));
    }
    let u = u_solution.values();
    let negative: Vec<usize> = (0..u.len()).filter(|&i| u[i] < 0.0).collect();
    if !negative.is_empty() {
        return Err(Error::Numerical(format!("u is negative at vertices {}", list(&negative))));
    }
    let p = problem.p();
    let up: Vec<f64> = u.iter().map(|x| x.powf(p)).collect();
    let v = problem.kernel().apply(&up);
    let back = spectral.apply_fn(|l| l.powf(0.5 * problem.alpha()), &v);
    let diff: Vec<f64> = back.iter().zip(&up).map(|(a, b)| a - b).collect();
    let fractional_residual = norm2(&diff) / norm2(&up);

    let model = Model::new(problem, Objective::Choquard);
    let lap = model.restrict(&laplacian_vec(problem.domain(), u));
    let nl = model.restrict(&v.iter().zip(u).map(|(a, b)| a * b.powf(p - 1.0)).collect::<Vec<_>>());
    let r: Vec<f64> = lap.iter().zip(&nl).map(|(a, b)| a + b).collect();
    let equation_residual = norm2(&r) / norm2(&nl);

    let ball = problem.domain();
    let nonpositive_v: Vec<usize> = (0..v.len()).filter(|&i| !(v[i] > 0.0)).collect();
    if !nonpositive_v.is_empty() {
        return Err(Error::Numerical(format!("v is not positive at vertices {}", list(&nonpositive_v))));
    }
    let bulk: Vec<usize> = model
        .support
        .iter()
        .copied()
        .filter(|&i| 2 * ball.distance(i) <= ball.radius())
        .collect();
    let flat: Vec<usize> = bulk.iter().copied().filter(|&i| !(u[i] > 0.0)).collect();
    if !flat.is_empty() {
        return Err(Error::Numerical(format!("u vanishes in the bulk at vertices {}", list(&flat))));
    }
    let v_min = v.iter().fold(f64::INFINITY, |m, x| m.min(*x));
    let u_bulk_min = bulk.iter().fold(f64::INFINITY, |m, &i| m.min(u[i]));
    let domain = Arc::clone(ball);
    Ok(SystemReport {
        u: u_solution.clone(),
        v: LatticeFunction::new(domain, v)?,
        fractional_residual,
        equation_residual,
        v_min,
        u_bulk_min,
    })
}

fn list(idx: &[usize]) -> String {
    let shown: Vec<String> = idx.iter().take(20).map(|i| i.to_string()).collect();
    if idx.len() > 20 {
        format!("{} and {} more", shown.join(", "), idx.len() - 20)
    } else {
        shown.join(", ")
    }
}
