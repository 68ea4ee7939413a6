use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cayley::Ball;
use crate::error::{invalid, Error, Result};
use crate::kernel::RieszKernel;

/// Which constrained maximization is being solved.
///
/// | family | constraint | operator `L` |
/// |---|---|---|
/// | `FirstOrder` | `‖u‖_{D^{1,2}}` | `Δ` |
/// | `PLaplace` | `‖u‖_{D^{1,p}}` | `Δ_p` |
/// | `Biharmonic` | `‖u‖_{D^{2,2}}` | `-Δ²` |
/// | `PBiharmonic` | `‖u‖_{D^{2,p}}` | `-Δ(|Δu|^{p-2}Δu)` |
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    FirstOrder,
    PLaplace,
    Biharmonic,
    PBiharmonic,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::FirstOrder, Family::PLaplace, Family::Biharmonic, Family::PBiharmonic];

    pub fn name(self) -> &'static str {
        match self {
            Family::FirstOrder => "first-order",
            Family::PLaplace => "p-laplace",
            Family::Biharmonic => "biharmonic",
            Family::PBiharmonic => "p-biharmonic",
        }
    }

    pub fn is_second_order(self) -> bool {
        matches!(self, Family::Biharmonic | Family::PBiharmonic)
    }

    /// Exponent of the constraint energy, i.e. its homogeneity degree.
    pub fn constraint_exponent(self, p: f64) -> f64 {
        match self {
            Family::FirstOrder | Family::Biharmonic => 2.0,
            Family::PLaplace | Family::PBiharmonic => p,
        }
    }

    /// Homogeneity degree `a` of `L`: `L(tu) = t^a L(u)`.
    pub fn operator_degree(self, p: f64) -> f64 {
        match self {
            Family::FirstOrder | Family::Biharmonic => 1.0,
            Family::PLaplace | Family::PBiharmonic => p - 1.0,
        }
    }

    /// Admissible parameter region on a graph of homogeneous dimension `n`.
    pub fn admissibility(self, n: usize, alpha: f64, p: f64) -> Admissibility {
        let nf = n as f64;
        let mut reasons = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                reasons.push(msg);
            }
        };
        match self {
            Family::FirstOrder => {
                need(n >= 3, format!("needs N >= 3, got {n}"));
                need(alpha > 0.0 && alpha < nf, format!("needs alpha in (0, {nf})"));
                if n > 2 {
                    let lo = (nf + alpha) / (nf - 2.0);
                    need(p > lo, format!("needs p > (N+alpha)/(N-2) = {lo}"));
                }
            }
            Family::PLaplace => {
                need(n >= 3, format!("needs N >= 3, got {n}"));
                need(alpha > 0.0 && alpha < nf - 2.0, format!("needs alpha in (0, {})", nf - 2.0));
                let hi = (nf - alpha) / 2.0;
                need(p > 1.0 && p < hi, format!("needs 1 < p < (N-alpha)/2 = {hi}"));
            }
            Family::Biharmonic => {
                need(n >= 5, format!("needs N >= 5, got {n}"));
                need(alpha > 0.0 && alpha < nf, format!("needs alpha in (0, {nf})"));
                if n > 4 {
                    let lo = (nf + alpha) / (nf - 4.0);
                    need(p > lo, format!("needs p > (N+alpha)/(N-4) = {lo}"));
                }
            }
            Family::PBiharmonic => {
                need(n >= 5, format!("needs N >= 5, got {n}"));
                need(alpha > 0.0 && alpha < nf - 4.0, format!("needs alpha in (0, {})", nf - 4.0));
                let hi = (nf - alpha) / 4.0;
                need(p > 1.0 && p < hi, format!("needs 1 < p < (N-alpha)/4 = {hi}"));
            }
        }
        Admissibility { in_theorem: reasons.is_empty(), reasons }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        match key.as_str() {
            "firstorder" | "first" | "choquard" => Ok(Family::FirstOrder),
            "plaplace" | "plap" => Ok(Family::PLaplace),
            "biharmonic" | "bih" => Ok(Family::Biharmonic),
            "pbiharmonic" | "pbih" => Ok(Family::PBiharmonic),
            _ => Err(Error::Invalid(format!(
                "unknown family `{s}` (expected first-order, p-laplace, biharmonic or p-biharmonic)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub in_theorem: bool,
    /// Violated conditions; empty when `in_theorem`.
    pub reasons: Vec<String>,
}

impl Admissibility {
    pub fn label(&self) -> &'static str {
        if self.in_theorem {
            "in-theorem"
        } else {
            "out-of-theorem"
        }
    }
}

/// A maximization problem on one ball with one kernel.
#[derive(Clone, Debug)]
pub struct Problem {
    family: Family,
    p: f64,
    kernel: Arc<RieszKernel>,
    support: Option<Vec<bool>>,
    admissibility: Admissibility,
}

impl Problem {
    /// An in-theorem problem; parameters outside the admissible region are rejected.
    pub fn new(family: Family, kernel: Arc<RieszKernel>, p: f64) -> Result<Self> {
        let problem = Self::labeled(family, kernel, p)?;
        if !problem.admissibility.in_theorem {
            return invalid(format!(
                "{family} with alpha = {}, p = {p} is outside the admissible region: {}",
                problem.alpha(),
                problem.admissibility.reasons.join("; ")
            ));
        }
        Ok(problem)
    }

    /// Accepts out-of-theorem parameters and labels them; used by sweeps.
    pub fn labeled(family: Family, kernel: Arc<RieszKernel>, p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return invalid(format!("p must be a finite number above 1, got {p}"));
        }
        let n = kernel.domain().spec().homogeneous_dimension();
        let admissibility = family.admissibility(n, kernel.alpha(), p);
        Ok(Problem { family, p, kernel, support: None, admissibility })
    }

    /// Confine the unknown to the vertices where `mask` is true.
    pub fn with_support(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.domain().len() {
            return invalid(format!("support mask has {} entries, ball has {}", mask.len(), self.domain().len()));
        }
        if !mask.iter().any(|&b| b) {
            return invalid("support mask is empty");
        }
        self.support = Some(mask);
        Ok(self)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.kernel.alpha()
    }

    pub fn kernel(&self) -> &Arc<RieszKernel> {
        &self.kernel
    }

    pub fn domain(&self) -> &Arc<Ball> {
        self.kernel.domain()
    }

    pub fn support(&self) -> Option<&[bool]> {
        self.support.as_deref()
    }

    pub fn admissibility(&self) -> &Admissibility {
        &self.admissibility
    }

    pub fn label(&self) -> &'static str {
        self.admissibility.label()
    }

    /// Homogeneous dimension of the underlying group.
    pub fn dimension(&self) -> usize {
        self.domain().spec().homogeneous_dimension()
    }
}
