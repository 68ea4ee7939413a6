//! Family-specific pieces shared by the ascent and the Newton polish.

use crate::calculus::{d1p_energy, d2p_energy, dot, laplacian_vec, norm2, p_laplacian_vec, spow};
use crate::cayley::{Ball, EXTERIOR};
use crate::error::{Error, Result};
use crate::kernel::dirichlet_matrix;
use crate::linalg::{Cholesky, Mat};

use super::{Family, Problem, Stationarity};

/// What the iteration maximizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Objective {
    /// `Q(u) = sum (R * |u|^p) |u|^p`.
    Choquard,
    /// `G(u) = sum (R * |u|^p)^s`, whose `s`-th root is the HLS dual norm.
    Equivalent { s: f64 },
}

pub(crate) struct Model<'a> {
    pub problem: &'a Problem,
    pub objective: Objective,
    /// Vertices where the unknown may be nonzero.
    pub support: Vec<usize>,
}

impl<'a> Model<'a> {
    pub fn new(problem: &'a Problem, objective: Objective) -> Self {
        let support = match problem.support() {
            Some(mask) => (0..mask.len()).filter(|&i| mask[i]).collect(),
            None => (0..problem.domain().len()).collect(),
        };
        Model { problem, objective, support }
    }

    pub fn ball(&self) -> &Ball {
        self.problem.domain()
    }

    pub fn family(&self) -> Family {
        self.problem.family()
    }

    pub fn p(&self) -> f64 {
        self.problem.p()
    }

    pub fn len(&self) -> usize {
        self.ball().len()
    }

    pub fn is_masked(&self) -> bool {
        self.support.len() < self.len()
    }

    /// Zero every entry outside the support.
    pub fn project(&self, v: &mut [f64]) {
        if let Some(mask) = self.problem.support() {
            for (x, &keep) in v.iter_mut().zip(mask) {
                if !keep {
                    *x = 0.0;
                }
            }
        }
    }

    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        self.support.iter().map(|&i| v[i]).collect()
    }

    pub fn scatter(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (&i, x) in self.support.iter().zip(v) {
            out[i] = *x;
        }
        out
    }

    fn conv_power(&self, u: &[f64]) -> Vec<f64> {
        let p = self.p();
        let a: Vec<f64> = u.iter().map(|x| x.abs().powf(p)).collect();
        self.problem.kernel().apply(&a)
    }

    /// Value of the objective being maximized.
    pub fn value(&self, u: &[f64]) -> f64 {
        let p = self.p();
        let ka = self.conv_power(u);
        match self.objective {
            Objective::Choquard => ka.iter().zip(u).map(|(k, x)| k * x.abs().powf(p)).sum(),
            Objective::Equivalent { s } => ka.iter().map(|k| k.powf(s)).sum(),
        }
    }

    /// `cand` normalized, if its objective is at least `floor`.
    ///
    /// A candidate that falls short only by rounding is scaled up by a few
    /// ulps, which moves the constraint norm by less than `1e-13`.
    pub fn adopt(&self, cand: &[f64], floor: f64) -> Option<(Vec<f64>, f64)> {
        let u = self.normalize(cand)?;
        let q = self.value(&u);
        if q >= floor {
            return Some((u, q));
        }
        if !(q >= floor * (1.0 - 256.0 * f64::EPSILON * self.objective_degree())) {
            return None;
        }
        for k in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
            let lifted: Vec<f64> = u.iter().map(|x| x * (1.0 + k * f64::EPSILON)).collect();
            let ql = self.value(&lifted);
            if ql >= floor {
                return Some((lifted, ql));
            }
        }
        None
    }

    /// The reported best-constant estimate for an objective value.
    pub fn k_hat(&self, value: f64) -> f64 {
        match self.objective {
            Objective::Choquard => value,
            Objective::Equivalent { s } => value.powf(1.0 / s),
        }
    }

    /// Homogeneity degree of the objective.
    pub fn objective_degree(&self) -> f64 {
        match self.objective {
            Objective::Choquard => 2.0 * self.p(),
            Objective::Equivalent { s } => self.p() * s,
        }
    }

    /// Nonlinearity `w(u)` with `grad objective = degree * w(u)`.
    pub fn w(&self, u: &[f64]) -> Vec<f64> {
        let p = self.p();
        let ka = self.conv_power(u);
        let factor = match self.objective {
            Objective::Choquard => ka,
            Objective::Equivalent { s } => {
                let b: Vec<f64> = ka.iter().map(|k| k.powf(s - 1.0)).collect();
                self.problem.kernel().apply(&b)
            }
        };
        factor.iter().zip(u).map(|(f, x)| f * spow(*x, p - 1.0)).collect()
    }

    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let d = self.objective_degree();
        let mut g: Vec<f64> = self.w(u).into_iter().map(|v| d * v).collect();
        self.project(&mut g);
        g
    }

    pub fn constraint_exponent(&self) -> f64 {
        self.family().constraint_exponent(self.p())
    }

    /// Constraint energy; the constraint norm is its `constraint_exponent`-th root.
    pub fn constraint(&self, u: &[f64]) -> f64 {
        let b = self.ball();
        match self.family() {
            Family::FirstOrder => d1p_energy(b, u, 2.0),
            Family::PLaplace => d1p_energy(b, u, self.p()),
            Family::Biharmonic => d2p_energy(b, u, 2.0),
            Family::PBiharmonic => d2p_energy(b, u, self.p()),
        }
    }

    pub fn constraint_norm(&self, u: &[f64]) -> f64 {
        self.constraint(u).powf(1.0 / self.constraint_exponent())
    }

    /// `u / ‖u‖`, or `None` for a zero or non-finite norm.
    pub fn normalize(&self, u: &[f64]) -> Option<Vec<f64>> {
        let n = self.constraint_norm(u);
        (n.is_finite() && n > 0.0).then(|| u.iter().map(|x| x / n).collect())
    }

    /// The family operator `L(u)`.
    pub fn operator(&self, u: &[f64]) -> Vec<f64> {
        let b = self.ball();
        let p = self.p();
        match self.family() {
            Family::FirstOrder => laplacian_vec(b, u),
            Family::PLaplace => p_laplacian_vec(b, u, p),
            Family::Biharmonic => laplacian_vec(b, &laplacian_vec(b, u)).into_iter().map(|v| -v).collect(),
            Family::PBiharmonic => {
                let s: Vec<f64> = laplacian_vec(b, u).into_iter().map(|v| spow(v, p - 1.0)).collect();
                laplacian_vec(b, &s).into_iter().map(|v| -v).collect()
            }
        }
    }

    pub fn constraint_gradient(&self, u: &[f64]) -> Vec<f64> {
        let mut g = self.constraint_gradient_unprojected(u);
        self.project(&mut g);
        g
    }

    /// Gradient of the constraint energy, `-kappa L(u)`.
    pub fn constraint_gradient_unprojected(&self, u: &[f64]) -> Vec<f64> {
        let kappa = match self.family() {
            Family::FirstOrder => 4.0,
            Family::PLaplace => 2.0 * self.p(),
            Family::Biharmonic => 2.0,
            Family::PBiharmonic => self.p(),
        };
        self.operator(u).into_iter().map(|v| -kappa * v).collect()
    }

    /// Least-squares multiplier and residuals, measured on the support.
    pub fn stationarity(&self, u: &[f64]) -> Result<Stationarity> {
        let l = self.restrict(&self.operator(u));
        let w = self.restrict(&self.w(u));
        stationarity_of(&l, &w)
    }

    /// SPD metric used to precondition the ascent, restricted to the support.
    pub fn preconditioner(&self, u: &[f64]) -> Result<Cholesky> {
        let b = self.ball();
        let p = self.p();
        let full = match self.family() {
            Family::FirstOrder => dirichlet_matrix(b),
            Family::Biharmonic => sandwich(b, &vec![1.0; b.len()]),
            Family::PLaplace => {
                let edges = b.edges();
                let g: Vec<f64> = edges.iter().map(|&(i, j)| (u[j] - u[i]).abs()).collect();
                let gmax = g.iter().fold(0.0f64, |m, v| m.max(*v));
                let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let mut a = Mat::zeros(b.len(), b.len());
                for (&(i, j), gv) in edges.iter().zip(&g) {
                    let wt = gv.max(1e-12 * gmax).powf(p - 2.0);
                    a[(i, i)] += wt;
                    a[(j, j)] += wt;
                    a[(i, j)] -= wt;
                    a[(j, i)] -= wt;
                }
                for i in 0..b.len() {
                    let ext = b.exterior_count(i) as f64;
                    if ext > 0.0 {
                        a[(i, i)] += ext * u[i].abs().max(1e-12 * umax).powf(p - 2.0);
                    }
                }
                a
            }
            Family::PBiharmonic => {
                let lu = laplacian_vec(b, u);
                let m = lu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let d: Vec<f64> = lu.iter().map(|v| v.abs().max(1e-12 * m).powf(p - 2.0)).collect();
                sandwich(b, &d)
            }
        };
        let a = if self.is_masked() { full.select(&self.support) } else { full };
        Cholesky::new(a)
    }

    /// Jacobian of `L` at `v`, dense.
    pub fn operator_jacobian(&self, v: &[f64]) -> Mat {
        let b = self.ball();
        let p = self.p();
        match self.family() {
            Family::FirstOrder => {
                let mut a = dirichlet_matrix(b);
                a.as_mut_slice().iter_mut().for_each(|x| *x = -*x);
                a
            }
            Family::Biharmonic => {
                let mut a = sandwich(b, &vec![1.0; b.len()]);
                a.as_mut_slice().iter_mut().for_each(|x| *x = -*x);
                a
            }
            Family::PLaplace => {
                let edges = b.edges();
                let g: Vec<f64> = edges.iter().map(|&(i, j)| (v[j] - v[i]).abs()).collect();
                let mut a = Mat::zeros(b.len(), b.len());
                for (&(i, j), gv) in edges.iter().zip(&g) {
                    let wt = (p - 1.0) * gv.max(f64::MIN_POSITIVE).powf(p - 2.0);
                    a[(i, j)] += wt;
                    a[(j, i)] += wt;
                    a[(i, i)] -= wt;
                    a[(j, j)] -= wt;
                }
                for i in 0..b.len() {
                    let ext = b.exterior_count(i) as f64;
                    if ext > 0.0 {
                        a[(i, i)] -= ext * (p - 1.0) * v[i].abs().max(f64::MIN_POSITIVE).powf(p - 2.0);
                    }
                }
                a
            }
            Family::PBiharmonic => {
                let lu = laplacian_vec(b, v);
                let d: Vec<f64> = lu.iter().map(|x| -(p - 1.0) * x.abs().powf(p - 2.0)).collect();
                sandwich(b, &d)
            }
        }
    }

    /// Jacobian of `w` at `v`, dense.
    pub fn w_jacobian(&self, v: &[f64]) -> Mat {
        let p = self.p();
        let k = self.problem.kernel().matrix();
        let ka = self.conv_power(v);
        let left: Vec<f64> = v.iter().map(|x| spow(*x, p - 1.0)).collect();
        let right: Vec<f64> = v.iter().map(|x| p * spow(*x, p - 1.0)).collect();
        let (diag, mut cross) = match self.objective {
            Objective::Choquard => (ka, k.clone()),
            Objective::Equivalent { s } => {
                let b: Vec<f64> = ka.iter().map(|x| x.powf(s - 1.0)).collect();
                let mut kd = k.clone();
                kd.scale_cols(&ka.iter().map(|x| (s - 1.0) * x.powf(s - 2.0)).collect::<Vec<_>>());
                (self.problem.kernel().apply(&b), Mat::gemm(&kd, false, k, false))
            }
        };
        cross.scale_rows(&left);
        cross.scale_cols(&right);
        for i in 0..v.len() {
            cross[(i, i)] += diag[i] * (p - 1.0) * v[i].abs().powf(p - 2.0);
        }
        cross
    }
}

/// `Delta diag(d) Delta` for the Dirichlet Laplacian, assembled from its stencil.
pub(crate) fn sandwich(ball: &Ball, d: &[f64]) -> Mat {
    let n = ball.len();
    let deg = ball.degree() as f64;
    let mut a = Mat::zeros(n, n);
    let mut nz: Vec<(usize, f64)> = Vec::with_capacity(ball.degree() + 1);
    for (k, &dk) in d.iter().enumerate() {
        nz.clear();
        nz.push((k, -deg));
        for &j in ball.slots(k) {
            if j != EXTERIOR {
                nz.push((j as usize, 1.0));
            }
        }
        for &(i, x) in &nz {
            for &(j, y) in &nz {
                a[(i, j)] += x * dk * y;
            }
        }
    }
    a
}

pub(crate) fn stationarity_of(l: &[f64], w: &[f64]) -> Result<Stationarity> {
    let ww = dot(w, w);
    if !(ww > 0.0) || !ww.is_finite() {
        return Err(Error::Numerical("w(u) vanishes, the multiplier is undefined".into()));
    }
    let lambda = -dot(l, w) / ww;
    let r: Vec<f64> = l.iter().zip(w).map(|(a, b)| a + lambda * b).collect();
    let rn = norm2(&r);
    let wn = ww.sqrt();
    Ok(Stationarity {
        lambda,
        residual: rn / (lambda.abs() * wn),
        residual_literal: rn / wn,
    })
}
