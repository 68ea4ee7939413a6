//! Heat kernel, fractional Laplacian and the Green's kernel `R_alpha` of the
//! Dirichlet Laplacian on a ball.
//!
//! Dense kernels come from a full eigen-decomposition of `-Delta`. Columns on
//! balls too large for that are available through [`krylov`], and the
//! whole-lattice kernel of `Z^N` through [`lattice`].

pub mod cache;
pub mod krylov;
pub mod lattice;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calculus::LatticeFunction;
use crate::cayley::{Ball, GroupSpec, EXTERIOR};
use crate::error::{invalid, Error, Result};
use crate::linalg::{gauss_legendre, sym_eig, Mat};

/// Largest ball handed to the dense eigensolver by default.
pub const DEFAULT_DENSE_CAP: usize = 20_000;

/// Dense `-Delta` with zero Dirichlet exterior.
pub fn dirichlet_matrix(ball: &Ball) -> Mat {
    let n = ball.len();
    let mut a = Mat::zeros(n, n);
    let deg = ball.degree() as f64;
    for i in 0..n {
        a[(i, i)] = deg;
        for &j in ball.slots(i) {
            if j != EXTERIOR {
                a[(i, j as usize)] -= 1.0;
            }
        }
    }
    a
}

/// `y = -Delta x` on the ball.
pub fn neg_laplacian_apply(ball: &Ball, x: &[f64], y: &mut [f64]) {
    crate::calculus::laplacian_slice(ball, x, y);
    for v in y.iter_mut() {
        *v = -*v;
    }
}

/// Eigenpairs of the Dirichlet operator `-Delta` on a ball.
#[derive(Clone, Debug)]
pub struct SpectralData {
    domain: Arc<Ball>,
    eigenvalues: Vec<f64>,
    eigenvectors: Mat,
}

pub fn spectral_decompose(domain: &Arc<Ball>) -> Result<SpectralData> {
    spectral_decompose_with_cap(domain, DEFAULT_DENSE_CAP)
}

pub fn spectral_decompose_with_cap(domain: &Arc<Ball>, cap: usize) -> Result<SpectralData> {
    if domain.len() > cap {
        return Err(Error::Cap {
            what: "dense eigensolver vertices",
            needed: domain.len(),
            cap,
        });
    }
    let (eigenvalues, eigenvectors) = sym_eig(dirichlet_matrix(domain))?;
    if let Some(l) = eigenvalues.first() {
        if !(*l > 0.0) {
            return Err(Error::Numerical(format!("smallest Dirichlet eigenvalue {l:e} is not positive")));
        }
    }
    Ok(SpectralData {
        domain: Arc::clone(domain),
        eigenvalues,
        eigenvectors,
    })
}

impl SpectralData {
    pub fn domain(&self) -> &Arc<Ball> {
        &self.domain
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Mat {
        &self.eigenvectors
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// `max |V^T V - I|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let g = Mat::gemm(&self.eigenvectors, true, &self.eigenvectors, false);
        g.max_abs_diff(&Mat::identity(g.rows()))
    }

    /// `max |(-Delta) - V diag(lambda) V^T|`.
    pub fn reconstruction_error(&self) -> f64 {
        Mat::spectral_product(&self.eigenvectors, &self.eigenvalues).max_abs_diff(&dirichlet_matrix(&self.domain))
    }

    /// `V diag(f(lambda)) V^T x`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64, x: &[f64]) -> Vec<f64> {
        let mut c = self.eigenvectors.matvec_t(x);
        for (ci, &l) in c.iter_mut().zip(&self.eigenvalues) {
            *ci *= f(l);
        }
        self.eigenvectors.matvec(&c)
    }

    /// `V diag(f(lambda)) V^T` as a dense matrix.
    pub fn matrix_fn(&self, f: impl Fn(f64) -> f64) -> Mat {
        let w: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        Mat::spectral_product(&self.eigenvectors, &w)
    }

    /// `(-Delta)^{-1} x`.
    pub fn solve(&self, x: &[f64]) -> Vec<f64> {
        self.apply_fn(|l| 1.0 / l, x)
    }
}

/// `k_t = exp(t Delta) = V diag(exp(-lambda t)) V^T`.
pub fn heat_kernel(spec: &SpectralData, t: f64) -> Result<Mat> {
    if !(t > 0.0) {
        return invalid(format!("heat kernel time must be positive, got {t}"));
    }
    Ok(spec.matrix_fn(|l| (-l * t).exp()))
}

/// Parameters of the log-time Gauss-Legendre rule for the subordination integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes_per_piece: usize,
    pub split: f64,
    pub tail_eps: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            nodes_per_piece: 200,
            split: 1.0,
            tail_eps: 1e-16,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelMethod {
    Spectral,
    Subordination(QuadratureSpec),
}

impl KernelMethod {
    pub fn label(&self) -> &'static str {
        match self {
            KernelMethod::Spectral => "spectral",
            KernelMethod::Subordination(_) => "subordination",
        }
    }
}

/// `Gamma(x)` (Lanczos approximation).
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Quadrature of `lambda^{-alpha/2} = (1/Gamma(alpha/2)) int_0^inf e^{-lambda t} t^{alpha/2-1} dt`.
///
/// With `t = e^s` the integrand becomes `e^{-lambda e^s} e^{s alpha/2}`. The
/// range is split at `s = ln(split)`; the lower end is cut where the
/// remaining mass `(2/alpha) e^{s alpha/2}` drops below `tail_eps`, the upper
/// end where `e^{-lambda_min t} t^{alpha/2-1}` does.
#[derive(Clone, Debug)]
pub struct SubordinationRule {
    nodes: Vec<(f64, f64)>,
}

impl SubordinationRule {
    pub fn new(alpha: f64, lambda_min: f64, spec: QuadratureSpec) -> Result<Self> {
        if !(alpha > 0.0) || !(lambda_min > 0.0) {
            return invalid("subordination needs alpha > 0 and a positive spectrum");
        }
        let h = 0.5 * alpha;
        let s_mid = spec.split.ln();
        let s_lo = (spec.tail_eps * h).ln() / h;
        let tail = |t: f64| -lambda_min * t + (h - 1.0) * t.ln() - spec.tail_eps.ln();
        let mut t_hi = spec.split.max(1.0 / lambda_min);
        while tail(t_hi) > 0.0 {
            t_hi *= 2.0;
        }
        let mut lo = t_hi / 2.0;
        while t_hi - lo > 1e-9 * t_hi {
            let m = 0.5 * (lo + t_hi);
            if tail(m) > 0.0 {
                lo = m;
            } else {
                t_hi = m;
            }
        }
        let s_hi = t_hi.ln().max(s_mid);
        let g = gamma(h);
        let mut nodes = Vec::with_capacity(2 * spec.nodes_per_piece);
        for (a, b) in [(s_lo.min(s_mid), s_mid), (s_mid, s_hi)] {
            for (s, w) in gauss_legendre(spec.nodes_per_piece, a, b) {
                nodes.push((s.exp(), w * (h * s).exp() / g));
            }
        }
        Ok(SubordinationRule { nodes })
    }

    /// Approximation of `lambda^{-alpha/2}`.
    pub fn weight(&self, lambda: f64) -> f64 {
        self.nodes.iter().map(|&(t, w)| w * (-lambda * t).exp()).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub group: GroupSpec,
    pub radius: u32,
    pub alpha: f64,
    pub method: KernelMethod,
    pub vertices: usize,
    pub checksum: String,
}

/// Dense symmetric `R_alpha(x, y)` on a ball.
#[derive(Clone, Debug)]
pub struct RieszKernel {
    domain: Arc<Ball>,
    matrix: Mat,
    meta: KernelMeta,
}

fn check_alpha(domain: &Ball, alpha: f64) -> Result<()> {
    let n = domain.spec().homogeneous_dimension() as f64;
    if !(alpha > 0.0 && alpha < n) {
        return invalid(format!("alpha = {alpha} must lie in (0, {n})"));
    }
    Ok(())
}

pub fn riesz_kernel(spec: &SpectralData, alpha: f64) -> Result<RieszKernel> {
    riesz_kernel_with(spec, alpha, KernelMethod::Spectral)
}

pub fn riesz_kernel_with(spec: &SpectralData, alpha: f64, method: KernelMethod) -> Result<RieszKernel> {
    check_alpha(&spec.domain, alpha)?;
    let matrix = match method {
        KernelMethod::Spectral => spec.matrix_fn(|l| l.powf(-0.5 * alpha)),
        KernelMethod::Subordination(q) => {
            let rule = SubordinationRule::new(alpha, spec.lambda_min(), q)?;
            spec.matrix_fn(|l| rule.weight(l))
        }
    };
    Ok(RieszKernel::from_parts(Arc::clone(&spec.domain), matrix, alpha, method))
}

impl RieszKernel {
    pub(crate) fn from_parts(domain: Arc<Ball>, matrix: Mat, alpha: f64, method: KernelMethod) -> Self {
        let meta = KernelMeta {
            group: domain.spec(),
            radius: domain.radius(),
            alpha,
            method,
            vertices: domain.len(),
            checksum: domain.checksum(),
        };
        RieszKernel { domain, matrix, meta }
    }

    pub fn alpha(&self) -> f64 {
        self.meta.alpha
    }

    pub fn domain(&self) -> &Arc<Ball> {
        &self.domain
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn meta(&self) -> &KernelMeta {
        &self.meta
    }

    pub fn method(&self) -> KernelMethod {
        self.meta.method
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// `sum_y R(x, y) f(y)`, diagonal included.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.matrix.matvec(f)
    }

    /// `sum_{y != x} R(x, y) f(y)`.
    pub fn apply_off_diagonal(&self, f: &[f64]) -> Vec<f64> {
        let mut out = self.matrix.matvec(f);
        for (i, o) in out.iter_mut().enumerate() {
            *o -= self.matrix[(i, i)] * f[i];
        }
        out
    }

    /// `max |R - R^T| / max |R|`.
    pub fn symmetry_defect(&self) -> f64 {
        self.matrix.max_abs_diff(&self.matrix.transpose()) / self.matrix.max_abs()
    }
}

/// `(-Delta)^{alpha/2} u` by functional calculus.
pub fn fractional_laplacian_apply(spec: &SpectralData, alpha: f64, u: &LatticeFunction) -> Result<LatticeFunction> {
    if !u.domain().same_as(&spec.domain) {
        return Err(Error::DomainMismatch("function and spectral data differ".into()));
    }
    check_alpha(&spec.domain, alpha)?;
    u.with_values(spec.apply_fn(|l| l.powf(0.5 * alpha), u.values()))
}

/// `(R_alpha * f)(x) = sum_y R_alpha(x, y) f(y)`, diagonal included.
pub fn convolve(kernel: &RieszKernel, f: &LatticeFunction) -> Result<LatticeFunction> {
    if !f.domain().same_as(&kernel.domain) {
        return Err(Error::DomainMismatch("function and kernel differ".into()));
    }
    f.with_values(kernel.apply(f.values()))
}

/// Least-squares fit of `log R` against `log d` on shell means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// 95% band on the slope.
    pub band: (f64, f64),
    pub shells: Vec<(u32, f64)>,
}

pub fn asymptotic_exponent(kernel: &RieszKernel) -> Result<ExponentFit> {
    let dom = &kernel.domain;
    if dom.center() != &dom.group().identity() {
        return invalid("asymptotic fit needs a ball centered at the identity");
    }
    fit_profile(dom.distances(), kernel.matrix.col(0), dom.radius())
}

/// Slope of shell-mean `log value` against `log d` over `d in [3, radius/2]`.
pub fn fit_profile(dist: &[u32], values: &[f64], radius: u32) -> Result<ExponentFit> {
    let hi = radius / 2;
    let mut sums = vec![(0.0, 0usize); hi as usize + 1];
    for (&d, &v) in dist.iter().zip(values) {
        if (3..=hi).contains(&d) {
            sums[d as usize].0 += v;
            sums[d as usize].1 += 1;
        }
    }
    let shells: Vec<(u32, f64)> = (3..=hi)
        .filter(|&d| sums[d as usize].1 > 0)
        .map(|d| (d, sums[d as usize].0 / sums[d as usize].1 as f64))
        .collect();
    if shells.len() < 3 {
        return invalid(format!("only {} shells in [3, {hi}]; use a larger radius", shells.len()));
    }
    if let Some((d, m)) = shells.iter().find(|(_, m)| !(*m > 0.0)) {
        return Err(Error::Numerical(format!("shell {d} has non-positive mean {m:e}")));
    }
    let xs: Vec<f64> = shells.iter().map(|(d, _)| (*d as f64).ln()).collect();
    let ys: Vec<f64> = shells.iter().map(|(_, m)| m.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(ExponentFit {
        slope,
        intercept,
        stderr,
        band: (slope - 1.96 * stderr, slope + 1.96 * stderr),
        shells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cayley::{Ball, GroupSpec};

    #[test]
    fn path_spectrum() {
        let b = Ball::centered(GroupSpec::FreeAbelian(1), 1).unwrap();
        let s = spectral_decompose(&b).unwrap();
        let r = 2f64.sqrt();
        for (got, want) in s.eigenvalues().iter().zip([2.0 - r, 2.0, 2.0 + r]) {
            assert!((got - want).abs() < 1e-14);
        }
        assert!(s.orthonormality_residual() < 1e-14);
        assert!(s.reconstruction_error() < 1e-13);
    }

    #[test]
    fn dense_cap_refuses() {
        let b = Ball::centered(GroupSpec::FreeAbelian(3), 4).unwrap();
        assert!(matches!(spectral_decompose_with_cap(&b, 10), Err(Error::Cap { .. })));
    }

    #[test]
    fn subordination_rule_reproduces_powers() {
        for alpha in [0.5, 1.0, 1.5, 2.0] {
            let rule = SubordinationRule::new(alpha, 0.05, QuadratureSpec::default()).unwrap();
            for l in [0.05, 0.3, 1.0, 4.0, 11.9] {
                let want = f64::powf(l, -0.5 * alpha);
                assert!((rule.weight(l) - want).abs() < 1e-9 * want, "alpha {alpha} lambda {l}");
            }
        }
    }

    #[test]
    fn gamma_values() {
        assert!((gamma(0.5) - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!((gamma(1.0) - 1.0).abs() < 1e-14);
        assert!((gamma(0.25) - 3.625_609_908_221_908).abs() < 1e-12);
    }

    #[test]
    fn alpha_range_checked() {
        let b = Ball::centered(GroupSpec::FreeAbelian(3), 2).unwrap();
        let s = spectral_decompose(&b).unwrap();
        assert!(riesz_kernel(&s, 0.0).is_err());
        assert!(riesz_kernel(&s, 3.0).is_err());
        assert!(riesz_kernel(&s, 2.9).is_ok());
    }
}
