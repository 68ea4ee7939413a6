//! Difference operators and norms on a ball with zero Dirichlet exterior.
//!
//! Sums over "all of G" are evaluated exactly: exterior vertices carry the
//! value 0, so an edge leaving the ball is seen once from each endpoint.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cayley::{Ball, GroupElement, EXTERIOR};
use crate::error::{invalid, Error, Result};

/// Real function on a ball's vertices, zero outside.
#[derive(Clone, Debug)]
pub struct LatticeFunction {
    domain: Arc<Ball>,
    values: Vec<f64>,
}

impl PartialEq for LatticeFunction {
    fn eq(&self, other: &Self) -> bool {
        self.domain.same_as(&other.domain) && self.values == other.values
    }
}

impl LatticeFunction {
    pub fn new(domain: Arc<Ball>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DomainMismatch(format!(
                "{} values for a ball of {} vertices",
                values.len(),
                domain.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite value at vertex {}",
                domain.vertex(i)
            )));
        }
        Ok(LatticeFunction { domain, values })
    }

    pub fn zeros(domain: Arc<Ball>) -> Self {
        let n = domain.len();
        LatticeFunction { domain, values: vec![0.0; n] }
    }

    pub fn delta(domain: Arc<Ball>, at: &GroupElement) -> Result<Self> {
        let i = domain
            .index_of(at)
            .ok_or_else(|| Error::Invalid(format!("{at} is not in the ball")))?;
        let mut f = Self::zeros(domain);
        f.values[i] = 1.0;
        Ok(f)
    }

    pub fn from_fn(domain: Arc<Ball>, mut f: impl FnMut(usize, &GroupElement) -> f64) -> Result<Self> {
        let values = domain.vertices().iter().enumerate().map(|(i, x)| f(i, x)).collect();
        Self::new(domain, values)
    }

    pub fn domain(&self) -> &Ball {
        &self.domain
    }

    pub fn domain_arc(&self) -> &Arc<Ball> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same domain, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(Arc::clone(&self.domain), values)
    }

    pub fn value_at(&self, x: &GroupElement) -> f64 {
        self.domain.index_of(x).map_or(0.0, |i| self.values[i])
    }

    pub fn abs(&self) -> Self {
        LatticeFunction {
            domain: Arc::clone(&self.domain),
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        LatticeFunction {
            domain: Arc::clone(&self.domain),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn check_same_domain(&self, other: &LatticeFunction) -> Result<()> {
        if self.domain.same_as(&other.domain) {
            Ok(())
        } else {
            Err(Error::DomainMismatch("functions live on different balls".into()))
        }
    }

    /// Write `coords..., value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let rank = self.domain.spec().rank();
        let mut header: Vec<String> = (0..rank).map(|k| format!("x{k}")).collect();
        header.push("value".into());
        out.write_record(&header)?;
        for (x, v) in self.domain.vertices().iter().zip(&self.values) {
            let mut row: Vec<String> = x.coords().iter().map(|c| c.to_string()).collect();
            row.push(fmt17(*v));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Read rows written by [`write_csv`](Self::write_csv); unlisted vertices are zero.
    pub fn read_csv<R: Read>(domain: Arc<Ball>, r: R) -> Result<Self> {
        let rank = domain.spec().rank();
        let mut rdr = csv::Reader::from_reader(r);
        if rdr.headers()?.len() != rank + 1 {
            return invalid(format!("expected {} columns", rank + 1));
        }
        let mut values = vec![0.0; domain.len()];
        for rec in rdr.records() {
            let rec = rec?;
            let coords = (0..rank)
                .map(|k| rec[k].trim().parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Invalid(format!("bad coordinate: {e}")))?;
            let v: f64 = rec[rank]
                .trim()
                .parse()
                .map_err(|e| Error::Invalid(format!("bad value: {e}")))?;
            let x = GroupElement(coords);
            let i = domain
                .index_of(&x)
                .ok_or_else(|| Error::Invalid(format!("{x} is not in the ball")))?;
            values[i] = v;
        }
        Self::new(domain, values)
    }

    pub fn load_csv(domain: Arc<Ball>, path: &Path) -> Result<Self> {
        Self::read_csv(domain, std::fs::File::open(path)?)
    }
}

/// Fixed 17-significant-digit rendering used in every CSV artifact.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// `|x|^q sgn(x)`, with the value 0 at `x = 0` for every `q`.
#[inline]
pub fn spow(x: f64, q: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(q).copysign(x)
    }
}

/// `u(y) - u(x)` for `y` adjacent to vertex `x`; an exterior `y` reads 0.
pub fn gradient(u: &LatticeFunction, x: usize, y: &GroupElement) -> Result<f64> {
    let dom = u.domain();
    let g = dom.group();
    g.check_element(y)?;
    let xe = dom.vertex(x);
    let adjacent = g.generators().iter().any(|s| &g.multiply(xe, s) == y);
    if !adjacent {
        return invalid(format!("{y} is not adjacent to {xe}"));
    }
    Ok(u.value_at(y) - u.values[x])
}

/// `(sum_{y~x} |u(y)-u(x)|^p)^{1/p}`; exterior neighbors contribute `|u(x)|^p`.
pub fn grad_norm_p(u: &LatticeFunction, x: usize, p: f64) -> Result<f64> {
    if p < 1.0 {
        return invalid("grad_norm_p needs p >= 1");
    }
    Ok(grad_energy_at(u.domain(), &u.values, x, p).powf(1.0 / p))
}

pub(crate) fn grad_energy_at(ball: &Ball, u: &[f64], x: usize, p: f64) -> f64 {
    ball.slots(x)
        .iter()
        .map(|&j| {
            let uy = if j == EXTERIOR { 0.0 } else { u[j as usize] };
            (uy - u[x]).abs().powf(p)
        })
        .sum()
}

/// Dirichlet Laplacian on raw values.
pub fn laplacian_slice(ball: &Ball, u: &[f64], out: &mut [f64]) {
    let deg = ball.degree() as f64;
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = -deg * u[i];
        for &j in ball.slots(i) {
            if j != EXTERIOR {
                s += u[j as usize];
            }
        }
        *o = s;
    }
}

pub fn laplacian_vec(ball: &Ball, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    laplacian_slice(ball, u, &mut out);
    out
}

/// Dirichlet p-Laplacian on raw values.
pub fn p_laplacian_vec(ball: &Ball, u: &[f64], p: f64) -> Vec<f64> {
    (0..u.len())
        .map(|i| {
            ball.slots(i)
                .iter()
                .map(|&j| {
                    let uy = if j == EXTERIOR { 0.0 } else { u[j as usize] };
                    spow(uy - u[i], p - 1.0)
                })
                .sum()
        })
        .collect()
}

pub fn laplacian(u: &LatticeFunction) -> LatticeFunction {
    LatticeFunction {
        domain: Arc::clone(&u.domain),
        values: laplacian_vec(&u.domain, &u.values),
    }
}

pub fn p_laplacian(u: &LatticeFunction, p: f64) -> Result<LatticeFunction> {
    if !(p > 1.0) {
        return invalid(format!("p-Laplacian needs p > 1, got {p}"));
    }
    u.with_values(p_laplacian_vec(&u.domain, &u.values, p))
}

/// Distance from the support to the outside of the ball, in edges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub required: u32,
    /// `None` for the zero function.
    pub actual: Option<u32>,
}

impl Margin {
    pub fn ok(&self) -> bool {
        self.actual.is_none_or(|a| a >= self.required)
    }
}

pub fn support_margin(u: &LatticeFunction, required: u32) -> Margin {
    let dom = u.domain();
    let far = u
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| dom.distance(i))
        .max();
    Margin {
        required,
        actual: far.map(|d| dom.radius() - d),
    }
}

/// A value together with its boundary-margin diagnostic.
#[derive(Clone, Debug)]
pub struct Diagnosed<T> {
    pub value: T,
    pub margin: Margin,
}

pub fn bilaplacian(u: &LatticeFunction) -> Diagnosed<LatticeFunction> {
    let lu = laplacian_vec(&u.domain, &u.values);
    Diagnosed {
        value: LatticeFunction {
            domain: Arc::clone(&u.domain),
            values: laplacian_vec(&u.domain, &lu),
        },
        margin: support_margin(u, 2),
    }
}

pub fn p_bilaplacian_vec(ball: &Ball, u: &[f64], p: f64) -> Vec<f64> {
    let lu: Vec<f64> = laplacian_vec(ball, u).into_iter().map(|v| spow(v, p - 1.0)).collect();
    laplacian_vec(ball, &lu)
}

/// `Delta(|Delta u|^{p-2} Delta u)`.
pub fn p_bilaplacian(u: &LatticeFunction, p: f64) -> Result<Diagnosed<LatticeFunction>> {
    if !(p > 1.0) {
        return invalid(format!("p-bilaplacian needs p > 1, got {p}"));
    }
    Ok(Diagnosed {
        value: u.with_values(p_bilaplacian_vec(&u.domain, &u.values, p))?,
        margin: support_margin(u, 2),
    })
}

pub fn lp_norm_slice(u: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        u.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else {
        u.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `sum_x sum_{y~x} |u(y)-u(x)|^p` over all of G.
pub fn d1p_energy(ball: &Ball, u: &[f64], p: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        for &j in ball.slots(i) {
            s += if j == EXTERIOR {
                2.0 * u[i].abs().powf(p)
            } else {
                (u[j as usize] - u[i]).abs().powf(p)
            };
        }
    }
    s
}

pub fn d1p_norm(ball: &Ball, u: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        let mut m: f64 = 0.0;
        for i in 0..u.len() {
            for &j in ball.slots(i) {
                let uy = if j == EXTERIOR { 0.0 } else { u[j as usize] };
                m = m.max((uy - u[i]).abs());
            }
        }
        m
    } else {
        d1p_energy(ball, u, p).powf(1.0 / p)
    }
}

/// `sum_x |Delta u(x)|^p` over the ball.
pub fn d2p_energy(ball: &Ball, u: &[f64], p: f64) -> f64 {
    laplacian_vec(ball, u).iter().map(|v| v.abs().powf(p)).sum()
}

pub fn d2p_norm(ball: &Ball, u: &[f64], p: f64) -> f64 {
    lp_norm_slice(&laplacian_vec(ball, u), p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    /// `(exponent, value)` pairs; an infinite exponent is the sup norm.
    pub lp: Vec<(f64, f64)>,
    pub d1p: Vec<(f64, f64)>,
    pub d2p: Vec<(f64, f64)>,
}

pub fn norms(u: &LatticeFunction, exponents: &[f64]) -> Result<NormReport> {
    if let Some(p) = exponents.iter().find(|p| !(**p >= 1.0)) {
        return invalid(format!("norm exponent {p} is below 1"));
    }
    let dom = u.domain();
    Ok(NormReport {
        lp: exponents.iter().map(|&p| (p, lp_norm_slice(&u.values, p))).collect(),
        d1p: exponents.iter().map(|&p| (p, d1p_norm(dom, &u.values, p))).collect(),
        d2p: exponents.iter().map(|&p| (p, d2p_norm(dom, &u.values, p))).collect(),
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
