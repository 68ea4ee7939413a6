//! `R_alpha` on the whole lattice `Z^N`, by subordination of the exact heat kernel.
//!
//! The heat kernel of `Delta` on `Z^N` factorizes:
//! `k_t(0, x) = prod_i e^{-2t} I_{|x_i|}(2t)`. Then
//! `R_alpha(x) = (1/Gamma(alpha/2)) int_0^inf t^{alpha/2-1} k_t(0, x) dt`,
//! integrated in `s = ln t` up to a large time `T`, beyond which the
//! Gaussian tail `(4 pi t)^{-N/2}` is integrated in closed form.

use crate::error::{invalid, Result};
use crate::linalg::gauss_legendre;

use super::gamma;

/// `e^{-x} I_n(x)` for `n = 0..=n_max`.
pub fn scaled_bessel_i(n_max: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0);
    if x == 0.0 {
        let mut v = vec![0.0; n_max + 1];
        v[0] = 1.0;
        return v;
    }
    let nm = (n_max + 1) as f64;
    if x >= (40.0 * nm * nm).max(400.0) {
        return (0..=n_max).map(|n| large_argument(n, x)).collect();
    }
    miller(n_max, x)
}

fn miller(n_max: usize, x: f64) -> Vec<f64> {
    // Miller backward recurrence I_{k-1} = I_{k+1} + (2k/x) I_k, normalized by
    // e^{-x}(I_0 + 2 sum_k I_k) = 1.
    let start = n_max + 30 + (x.min(12.0 * x.sqrt())).ceil() as usize;
    let mut out = vec![0.0; n_max + 1];
    let (mut hi, mut cur) = (0.0f64, 1e-300f64);
    let mut sum = 0.0;
    for k in (1..=start).rev() {
        let lo = hi + (2.0 * k as f64 / x) * cur;
        hi = cur;
        cur = lo;
        if k - 1 <= n_max {
            out[k - 1] = cur;
        }
        if k - 1 >= 1 {
            sum += 2.0 * cur;
        }
        if cur > 1e250 {
            let s = 1e-250;
            cur *= s;
            hi *= s;
            sum *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    sum += cur;
    for v in out.iter_mut() {
        *v /= sum;
    }
    out
}

/// Hankel expansion `e^{-x} I_n(x) ~ (2 pi x)^{-1/2} sum_k (-1)^k a_k(n) / x^k`.
fn large_argument(n: usize, x: f64) -> f64 {
    let mu = 4.0 * (n as f64).powi(2);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let j = (2 * k - 1) as f64;
        let next = -term * (mu - j * j) / (k as f64 * 8.0 * x);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// Whole-lattice `R_alpha(0, x)` for each point in `points`.
pub fn lattice_riesz(n: usize, alpha: f64, points: &[Vec<i64>]) -> Result<Vec<f64>> {
    if n == 0 || !(alpha > 0.0 && alpha < n as f64) {
        return invalid(format!("whole-lattice kernel needs 0 < alpha < N = {n}"));
    }
    if points.iter().any(|p| p.len() != n) {
        return invalid("point dimension differs from N");
    }
    let h = 0.5 * alpha;
    let n_max = points
        .iter()
        .flat_map(|p| p.iter().map(|c| c.unsigned_abs() as usize))
        .max()
        .unwrap_or(0);
    let s_lo = (1e-18 * h).ln() / h;
    let s_hi = 18.0f64;
    let panels = ((s_hi - s_lo) / 0.5).ceil() as usize;
    let width = (s_hi - s_lo) / panels as f64;
    let mut acc = vec![0.0; points.len()];
    for p in 0..panels {
        let a = s_lo + p as f64 * width;
        for (s, w) in gauss_legendre(24, a, a + width) {
            let t = s.exp();
            let b = scaled_bessel_i(n_max, 2.0 * t);
            let weight = w * (h * s).exp();
            for (v, pt) in acc.iter_mut().zip(points) {
                let prod: f64 = pt.iter().map(|c| b[c.unsigned_abs() as usize]).product();
                *v += weight * prod;
            }
        }
    }
    let big_t = s_hi.exp();
    let nf = n as f64;
    let tail = (4.0 * std::f64::consts::PI).powf(-0.5 * nf) * big_t.powf(0.5 * (alpha - nf)) / (0.5 * (nf - alpha));
    let g = gamma(h);
    Ok(acc.into_iter().map(|v| (v + tail) / g).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_normalization_and_values() {
        for x in [0.1, 1.0, 7.5, 80.0, 3000.0, 1e6] {
            let b = scaled_bessel_i(3, x);
            // e^{-1} I_0(1) and e^{-1} I_1(1)
            if x == 1.0 {
                assert!((b[0] - 0.465_759_607_593_640_6).abs() < 1e-15);
                assert!((b[1] - 0.207_910_415_349_708_4).abs() < 1e-15);
            }
            for w in b.windows(2) {
                assert!(w[0] > w[1]);
            }
        }
    }

    #[test]
    fn branches_agree_at_switch() {
        // e^{-400} I_n(400), n = 0, 1, 2
        let want = [0.019_953_356_281_939_99, 0.019_928_398_958_903_543, 0.019_853_714_287_145_47];
        let m = miller(2, 400.0);
        for n in 0..=2 {
            let a = large_argument(n, 400.0);
            assert!((m[n] - want[n]).abs() < 1e-13 * want[n], "order {n}");
            assert!((a - want[n]).abs() < 1e-13 * want[n], "order {n}");
        }
    }

    #[test]
    fn watson_constant() {
        let g = lattice_riesz(3, 2.0, &[vec![0, 0, 0]]).unwrap()[0];
        assert!((g - 0.252_731_009_858_564_1).abs() < 1e-9, "{g}");
    }
}
