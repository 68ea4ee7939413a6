use std::sync::Arc;

use choquard::calculus::{
    bilaplacian, d1p_energy, d2p_norm, laplacian, laplacian_vec, lp_norm_slice, norms, p_bilaplacian, p_laplacian,
    LatticeFunction,
};
use choquard::cayley::{Ball, GroupSpec};
use choquard::kernel::dirichlet_matrix;
use choquard::linalg::Mat;
use proptest::prelude::*;

fn z(n: usize, r: u32) -> Arc<Ball> {
    Ball::centered(GroupSpec::FreeAbelian(n), r).unwrap()
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() }
}

/// Values on the ball with the outer `margin` shells set to zero.
fn interior(ball: &Arc<Ball>, margin: u32, raw: &[f64]) -> LatticeFunction {
    let v = (0..ball.len())
        .map(|i| if ball.distance(i) + margin <= ball.radius() { raw[i % raw.len()] } else { 0.0 })
        .collect();
    LatticeFunction::new(Arc::clone(ball), v).unwrap()
}

#[test]
fn bilaplacian_matches_squared_matrix() {
    for spec in [GroupSpec::FreeAbelian(3), GroupSpec::Heisenberg3] {
        let ball = Ball::centered(spec, 3).unwrap();
        let a = dirichlet_matrix(&ball);
        let a2 = Mat::gemm(&a, false, &a, false);
        let u = LatticeFunction::from_fn(Arc::clone(&ball), |i, _| ((i * 7) % 5) as f64 - 2.0).unwrap();
        let got = bilaplacian(&u).value;
        for i in 0..ball.len() {
            let want: f64 = (0..ball.len()).map(|j| a2[(i, j)] * u.values()[j]).sum();
            assert!((got.values()[i] - want).abs() < 1e-12, "{spec} vertex {i}");
        }
    }
    let ball = z(3, 3);
    let d = LatticeFunction::delta(Arc::clone(&ball), &ball.group().identity()).unwrap();
    assert_eq!(bilaplacian(&d).value.values()[0], 42.0);
}

#[test]
fn second_order_norm_of_delta_in_five_dimensions() {
    let ball = z(5, 3);
    let mut u = vec![0.0; ball.len()];
    u[0] = 1.0;
    assert!((d2p_norm(&ball, &u, 2.0) - 110f64.sqrt()).abs() < 1e-12);
}

#[test]
fn zero_maps_to_zero() {
    let ball = z(3, 3);
    let u = LatticeFunction::zeros(Arc::clone(&ball));
    assert!(laplacian(&u).values().iter().all(|v| *v == 0.0));
    assert!(p_laplacian(&u, 1.5).unwrap().values().iter().all(|v| *v == 0.0));
    assert!(p_bilaplacian(&u, 1.5).unwrap().value.values().iter().all(|v| *v == 0.0));
    let r = norms(&u, &[2.0]).unwrap();
    assert_eq!((r.lp[0].1, r.d1p[0].1, r.d2p[0].1), (0.0, 0.0, 0.0));
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn p_two_operators_are_linear(raw in prop::collection::vec(-2.0f64..2.0, 1..40)) {
        let ball = Ball::centered(GroupSpec::Heisenberg3, 3).unwrap();
        let u = interior(&ball, 0, &raw);
        let l = laplacian(&u);
        let lp = p_laplacian(&u, 2.0).unwrap();
        let b = bilaplacian(&u).value;
        let bp = p_bilaplacian(&u, 2.0).unwrap().value;
        for i in 0..ball.len() {
            prop_assert!((l.values()[i] - lp.values()[i]).abs() <= 1e-13);
            prop_assert!((b.values()[i] - bp.values()[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn laplacian_sums_to_zero_with_margin(raw in prop::collection::vec(-2.0f64..2.0, 1..40)) {
        let ball = z(3, 5);
        let u = interior(&ball, 1, &raw);
        let s: f64 = laplacian(&u).values().iter().sum();
        prop_assert!(s.abs() <= 1e-12);
    }

    #[test]
    fn dirichlet_energy_is_twice_the_quadratic_form(raw in prop::collection::vec(-2.0f64..2.0, 1..40)) {
        // all edges meeting the ball, each counted in both directions
        let ball = z(3, 4);
        let u = interior(&ball, 0, &raw);
        let form: f64 = -u.values().iter().zip(laplacian_vec(&ball, u.values())).map(|(a, b)| a * b).sum::<f64>();
        let e = d1p_energy(&ball, u.values(), 2.0);
        prop_assert!((e - 2.0 * form).abs() <= 1e-12 * e.max(1.0));
    }

    #[test]
    fn norms_are_homogeneous(raw in prop::collection::vec(-2.0f64..2.0, 1..40), c in -3.0f64..3.0, p in 1.0f64..4.0) {
        let ball = z(2, 4);
        let u = interior(&ball, 0, &raw);
        let cu = u.scaled(c);
        let a = norms(&u, &[p]).unwrap();
        let b = norms(&cu, &[p]).unwrap();
        for (x, y) in [(a.lp[0].1, b.lp[0].1), (a.d1p[0].1, b.d1p[0].1), (a.d2p[0].1, b.d2p[0].1)] {
            prop_assert!((y - c.abs() * x).abs() <= 1e-12 * y.max(1.0));
        }
        prop_assert!((lp_norm_slice(u.values(), f64::INFINITY) * c.abs() - lp_norm_slice(cu.values(), f64::INFINITY)).abs() <= 1e-12);
    }

    #[test]
    fn p_laplacian_is_odd_and_homogeneous(raw in prop::collection::vec(-2.0f64..2.0, 1..40), c in 0.1f64..3.0, p in 1.1f64..4.0) {
        let ball = z(3, 3);
        let u = interior(&ball, 0, &raw);
        let a = p_laplacian(&u, p).unwrap();
        let b = p_laplacian(&u.scaled(-c), p).unwrap();
        let k = -c.powf(p - 1.0);
        for i in 0..ball.len() {
            prop_assert!((b.values()[i] - k * a.values()[i]).abs() <= 1e-11 * (1.0 + a.values()[i].abs() * c.powf(p - 1.0)));
        }
    }
}
