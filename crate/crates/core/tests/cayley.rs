use std::collections::HashSet;
use std::sync::Arc;

use choquard::calculus::LatticeFunction;
use choquard::cayley::{
    growth_function, translate, word_distance, Ball, BallExport, Group, GroupElement, GroupSpec, WordDistance, EXTERIOR,
};
use proptest::prelude::*;

fn el(c: &[i64]) -> GroupElement {
    GroupElement(c.to_vec())
}

/// Independent Heisenberg law on `(x, y, z)`: `z' = z1 + z2 + x1 y2`.
fn h3_mul(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2] + a[0] * b[1]]
}

/// Elements reached by words of length at most `n` in `a, b` and inverses.
fn h3_words(n: usize) -> HashSet<[i64; 3]> {
    let gens = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]];
    let mut seen = HashSet::from([[0, 0, 0]]);
    let mut layer = vec![[0, 0, 0]];
    for _ in 0..n {
        let mut next = Vec::new();
        for w in &layer {
            for g in gens {
                next.push(h3_mul(*w, g));
            }
        }
        seen.extend(next.iter().copied());
        layer = next;
    }
    seen
}

/// `|{x in Z^n : |x|_1 <= r}| = sum_k 2^k C(n, k) C(r, k)`.
fn l1_ball_size(n: u64, r: u64) -> u64 {
    let c = |a: u64, b: u64| -> u64 {
        if b > a {
            return 0;
        }
        (0..b).fold(1u64, |acc, i| acc * (a - i) / (i + 1))
    };
    (0..=n.min(r)).map(|k| (1 << k) * c(n, k) * c(r, k)).sum()
}

#[test]
fn heisenberg_ball_matches_word_enumeration() {
    let h = Group::new(GroupSpec::Heisenberg3).unwrap();
    for r in 0..=4u32 {
        let ball = Ball::new(&h, h.identity(), r).unwrap();
        let got: HashSet<[i64; 3]> = ball.vertices().iter().map(|x| [x.0[0], x.0[1], x.0[2]]).collect();
        assert_eq!(got, h3_words(r as usize), "radius {r}");
    }
    assert_eq!(growth_function(&h, 2).unwrap(), vec![1, 5, 17]);
}

#[test]
fn word_distances() {
    let z2 = Group::new(GroupSpec::FreeAbelian(2)).unwrap();
    assert_eq!(word_distance(&z2, &el(&[0, 0]), &el(&[2, 3]), 10).unwrap(), WordDistance::Finite(5));
    let h = Group::new(GroupSpec::Heisenberg3).unwrap();
    assert_eq!(word_distance(&h, &h.identity(), &el(&[0, 0, 1]), 10).unwrap(), WordDistance::Finite(4));
    assert_eq!(word_distance(&h, &el(&[2, -1, 5]), &el(&[2, -1, 5]), 0).unwrap(), WordDistance::Finite(0));
    assert_eq!(word_distance(&h, &h.identity(), &el(&[0, 0, 1]), 3).unwrap(), WordDistance::Unreachable(3));
}

#[test]
fn growth_of_free_abelian_groups() {
    let z3 = Group::new(GroupSpec::FreeAbelian(3)).unwrap();
    assert_eq!(growth_function(&z3, 1).unwrap(), vec![1, 7]);
    for n in 1..=4u64 {
        let g = Group::new(GroupSpec::FreeAbelian(n as usize)).unwrap();
        let beta = growth_function(&g, 8).unwrap();
        for (r, b) in beta.iter().enumerate() {
            assert_eq!(*b as u64, l1_ball_size(n, r as u64), "Z^{n} radius {r}");
        }
    }
}

#[test]
fn heisenberg_growth_degree_is_four() {
    let h = Group::new(GroupSpec::Heisenberg3).unwrap();
    let beta = growth_function(&h, 20).unwrap();
    let pts: Vec<(f64, f64)> = (8..=20).map(|n| ((n as f64).ln(), (beta[n] as f64).ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 4.0).abs() <= 0.3, "slope {slope}");
}

#[test]
fn ball_structure() {
    for spec in [GroupSpec::FreeAbelian(3), GroupSpec::Heisenberg3] {
        let ball = Ball::centered(spec, 4).unwrap();
        let degree = match spec {
            GroupSpec::FreeAbelian(n) => 2 * n,
            GroupSpec::Heisenberg3 => 4,
        };
        assert_eq!(ball.center(), &ball.group().identity());
        assert_eq!(ball.len(), *growth_function(ball.group(), 4).unwrap().last().unwrap());
        for i in 0..ball.len() {
            assert!(ball.distance(i) <= 4);
            assert_eq!(ball.slots(i).len(), degree);
            for j in ball.interior_neighbors(i) {
                assert!(ball.interior_neighbors(j).any(|k| k == i));
            }
            let exterior = ball.slots(i).iter().filter(|&&s| s == EXTERIOR).count();
            assert_eq!(exterior, ball.exterior_count(i));
            assert_eq!(exterior > 0, ball.boundary().contains(&i));
        }
    }
}

#[test]
fn off_center_balls_have_the_same_size() {
    let h = Group::new(GroupSpec::Heisenberg3).unwrap();
    let a = Ball::new(&h, h.identity(), 3).unwrap();
    let b = Ball::new(&h, el(&[5, -2, 7]), 3).unwrap();
    assert_eq!(a.len(), b.len());
}

#[test]
fn export_round_trips() {
    let ball = Ball::centered(GroupSpec::Heisenberg3, 2).unwrap();
    let text = serde_json::to_string(&ball.to_export()).unwrap();
    let back: BallExport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, ball.to_export());
    assert_eq!(back.vertices.len(), 17);
    assert_eq!(ball.checksum(), Ball::centered(GroupSpec::Heisenberg3, 2).unwrap().checksum());
}

#[test]
fn translation_examples() {
    let ball = Ball::centered(GroupSpec::Heisenberg3, 4).unwrap();
    let g = el(&[1, 1, 0]);
    let h = ball.group();
    let delta = LatticeFunction::delta(Arc::clone(&ball), &h.identity()).unwrap();
    let moved = translate(&delta, &g).unwrap();
    assert_eq!(moved.function.values(), LatticeFunction::delta(Arc::clone(&ball), &h.invert(&g)).unwrap().values());
    assert_eq!(moved.dropped_fraction, 0.0);
    let same = translate(&delta, &h.identity()).unwrap();
    assert_eq!(same.function.values(), delta.values());
}

fn element(spec: GroupSpec) -> impl Strategy<Value = GroupElement> {
    prop::collection::vec(-6i64..=6, spec.rank()).prop_map(GroupElement)
}

fn any_spec() -> impl Strategy<Value = GroupSpec> {
    prop_oneof![(1usize..=4).prop_map(GroupSpec::FreeAbelian), Just(GroupSpec::Heisenberg3)]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn group_axioms((spec, a, b, c) in any_spec().prop_flat_map(|s| (Just(s), element(s), element(s), element(s)))) {
        let g = Group::new(spec).unwrap();
        prop_assert_eq!(g.multiply(&g.multiply(&a, &b), &c), g.multiply(&a, &g.multiply(&b, &c)));
        prop_assert_eq!(g.multiply(&a, &g.invert(&a)), g.identity());
        prop_assert_eq!(g.multiply(&g.identity(), &a), a.clone());
    }

    #[test]
    fn word_distance_is_l1_on_free_abelian(x in prop::collection::vec(-4i64..=4, 3), y in prop::collection::vec(-4i64..=4, 3)) {
        let g = Group::new(GroupSpec::FreeAbelian(3)).unwrap();
        let d: i64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
        prop_assert_eq!(word_distance(&g, &GroupElement(x), &GroupElement(y), 30).unwrap(), WordDistance::Finite(d as u32));
    }

    #[test]
    fn word_distance_is_left_invariant(
        g in prop::collection::vec(-3i64..=3, 3),
        x in prop::collection::vec(-2i64..=2, 3),
        y in prop::collection::vec(-2i64..=2, 3),
    ) {
        let h = Group::new(GroupSpec::Heisenberg3).unwrap();
        let (g, x, y) = (GroupElement(g), GroupElement(x), GroupElement(y));
        let d = word_distance(&h, &x, &y, 14).unwrap();
        let moved = word_distance(&h, &h.multiply(&g, &x), &h.multiply(&g, &y), 14).unwrap();
        prop_assert_eq!(d, moved);
    }

    #[test]
    fn interior_translation_preserves_l2(values in prop::collection::vec(-1.0f64..1.0, 25), g in prop::collection::vec(-2i64..=2, 2)) {
        // support in the radius-3 ball, translated by at most 4, inside radius 8
        let ball = Ball::centered(GroupSpec::FreeAbelian(2), 8).unwrap();
        let mut u = vec![0.0; ball.len()];
        u[..25].copy_from_slice(&values);
        let u = LatticeFunction::new(Arc::clone(&ball), u).unwrap();
        let t = translate(&u, &GroupElement(g)).unwrap();
        let n2 = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
        prop_assert!(t.dropped_fraction <= 1e-14);
        prop_assert!((n2(t.function.values()) - n2(u.values())).abs() <= 1e-12 * n2(u.values()).max(1e-300));
    }
}
