use finsler_torus::actiongraph::{ActionGraph, CRITICAL_MARGIN};
use finsler_torus::geom;
use finsler_torus::MetricModel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn flat32() -> &'static ActionGraph {
    static G: OnceLock<ActionGraph> = OnceLock::new();
    G.get_or_init(|| ActionGraph::build(&MetricModel::flat(), 32, 3).unwrap())
}

fn randers16() -> &'static ActionGraph {
    static G: OnceLock<ActionGraph> = OnceLock::new();
    G.get_or_init(|| ActionGraph::build(&MetricModel::randers([0.5, 0.0]).unwrap(), 16, 3).unwrap())
}

fn bump16() -> &'static ActionGraph {
    static G: OnceLock<ActionGraph> = OnceLock::new();
    G.get_or_init(|| ActionGraph::build(&MetricModel::bump(), 16, 3).unwrap())
}

#[test]
fn flat_closed_forms_at_32() {
    let g = flat32();
    assert!((g.critical_alpha([1.0, 0.0]) - 0.5).abs() < 2e-3);
    assert!((g.stable_norm([3, 4], 1) - 5.0).abs() < 5e-2);
    assert!((g.stable_norm([1, 1], 1) - 2f64.sqrt()).abs() < 2e-2);
}

#[test]
fn stable_norm_doubles() {
    for g in [flat32(), randers16(), bump16()] {
        for z in [[1, 0], [1, 1], [2, 1]] {
            let a = g.stable_norm(z, 1);
            let b = g.stable_norm([2 * z[0], 2 * z[1]], 1);
            assert!((b - 2.0 * a).abs() <= 1e-6 * b, "{} {z:?}: {a} {b}", g.metric().name());
        }
    }
}

#[test]
fn alpha_homogeneity_on_three_metrics() {
    for g in [flat32(), randers16(), bump16()] {
        for eta in [[1.0, 0.0], [0.3, -0.7]] {
            let a = g.critical_alpha(eta);
            for s in [0.5, 2.0, 3.0] {
                let b = g.critical_alpha(geom::scale(s, eta));
                assert!((b - s * s * a).abs() <= 1e-5 * b, "{} s={s}: {a} {b}", g.metric().name());
            }
        }
    }
}

#[test]
fn randers_asymmetry_bounded_by_cf_squared() {
    let g = randers16();
    let cf = g.metric().estimate_cf(64).unwrap().c_f;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut saw_asym = false;
    for _ in 0..100 {
        let x = rng.gen_range(0..g.num_nodes());
        let y = loop {
            let y = rng.gen_range(0..g.num_nodes());
            if y != x {
                break y;
            }
        };
        let dxy = g.mane_potential([0.0, 0.0], 0.5, x).unwrap()[y];
        let dyx = g.mane_potential([0.0, 0.0], 0.5, y).unwrap()[x];
        assert!(dxy <= cf * cf * dyx + 1e-12);
        saw_asym |= (dxy - dyx).abs() > 1e-3;
    }
    assert!(saw_asym);
}

#[test]
fn triangle_inequality_for_potentials() {
    let g = bump16();
    let eta = [0.4, 0.1];
    let k = g.critical_alpha(eta) + 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let x = rng.gen_range(0..g.num_nodes());
        let y = rng.gen_range(0..g.num_nodes());
        let px = g.mane_potential(eta, k, x).unwrap();
        let py = g.mane_potential(eta, k, y).unwrap();
        for z in 0..g.num_nodes() {
            assert!(px[z] <= px[y] + py[z] + 1e-12);
        }
    }
}

#[test]
fn dominated_potential_residual() {
    for g in [randers16(), bump16()] {
        let eta = [0.7, -0.2];
        let k = g.critical_alpha(eta) + CRITICAL_MARGIN;
        let p = g.dominated_potential(eta, k).unwrap();
        assert!(g.domination_residual(&p) <= 1e-12);
        assert_eq!(p.u.len(), g.num_nodes());
    }
}

#[test]
fn refinement_never_lengthens() {
    let m = MetricModel::bump();
    let g32 = ActionGraph::build(&m, 32, 3).unwrap();
    let g64 = ActionGraph::build(&m, 64, 3).unwrap();
    for z in [[1, 0], [1, 2]] {
        let a = g32.stable_norm(z, 1);
        let b = g64.stable_norm(z, 1);
        assert!(b <= a + 1e-9, "{z:?}: {a} {b}");
    }
}

#[test]
fn flat_duality_spot_check() {
    let g = flat32();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let eta = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let a = g.critical_alpha(eta);
        // Young's inequality against beta(h) = |h|^2 / 2, equality at h = eta
        let b = 0.5 * geom::dot(eta, eta);
        assert!(geom::dot(eta, eta) <= a + b + 5e-3);
        assert!((geom::dot(eta, eta) - a - b).abs() <= 5e-3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn alpha_is_convex(a1 in -1.0f64..1.0, a2 in -1.0f64..1.0, b1 in -1.0f64..1.0, b2 in -1.0f64..1.0) {
        let g = bump16();
        let mid = g.critical_alpha([0.5 * (a1 + b1), 0.5 * (a2 + b2)]);
        let avg = 0.5 * g.critical_alpha([a1, a2]) + 0.5 * g.critical_alpha([b1, b2]);
        prop_assert!(mid <= avg + 1e-9 + 1e-6 * avg);
    }
}
