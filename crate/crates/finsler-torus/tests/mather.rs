use finsler_torus::actiongraph::ActionGraph;
use finsler_torus::geom;
use finsler_torus::mather::*;
use finsler_torus::metrics::randers_dual;
use finsler_torus::MetricModel;
use proptest::prelude::*;
use std::sync::OnceLock;

fn flat() -> &'static ActionGraph {
    static G: OnceLock<ActionGraph> = OnceLock::new();
    G.get_or_init(|| ActionGraph::build(&MetricModel::flat(), 16, 3).unwrap())
}

fn randers() -> &'static ActionGraph {
    static G: OnceLock<ActionGraph> = OnceLock::new();
    G.get_or_init(|| ActionGraph::build(&MetricModel::randers([0.5, 0.0]).unwrap(), 16, 3).unwrap())
}

fn bump() -> &'static ActionGraph {
    static G: OnceLock<ActionGraph> = OnceLock::new();
    G.get_or_init(|| ActionGraph::build(&MetricModel::bump(), 16, 3).unwrap())
}

#[test]
fn beta_examples() {
    assert!((beta(flat(), [1.0, 0.0]) - 0.5).abs() < 1e-9);
    assert!((beta(flat(), [3.0, 4.0]) - 12.5).abs() < 0.5);
    assert!((beta(randers(), [1.0, 0.0]) - 1.125).abs() < 5e-3);
    assert!((beta(randers(), [-1.0, 0.0]) - 0.125).abs() < 5e-3);
}

#[test]
fn randers_level_is_the_shifted_circle() {
    let t = alpha_level(randers(), 32).unwrap();
    for p in &t.level {
        let r = randers_dual([0.5, 0.0], *p);
        assert!((r - 1.0).abs() < 2e-2, "{p:?}: {r}");
    }
}

#[test]
fn level_vertices_sit_on_the_half_level() {
    for g in [flat(), randers(), bump()] {
        let t = alpha_level(g, 32).unwrap();
        for p in &t.level {
            assert!((alpha(g, *p) - 0.5).abs() < 1e-9, "{}", g.metric().name());
        }
    }
}

#[test]
fn beta_table_is_convex_and_on_the_unit_level() {
    for g in [flat(), randers(), bump()] {
        let t = beta_table(g, 4).unwrap();
        assert!(t.min_convexity() >= -1e-9, "{}: {}", g.metric().name(), t.min_convexity());
        for e in &t.entries {
            assert!((beta(g, e.h) - 0.5).abs() < 1e-9);
        }
    }
}

#[test]
fn fenchel_inequality_with_equality_on_supports() {
    for g in [flat(), randers(), bump()] {
        for z in [[1, 0], [1, 1]] {
            let h = [z[0] as f64, z[1] as f64];
            for ell in support_eta(g, z, 8).unwrap() {
                // equality needs the covector scaled by |h|_st = <ell, h>
                let eta = geom::scale(geom::dot(ell, h), ell);
                let pair = geom::dot(eta, h);
                let gap = beta(g, h) + alpha(g, eta) - pair;
                // the graph and continuous norms differ by the graph bias
                assert!(gap >= -2e-2 && gap < 2e-2, "{} {z:?}: {gap}", g.metric().name());
            }
        }
    }
}

#[test]
fn corner_verdicts() {
    for g in [flat(), randers()] {
        let c = beta_corner(g, [1, 0], 8).unwrap();
        assert!(!c.corner, "{}: {} {}", g.metric().name(), c.left_slope, c.right_slope);
    }
    let c = beta_corner(bump(), [1, 0], 8).unwrap();
    assert!(c.corner);
    assert!(c.left_slope < 0.0 && c.right_slope > 0.0);
}

#[test]
fn farey_brackets_reconstruct_direction() {
    for h in [[0.3, 0.7], [-1.0, 0.2], [2.0_f64.sqrt(), -1.0]] {
        match farey_bracket(h, 16) {
            Bracket::Exact(z) => assert!(geom::cross(h, [z[0] as f64, z[1] as f64]).abs() < 1e-12),
            Bracket::Between { z1, z2, a, b } => {
                assert!(a >= 0.0 && b >= 0.0);
                let r = [a * z1[0] as f64 + b * z2[0] as f64, a * z1[1] as f64 + b * z2[1] as f64];
                assert!(geom::dist(r, h) < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn homogeneity(z in prop::sample::select(farey_classes(4)), th in 0.0..std::f64::consts::TAU, s in prop::sample::select(vec![0.5, 2.0, 3.0]), i in 0usize..2) {
        let g = [flat(), randers()][i];
        let h = [z[0] as f64, z[1] as f64];
        let (b1, bs) = (beta(g, h), beta(g, geom::scale(s, h)));
        prop_assert!((bs - s * s * b1).abs() <= 1e-5 * bs);
        let v = geom::unit(th);
        let (a1, as_) = (alpha(g, v), alpha(g, geom::scale(s, v)));
        prop_assert!((as_ - s * s * a1).abs() <= 1e-5 * as_);
    }

    #[test]
    fn fenchel_on_random_pairs(z in prop::sample::select(farey_classes(4)), t in 0.2..2.0f64, th in 0.0..std::f64::consts::TAU, r in 0.2..2.0f64) {
        let h = [t * z[0] as f64, t * z[1] as f64];
        for g in [flat(), randers(), bump()] {
            let eta = geom::scale(r, geom::unit(th));
            prop_assert!(beta(g, h) + alpha(g, eta) >= geom::dot(eta, h) - 1e-9);
        }
    }
}
