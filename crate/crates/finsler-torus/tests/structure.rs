use finsler_torus::geom;
use finsler_torus::minimizers::LiftedPath;
use finsler_torus::structure::*;
use finsler_torus::{Error, MetricModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn flat_and_randers_are_foliated() {
    for m in [MetricModel::flat(), MetricModel::randers([0.5, 0.0]).unwrap()] {
        let r = gap_scan(&m, [1, 0], 128).unwrap();
        assert_eq!(r.coverage, 1.0, "{}", m.name());
        assert!(r.gaps.is_empty());
        assert!(!r.gap_condition);
        assert!(r.deviation < 1e-9);
    }
}

#[test]
fn bump_has_a_gap_with_both_heteroclinics() {
    let r = gap_scan(&MetricModel::bump(), [1, 0], 128).unwrap();
    assert!(r.coverage < 1.0);
    assert!(!r.gaps.is_empty());
    let g = &r.gaps[0];
    let (wp, wm) = (g.omega_plus.unwrap(), g.omega_minus.unwrap());
    assert!(wp > 0.0 && wm > 0.0);
    assert!(r.gap_condition);
    for h in [g.plus.as_ref().unwrap(), g.minus.as_ref().unwrap()] {
        assert_eq!(h.crossings, 0);
        assert!(h.interior_margin > 0.0);
    }
}

#[test]
fn family_members_do_not_cross() {
    let (fam, _, _) = periodic_family(&MetricModel::bump(), [1, 1], 8, 16).unwrap();
    // the bump family may collapse to one loop; add its lattice translates
    let w = transversal([1, 1]).unwrap();
    let lifted: Vec<LiftedPath> = (0..3)
        .flat_map(|k| fam.iter().map(move |p| p.unroll(2).translate([(k * w[0]) as f64, (k * w[1]) as f64])))
        .collect();
    let r = graph_property_test(&lifted, true).unwrap();
    assert!(r.crossings.is_empty(), "{:?}", r.crossings);
}

#[test]
fn crossing_lines_are_reported() {
    let a = LiftedPath::open(vec![[0.0, 0.0], [1.0, 1.0]]);
    let b = LiftedPath::open(vec![[0.0, 1.0], [1.0, 0.0]]);
    let r = graph_property_test(&[a, b], false).unwrap();
    assert_eq!(r.crossings, vec![(0, 1)]);
}

#[test]
fn flat_torus_field_is_constant() {
    let m = MetricModel::flat();
    let h = [1.0, 0.5f64.sqrt()];
    let t = assemble_torus(&m, h, 8, 16).unwrap();
    let u = geom::scale(1.0 / geom::norm(h), h);
    let approx_dir = |z: [i64; 2]| {
        let v = [z[0] as f64, z[1] as f64];
        geom::scale(1.0 / geom::norm(v), v)
    };
    // the field interpolates between the two approximant directions
    let (a, b) = (approx_dir(t.approximants[0]), approx_dir(t.approximants[1]));
    let spread = geom::dist(a, b);
    for v in &t.field {
        assert!(geom::dist(*v, u) <= spread, "{v:?}");
    }
}

#[test]
fn flat_tori_are_cyclically_ordered() {
    let m = MetricModel::flat();
    let dirs = [[1.0, 0.4 * 0.5f64.sqrt()], [1.0, 0.5 * (5f64.sqrt() - 1.0)], [1.0, std::f64::consts::PI - 2.0]];
    let tori: Vec<TorusGraphSample> = dirs.iter().map(|h| assemble_torus(&m, *h, 8, 16).unwrap()).collect();
    let refs: Vec<&TorusGraphSample> = tori.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<[f64; 2]> = (0..100).map(|_| [rng.gen(), rng.gen()]).collect();
    assert_eq!(cyclic_order_violations(&m, &refs, &pts).unwrap(), 0);
}

#[test]
fn rational_direction_is_rejected() {
    let e = assemble_torus(&MetricModel::flat(), [2.0, 1.0], 8, 16).unwrap_err();
    assert!(matches!(e, Error::Invalid(_)));
}

#[test]
fn small_resolution_is_rejected() {
    assert!(gap_scan(&MetricModel::flat(), [1, 0], 64).is_err());
}
