use finsler_torus::geom;
use finsler_torus::harness::config::MetricSpec;
use finsler_torus::katok::*;
use finsler_torus::{Error, MetricModel};
use proptest::prelude::*;
use std::sync::OnceLock;

fn kz() -> &'static MetricModel {
    static M: OnceLock<MetricModel> = OnceLock::new();
    M.get_or_init(|| MetricSpec::KatokZiller { alpha: 1.0, beta: 0.005, a0: 0.3, a1: 0.7, b: 0.9, band: 1.0 }.build().unwrap())
}

#[test]
fn periods_and_invariance() {
    let r = check_invariance_and_period(kz(), 100, 2).unwrap();
    assert!(r.passes(), "{r:?}");
    assert!(r.max_fg_drift <= 1e-6);
}

#[test]
fn psi_plateaus_are_exact() {
    let (on, off) = psi_plateaus(kz(), 200, 8).unwrap();
    assert_eq!(on, 0.0);
    assert_eq!(off, 0.0);
}

#[test]
fn torus_metrics_are_rejected() {
    let e = check_invariance_and_period(&MetricModel::flat(), 100, 1).unwrap_err();
    assert!(matches!(e, Error::ChartMismatch(_)));
}

#[test]
fn bad_cutoff_order_is_rejected() {
    assert!(MetricSpec::KatokZiller { alpha: 1.0, beta: 0.005, a0: 0.7, a1: 0.3, b: 0.9, band: 1.0 }.build().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dual_norm_is_homogeneous(x1 in 0.0..1.0f64, x2 in -0.9..0.9f64, th in 0.0..std::f64::consts::TAU, s in 0.2..4.0f64) {
        let m = kz();
        let e = geom::unit(th);
        let h1 = m.hamiltonian([x1, x2], e);
        let hs = m.hamiltonian([x1, x2], geom::scale(s, e));
        prop_assert!((hs - s * h1).abs() <= 1e-10 * hs.max(1.0));
    }

    #[test]
    fn cones_are_homogeneous(x2 in -0.9..0.9f64, th in 0.0..std::f64::consts::TAU, s in 0.2..4.0f64) {
        let c = ConeSet::new(0.3, finsler_torus::metrics::Profile::Sphere);
        let e = geom::unit(th);
        prop_assert_eq!(c.contains([0.0, x2], e), c.contains([0.0, x2], geom::scale(s, e)));
    }
}
