//! Acceptance suite. Runs every criterion in sequence, prints one
//! `PASS`/`FAIL` line each, and exits nonzero if any failed.
//!
//! cargo test -p finsler-torus --test acceptance

use finsler_torus::actiongraph::ActionGraph;
use finsler_torus::entropy::{entropy_ladder, EntropyEstimate, EntropyOptions};
use finsler_torus::flow::integrate_every;
use finsler_torus::geom;
use finsler_torus::harness::config::MetricSpec;
use finsler_torus::katok::{check_invariance_and_period, psi_plateaus};
use finsler_torus::mather::{alpha, beta, beta_corner, support_eta};
use finsler_torus::metrics::FourierMode;
use finsler_torus::minimizers::*;
use finsler_torus::structure::{assemble_torus_with, widest_gap, cyclic_order_violations, gap_scan, graph_property_test, transversal, GapReport, TorusGraphSample};
use finsler_torus::{par, MetricModel, Result, TangentVec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

const CLASSES: [[i64; 2]; 3] = [[1, 0], [1, 1], [2, 1]];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn randers() -> MetricModel {
    MetricModel::randers([0.5, 0.0]).unwrap()
}

fn models() -> [MetricModel; 3] {
    [MetricModel::flat(), randers(), MetricModel::bump()]
}

fn graphs() -> &'static [ActionGraph] {
    static G: OnceLock<Vec<ActionGraph>> = OnceLock::new();
    G.get_or_init(|| models().iter().map(|m| ActionGraph::build(m, 16, 3).unwrap()).collect())
}

fn npath(z: [i64; 2]) -> usize {
    64 * z[0].unsigned_abs().max(z[1].unsigned_abs()) as usize
}

fn scans() -> &'static [GapReport] {
    static S: OnceLock<Vec<GapReport>> = OnceLock::new();
    S.get_or_init(|| models().iter().map(|m| gap_scan(m, [1, 0], 128).unwrap()).collect())
}

fn c1_flat_exactness() -> Result<Outcome> {
    par::set_sequential(true);
    let t = Instant::now();
    let g = ActionGraph::build(&MetricModel::flat(), 32, 3)?;
    let b = beta(&g, [1.0, 0.0]);
    let a = alpha(&g, [1.0, 0.0]);
    let n = g.stable_norm([3, 4], 1);
    let secs = t.elapsed().as_secs_f64();
    par::set_sequential(false);
    let pass = (b - 0.5).abs() <= 2e-3 && (a - 0.5).abs() <= 2e-3 && (n - 5.0).abs() <= 5e-2 && secs <= 60.0;
    outcome(pass, format!("beta(1,0) = {b:.6}, alpha(1,0) = {a:.6}, |(3,4)| = {n:.6}, {secs:.1} s single-threaded"))
}

fn c2_homogeneity() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for g in &graphs()[..2] {
        for s in [0.5, 2.0, 3.0] {
            for z in CLASSES.iter().chain(&[[-1, 2], [0, -1]]) {
                let h = [z[0] as f64, z[1] as f64];
                let (b1, bs) = (beta(g, h), beta(g, geom::scale(s, h)));
                worst = worst.max((bs - s * s * b1).abs() / bs);
            }
            let h = [1.0, 2f64.sqrt()];
            let (b1, bs) = (beta(g, h), beta(g, geom::scale(s, h)));
            worst = worst.max((bs - s * s * b1).abs() / bs);
            for k in 0..16 {
                let e = geom::unit(k as f64 * std::f64::consts::TAU / 16.0 + 0.1);
                let (a1, as_) = (alpha(g, e), alpha(g, geom::scale(s, e)));
                worst = worst.max((as_ - s * s * a1).abs() / as_);
            }
        }
    }
    outcome(worst <= 1e-5, format!("largest relative error {worst:.2e}"))
}

fn c3_randers() -> Result<Outcome> {
    let g = &graphs()[1];
    let (bp, bm) = (beta(g, [1.0, 0.0]), beta(g, [-1.0, 0.0]));
    let cf = g.metric().estimate_cf(64)?.c_f;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = 0;
    for _ in 0..100 {
        let x = rng.gen_range(0..g.num_nodes());
        let y = loop {
            let y = rng.gen_range(0..g.num_nodes());
            if y != x {
                break y;
            }
        };
        // at energy 1/2 the potential is the F-distance
        let dxy = g.mane_potential([0.0, 0.0], 0.5, x)?[y];
        let dyx = g.mane_potential([0.0, 0.0], 0.5, y)?[x];
        if dxy > cf * cf * dyx + 1e-12 {
            bad += 1;
        }
    }
    let pass = (bp - 1.125).abs() <= 5e-3 && (bm - 0.125).abs() <= 5e-3 && bad == 0;
    outcome(pass, format!("beta(1,0) = {bp:.6}, beta(-1,0) = {bm:.6}, c_F = {cf:.4}, {bad}/100 pairs violate the ratio bound"))
}

fn c4_conservation() -> Result<Outcome> {
    let kz = MetricSpec::KatokZiller { alpha: 1.0, beta: 0.005, a0: 0.3, a1: 0.7, b: 0.9, band: 1.0 }.build()?;
    let runs = [
        (MetricModel::flat(), TangentVec::new([0.1, 0.2], [0.8, 0.6])),
        (randers(), TangentVec::new([0.1, 0.2], [0.8, 0.6])),
        (MetricModel::bump(), TangentVec::new([0.1, 0.2], [0.8, 0.6])),
        (MetricModel::rotational_sphere(1.0), TangentVec::new([0.0, 0.2], [0.9, 0.3])),
        (kz, TangentVec::new([0.0, 0.1], [0.9, 0.2])),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    let mut clairaut = f64::NAN;
    for (m, w) in &runs {
        let o = integrate_every(m, *w, 100.0, 1e-3, 100)?;
        let d = o.max_relative_drift();
        pass &= d <= 1e-6;
        parts.push(format!("{} {d:.1e}", m.name()));
        if m.name() == "rotational" {
            let c = o.covectors.as_ref().expect("cylinder orbits carry covectors");
            clairaut = c.iter().map(|e| (e[0] - c[0][0]).abs() / c[0][0].abs()).fold(0.0, f64::max);
        }
    }
    pass &= clairaut <= 1e-6;
    outcome(pass, format!("energy drift {}; Clairaut drift {clairaut:.1e}", parts.join(", ")))
}

fn c5_hedlund() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for g in graphs() {
        for z in CLASSES {
            let a = periodic_minimizer(g.metric(), z, npath(z), g)?;
            let z2 = [2 * z[0], 2 * z[1]];
            let b = periodic_minimizer(g.metric(), z2, npath(z2), g)?;
            worst = worst.max((b.length - 2.0 * a.length).abs() / b.length);
        }
    }
    outcome(worst <= 1e-4, format!("largest |L(2z) - 2 L(z)| / L(2z) = {worst:.2e}"))
}

fn c6_rotation() -> Result<Outcome> {
    let (mut dir_err, mut pair_err): (f64, f64) = (0.0, 0.0);
    for g in graphs() {
        for z in CLASSES {
            let c = periodic_minimizer(g.metric(), z, npath(z), g)?;
            let r = rotation_vector_path(g.metric(), &c.path)?;
            let u = geom::scale(1.0 / geom::norm(r.rho), r.rho);
            dir_err = dir_err.max(geom::dist(u, r.delta_plus));
            for eta in support_eta(g, z, 8)? {
                pair_err = pair_err.max((geom::dot(eta, r.rho) - 1.0).abs());
            }
        }
    }
    outcome(dir_err <= 1e-6 && pair_err <= 1e-3, format!("|delta+ - rho/|rho|| <= {dir_err:.1e}, |<eta, rho> - 1| <= {pair_err:.1e}"))
}

fn c7_graph_property() -> Result<Outcome> {
    let mut crossings = 0;
    let mut clearance = f64::INFINITY;
    for g in graphs() {
        for z in CLASSES {
            let c = periodic_minimizer(g.metric(), z, npath(z), g)?;
            let base = c.path.unroll(3);
            let t = transversal(z)?;
            let tr: Vec<LiftedPath> = (0..10).map(|k| base.translate([(k * t[0]) as f64, (k * t[1]) as f64])).collect();
            let rep = graph_property_test(&tr, true)?;
            crossings += rep.crossings.len();
            clearance = clearance.min(rep.min_clearance);
        }
    }
    let mut het = 0;
    let mut het_clear = f64::INFINITY;
    let bump = &scans()[2];
    for gap in &bump.gaps {
        for h in [&gap.plus, &gap.minus].into_iter().flatten() {
            het += h.crossings;
            het_clear = het_clear.min(h.interior_margin);
        }
    }
    let pass = crossings == 0 && het == 0 && !bump.gaps.is_empty();
    outcome(pass, format!("{crossings} crossings among translates (clearance {clearance:.3e}), {het} heteroclinic crossings (interior margin {het_clear:.3e})"))
}

fn c8_gaps() -> Result<Outcome> {
    let s = scans();
    let mut pass = s[0].coverage == 1.0 && s[1].coverage == 1.0;
    let bump = &s[2];
    pass &= bump.coverage < 1.0 && !bump.gaps.is_empty();
    let mut parts = Vec::new();
    for g in &bump.gaps {
        for h in [&g.plus, &g.minus] {
            match h {
                Some(h) => {
                    let k = h.window_trace.len();
                    let stab = (h.window_trace[k - 1].1 - h.window_trace[k - 2].1).abs();
                    pass &= h.omega.is_finite() && stab <= 1e-5 && h.converged;
                    parts.push(format!("omega {:?} = {:.6} (window change {stab:.1e})", h.sign, h.omega));
                }
                None => pass = false,
            }
        }
    }
    outcome(
        pass,
        format!("coverage flat {}, randers {}, bump {:.4} with {} gap(s): {}", s[0].coverage, s[1].coverage, bump.coverage, bump.gaps.len(), parts.join(", ")),
    )
}

fn c9_corner() -> Result<Outcome> {
    let mut verdicts = Vec::new();
    let mut parts = Vec::new();
    for (g, scan) in graphs().iter().zip(scans()) {
        let c = beta_corner(g, [1, 0], 8)?;
        let gap = scan.coverage < 1.0;
        verdicts.push((c.corner, gap));
        parts.push(format!("{} corner {} gap {} (slopes {:.5}, {:.5})", g.metric().name(), c.corner, gap, c.left_slope, c.right_slope));
    }
    let expected = [false, false, true];
    let pass = verdicts.iter().zip(expected).all(|(&(c, g), e)| c == e && g == e);
    outcome(pass, parts.join("; "))
}

fn c10_multibump() -> Result<Outcome> {
    let bump = MetricModel::bump();
    let (q0, q1, _) = widest_gap(&bump, [1, 0], 128, 32)?;
    let p = HeteroclinicProblem::new(&bump, &q0, &q1, 8, HetSign::Plus)?;
    let plus = heteroclinic(&p)?;
    let minus = heteroclinic(&p.with_sign(HetSign::Minus))?;
    let sw = Switches::new(&p, &plus, &minus)?;
    let (spec, _) = search_parameters(&sw, &SwitchSpec::default(), 64)?;
    let mut single: f64 = 0.0;
    for (i, h) in [&plus, &minus].into_iter().enumerate() {
        let s = SwitchSpec { first_index: i as i64, ..spec.clone() };
        single = single.max((multibump(&sw, &[0], &s)?.omega - h.omega).abs());
    }
    let base = 2 * spec.kappa.unwrap_or(0) as i64 + spec.nu as i64;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for s in [0, 2, 4, 6, 8] {
        let r = multibump(&sw, &[0, base + s], &spec)?;
        if let Some(t) = r.traversal {
            xs.push((base + s) as f64);
            ys.push(t);
        }
    }
    let (c0, c1, r2) = linear_fit(&xs, &ys);
    let pass = single <= 1e-5 && xs.len() >= 5 && r2 >= 0.99;
    outcome(pass, format!("single-window error {single:.1e}; traversal ~ {c0:.3} + {c1:.4} spacing over {} spacings, R^2 = {r2:.6}", xs.len()))
}

fn counts_monotone(l: &[EntropyEstimate]) -> bool {
    let in_t = l.iter().all(|e| e.counts.windows(2).all(|w| w[0] <= w[1]));
    let in_eps = l.windows(2).all(|w| w[0].counts.iter().zip(&w[1].counts).all(|(a, b)| a <= b));
    in_t && in_eps
}

fn c11_entropy() -> Result<Outcome> {
    let opt = EntropyOptions::default();
    let eps = [0.2, 0.1, 0.05];
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [MetricModel::flat(), MetricModel::rotational_sphere(1.0)] {
        let t = Instant::now();
        let l = entropy_ladder(&m, &eps, 200.0, 2000, 11, &opt)?;
        let secs = t.elapsed().as_secs_f64();
        let slope = l.iter().map(|e| e.slope.abs()).fold(0.0, f64::max);
        let mono = counts_monotone(&l);
        pass &= slope <= 0.05 && mono && secs <= 600.0;
        parts.push(format!("{} max |slope| {slope:.1e}, monotone {mono}, {secs:.1} s", m.name()));
    }
    let m = MetricModel::flat();
    let a = entropy_ladder(&m, &eps, 50.0, 1000, 5, &opt)?;
    let b = entropy_ladder(&m, &eps, 50.0, 1000, 5, &opt)?;
    let same = a.iter().zip(&b).all(|(x, y)| x.counts == y.counts && x.slope.to_bits() == y.slope.to_bits());
    pass &= same;
    parts.push(format!("repeat run identical {same}"));
    outcome(pass, parts.join("; "))
}

fn c12_katok() -> Result<Outcome> {
    let kz = MetricSpec::KatokZiller { alpha: 1.0, beta: 0.005, a0: 0.3, a1: 0.7, b: 0.9, band: 1.0 }.build()?;
    let r = check_invariance_and_period(&kz, 100, 12)?;
    let (on, off) = psi_plateaus(&kz, 1000, 12)?;
    let pass = r.passes() && on == 0.0 && off == 0.0;
    outcome(
        pass,
        format!(
            "return errors {:.1e} / {:.1e}, margins {:.1e} / {:.1e}, psi plateau errors {on:e} / {off:e}",
            r.max_return_rotational, r.max_return_translation, r.min_margin_inner, r.min_margin_shell
        ),
    )
}

fn c13_cyclic_order() -> Result<Outcome> {
    let mode = |k1, k2, amplitude| FourierMode { k1, k2, amplitude, phase: 0.0 };
    let m = MetricModel::conformal(vec![mode(0, 0, 1.0), mode(0, 1, 0.1)])?;
    let dirs = [[1.0, 0.4 * 0.5f64.sqrt()], [1.0, 0.5 * (5f64.sqrt() - 1.0)], [1.0, std::f64::consts::PI - 2.0]];
    let tori: Vec<TorusGraphSample> = dirs.iter().map(|h| assemble_torus_with(&m, *h, 8, 32, 32, 16)).collect::<Result<_>>()?;
    let refs: Vec<&TorusGraphSample> = tori.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pts: Vec<[f64; 2]> = (0..100).map(|_| [rng.gen(), rng.gen()]).collect();
    let v = cyclic_order_violations(&m, &refs, &pts)?;
    outcome(v == 0, format!("{v} violations at {} points", pts.len()))
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 13] = [
        ("flat torus exactness", c1_flat_exactness),
        ("homogeneity of alpha and beta", c2_homogeneity),
        ("Randers closed forms", c3_randers),
        ("energy and Clairaut conservation", c4_conservation),
        ("Hedlund multiplicity", c5_hedlund),
        ("rotation vector identities", c6_rotation),
        ("graph property", c7_graph_property),
        ("gap dichotomy", c8_gaps),
        ("beta corner iff gap", c9_corner),
        ("multibump reduction", c10_multibump),
        ("entropy estimator", c11_entropy),
        ("Katok suite", c12_katok),
        ("cyclic order of tori", c13_cyclic_order),
    ];
    // list mode for `cargo test -- --list`
    if std::env::args().any(|a| a == "--list") {
        for (i, (name, _)) in criteria.iter().enumerate() {
            println!("criterion {}: {name}: test", i + 1);
        }
        return;
    }
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f));
        let secs = t.elapsed().as_secs_f64();
        let (pass, detail) = match res {
            Ok(Ok(o)) => (o.pass, o.detail),
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        failed += usize::from(!pass);
        println!("{} criterion {:>2} ({name}): {detail} [{secs:.1} s]", if pass { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
