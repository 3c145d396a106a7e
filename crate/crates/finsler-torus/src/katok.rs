//! Rotational metrics from surfaces of revolution and the integrable
//! Katok-Ziller deformations `H = alpha F_g + beta psi` of their dual norms.
//!
//! On the cone sets `M_a = {F_g = 1, |x2| <= a, eta1 >= g0(a)}` the
//! geodesic flow of the round profile and the flow of `psi` are both
//! `2 pi`-periodic; the checks here integrate both and measure it.

use crate::error::{Error, Result};
use crate::flow::{self, Generator, OrbitSample};
use crate::geom::{self, V2};
use crate::metrics::{g0, KzParams, MetricKind, MetricModel, Profile, ProfileTable};
use crate::par;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::{PI, TAU};

/// Induced profile `g = c1 o h` with `h' = c1(h)`, sampled on `[t0, t1]`.
#[derive(Clone, Debug, Serialize)]
pub struct RevolutionProfile {
    pub t0: f64,
    pub dt: f64,
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    pub dg: Vec<f64>,
}

impl RevolutionProfile {
    pub fn eval(&self, t: f64) -> f64 {
        self.to_profile().g(t)
    }

    pub fn to_profile(&self) -> Profile {
        Profile::Table(ProfileTable { t0: self.t0, dt: self.dt, g: self.g.clone(), dg: self.dg.clone() })
    }
}

fn rk4_h<F: Fn(f64) -> f64>(c1: &F, h: f64, dt: f64) -> f64 {
    let k1 = c1(h);
    let k2 = c1(h + 0.5 * dt * k1);
    let k3 = c1(h + 0.5 * dt * k2);
    let k4 = c1(h + dt * k3);
    h + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integrate `h' = c1(h)` from `h(0) = h0` both ways over `span` on a grid
/// of `samples + 1` points. Substeps are halved until two successive
/// refinements agree on `g` within `tol`. `c1` returns value and derivative.
pub fn profile_ode<F>(c1: F, domain: (f64, f64), h0: f64, span: (f64, f64), samples: usize, tol: f64) -> Result<RevolutionProfile>
where
    F: Fn(f64) -> (f64, f64),
{
    if !(span.0 <= 0.0 && 0.0 <= span.1 && span.0 < span.1) || samples < 2 {
        return Err(Error::Invalid("span must contain 0 and be nondegenerate".into()));
    }
    if !(domain.0 < h0 && h0 < domain.1) {
        return Err(Error::BlowUp { t: 0.0 });
    }
    let dt = (span.1 - span.0) / samples as f64;
    let i0 = (-span.0 / dt).round() as usize;
    let t0 = -(i0 as f64) * dt;
    let f = |h: f64| c1(h).0;
    let solve = |sub: usize| -> Result<Vec<f64>> {
        let mut h = vec![0.0; samples + 1];
        h[i0] = h0;
        for dir in [1i64, -1] {
            let mut cur = h0;
            let mut i = i0 as i64;
            loop {
                let next = i + dir;
                if next < 0 || next > samples as i64 {
                    break;
                }
                let step = dir as f64 * dt / sub as f64;
                for _ in 0..sub {
                    cur = rk4_h(&f, cur, step);
                    if !(domain.0 < cur && cur < domain.1) || !cur.is_finite() {
                        return Err(Error::BlowUp { t: t0 + next as f64 * dt });
                    }
                }
                h[next as usize] = cur;
                i = next;
            }
        }
        Ok(h)
    };
    let mut sub = 1usize;
    let mut prev = solve(sub)?;
    loop {
        sub *= 2;
        let h = solve(sub)?;
        let diff = h.iter().zip(&prev).map(|(a, b)| (f(*a) - f(*b)).abs()).fold(0.0, f64::max);
        prev = h;
        if diff <= tol || sub >= 1 << 16 {
            break;
        }
    }
    let g: Vec<f64> = prev.iter().map(|&h| f(h)).collect();
    let dg: Vec<f64> = prev.iter().map(|&h| {
        let (c, dc) = c1(h);
        dc * c
    }).collect();
    Ok(RevolutionProfile { t0, dt, h: prev, g, dg })
}

/// Katok-Ziller model `alpha F_g + beta psi`, rejected when `H^2 / 2` loses
/// strict convexity on a sample of the band.
pub fn kz_hamiltonian(profile: Profile, alpha: f64, beta: f64, a0: f64, a1: f64, b: f64, band: f64) -> Result<MetricModel> {
    let m = MetricModel::katok_ziller(KzParams { alpha, beta, a0, a1, b, profile, band })?;
    if alpha > 0.0 {
        let mut worst = f64::INFINITY;
        for i in 0..=32 {
            let x2 = -band + 2.0 * band * i as f64 / 32.0;
            for k in 0..256 {
                let e = geom::unit(TAU * (k as f64 + 0.5) / 256.0);
                let eig = m.dual_min_eig([0.0, x2], e);
                worst = worst.min(eig);
            }
        }
        if !(worst > 0.0) {
            return Err(Error::ConvexityLost { min_eig: worst });
        }
    }
    Ok(m)
}

/// The cone `M_a` for a profile agreeing with `g0` on `[-b, b]`.
#[derive(Clone, Debug, Serialize)]
pub struct ConeSet {
    pub a: f64,
    #[serde(skip)]
    pub profile: Profile,
}

impl ConeSet {
    pub fn new(a: f64, profile: Profile) -> Self {
        Self { a, profile }
    }

    /// `F_g(eta) = |eta| / g(x2)`.
    pub fn fg(&self, x: V2, eta: V2) -> f64 {
        geom::norm(eta) / self.profile.g(x[1])
    }

    /// Signed margin of the homogeneous membership predicate; `>= 0` iff
    /// `(x, eta / F_g)` lies in `M_a`.
    pub fn margin(&self, x: V2, eta: V2) -> f64 {
        let f = self.fg(x, eta);
        (self.a - x[1].abs()).min(eta[0] / f - g0(self.a))
    }

    pub fn contains(&self, x: V2, eta: V2) -> bool {
        self.margin(x, eta) >= 0.0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KatokReport {
    pub samples_inner: usize,
    pub samples_shell: usize,
    /// `|phi^{2 pi}(xi) - xi|` for the rotational and the translation flow.
    pub return_rotational: Vec<f64>,
    pub return_translation: Vec<f64>,
    pub max_return_rotational: f64,
    pub max_return_translation: f64,
    /// Least membership margin along mixed-flow orbits, inner and shell.
    pub min_margin_inner: f64,
    pub min_margin_shell: f64,
    pub max_fg_drift: f64,
    pub max_eta1_drift: f64,
    /// Largest `|dF_g/dt|` and `|d eta1/dt|` along mixed orbits.
    pub max_poisson_fg: f64,
    pub max_poisson_eta1: f64,
    pub max_homogeneity_error: f64,
    /// Largest jump of the reversibilised dual norm across `eta1 = 0`.
    pub reversibilization_jump: f64,
    /// Largest difference between the reversibilised and the original
    /// Hamiltonian along mixed orbits in `eta1 > 0`.
    pub reversibilization_defect: f64,
    pub mixed: (f64, f64),
}

impl KatokReport {
    pub fn passes(&self) -> bool {
        self.max_return_rotational <= 1e-5
            && self.max_return_translation <= 1e-5
            && self.min_margin_inner >= -1e-6
            && self.min_margin_shell >= -1e-6
    }
}

fn params(m: &MetricModel) -> Result<&KzParams> {
    match &m.kind {
        MetricKind::KatokZiller(p) => Ok(p),
        _ => Err(Error::ChartMismatch("Katok checks need a Katok-Ziller model".into())),
    }
}

fn with_ab(p: &KzParams, alpha: f64, beta: f64) -> Result<MetricModel> {
    MetricModel::katok_ziller(KzParams { alpha, beta, ..p.clone() })
}

/// Unit covectors drawn uniformly in `(x1, x2, angle)` subject to `keep`.
fn draw<K: Fn(V2, V2) -> bool>(rng: &mut ChaCha8Rng, p: &KzParams, span: f64, n: usize, keep: K) -> Vec<(V2, V2)> {
    let mut out = Vec::with_capacity(n);
    let mut tries = 0;
    while out.len() < n && tries < 10_000 * n {
        tries += 1;
        let x = [rng.gen_range(0.0..TAU), rng.gen_range(-span..span)];
        let g = p.profile.g(x[1]);
        let eta = geom::scale(g, geom::unit(rng.gen_range(-PI..PI)));
        if keep(x, eta) {
            out.push((x, eta));
        }
    }
    out
}

fn phase_dist(a: (V2, V2), b: (V2, V2)) -> f64 {
    let dx = geom::torus_dist(a.0, b.0, [TAU, f64::INFINITY]);
    let de = geom::dist(a.1, b.1);
    (dx * dx + de * de).sqrt()
}

fn run(m: &MetricModel, x: V2, eta: V2, t: f64, steps: usize) -> Result<OrbitSample> {
    flow::integrate_cotangent(m, x, eta, steps, t / steps as f64, 1, Generator::Norm)
}

fn end_state(o: &OrbitSample, k: usize) -> (V2, V2) {
    (o.states[k].x, o.covectors.as_ref().unwrap()[k])
}

/// Integrate samples of `M_a0` and of `M_a1 \ M_a0` to `4 pi` under the
/// rotational flow, the translation flow and the model's mixed flow.
pub fn check_invariance_and_period(model: &MetricModel, samples: usize, seed: u64) -> Result<KatokReport> {
    let p = params(model)?.clone();
    if samples < 100 {
        return Err(Error::Invalid("need at least 100 samples".into()));
    }
    let inner = ConeSet::new(p.a0, p.profile.clone());
    let outer = ConeSet::new(p.a1, p.profile.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s_in = draw(&mut rng, &p, p.a0, samples, |x, e| inner.contains(x, e));
    let s_sh = draw(&mut rng, &p, p.a1, samples, |x, e| outer.contains(x, e) && !inner.contains(x, e));
    if s_in.len() < samples || s_sh.len() < samples {
        return Err(Error::ConstraintInfeasible("cone sets too thin to sample".into()));
    }
    let rot = with_ab(&p, 1.0, 0.0)?;
    let tra = with_ab(&p, 0.0, 1.0)?;
    let steps_per_period = 4096usize;

    let returns: Vec<Result<(f64, f64)>> = par::map_slice(&s_in, |&(x, e)| {
        let a = run(&rot, x, e, 2.0 * TAU, 2 * steps_per_period)?;
        let b = run(&tra, x, e, 2.0 * TAU, 2 * steps_per_period)?;
        let ea = phase_dist(end_state(&a, steps_per_period), (x, e)).max(phase_dist(end_state(&a, 2 * steps_per_period), (x, e)));
        let eb = phase_dist(end_state(&b, steps_per_period), (x, e)).max(phase_dist(end_state(&b, 2 * steps_per_period), (x, e)));
        Ok((ea, eb))
    });
    let mut return_rotational = Vec::with_capacity(samples);
    let mut return_translation = Vec::with_capacity(samples);
    for r in returns {
        let (a, b) = r?;
        return_rotational.push(a);
        return_translation.push(b);
    }

    struct Mixed {
        margin: f64,
        fg: f64,
        eta1: f64,
        pfg: f64,
        peta1: f64,
        hom: f64,
        rev: f64,
    }
    let mixed_run = |x: V2, e: V2, cone: &ConeSet| -> Result<Mixed> {
        let o = run(model, x, e, 2.0 * TAU, 2 * steps_per_period)?;
        let cov = o.covectors.as_ref().unwrap();
        let fg0 = cone.fg(x, e);
        let mut out = Mixed { margin: f64::INFINITY, fg: 0.0, eta1: 0.0, pfg: 0.0, peta1: 0.0, hom: 0.0, rev: 0.0 };
        for (s, c) in o.states.iter().zip(cov) {
            out.margin = out.margin.min(cone.margin(s.x, *c));
            out.fg = out.fg.max((cone.fg(s.x, *c) - fg0).abs() / fg0);
            out.eta1 = out.eta1.max((c[0] - e[0]).abs() / e[0].abs().max(1e-300));
            let (hx, he) = model.dual_grad(s.x, *c);
            // {F_g, H} and {eta1, H}
            let g = cone.profile.g_dg(s.x[1]);
            let n = geom::norm(*c);
            let dfg_dx2 = -n * g.1 / (g.0 * g.0);
            let dfg_de = geom::scale(1.0 / (n * g.0), *c);
            out.pfg = out.pfg.max((dfg_dx2 * he[1] - geom::dot(dfg_de, hx)).abs());
            out.peta1 = out.peta1.max(hx[0].abs());
            if c[0] > 0.0 {
                out.rev = out.rev.max((reversibilized_h(model, s.x, *c) - model.hamiltonian(s.x, *c)).abs());
            }
        }
        for r in [0.5, 2.0] {
            let q = run(model, x, geom::scale(r, e), 2.0 * TAU, 2 * steps_per_period)?;
            for k in [steps_per_period, 2 * steps_per_period] {
                let (xa, ea) = end_state(&o, k);
                let (xb, eb) = end_state(&q, k);
                out.hom = out.hom.max(phase_dist((xa, geom::scale(r, ea)), (xb, eb)));
            }
        }
        Ok(out)
    };
    let mi: Vec<Result<Mixed>> = par::map_slice(&s_in, |&(x, e)| mixed_run(x, e, &inner));
    let ms: Vec<Result<Mixed>> = par::map_slice(&s_sh, |&(x, e)| mixed_run(x, e, &outer));
    let mut rep = KatokReport {
        samples_inner: samples,
        samples_shell: samples,
        max_return_rotational: return_rotational.iter().cloned().fold(0.0, f64::max),
        max_return_translation: return_translation.iter().cloned().fold(0.0, f64::max),
        return_rotational,
        return_translation,
        min_margin_inner: f64::INFINITY,
        min_margin_shell: f64::INFINITY,
        max_fg_drift: 0.0,
        max_eta1_drift: 0.0,
        max_poisson_fg: 0.0,
        max_poisson_eta1: 0.0,
        max_homogeneity_error: 0.0,
        reversibilization_jump: 0.0,
        reversibilization_defect: 0.0,
        mixed: (p.alpha, p.beta),
    };
    for (shell, list) in [(false, mi), (true, ms)] {
        for r in list {
            let r = r?;
            if shell {
                rep.min_margin_shell = rep.min_margin_shell.min(r.margin);
            } else {
                rep.min_margin_inner = rep.min_margin_inner.min(r.margin);
            }
            rep.max_fg_drift = rep.max_fg_drift.max(r.fg);
            rep.max_eta1_drift = rep.max_eta1_drift.max(r.eta1);
            rep.max_poisson_fg = rep.max_poisson_fg.max(r.pfg);
            rep.max_poisson_eta1 = rep.max_poisson_eta1.max(r.peta1);
            rep.max_homogeneity_error = rep.max_homogeneity_error.max(r.hom);
            rep.reversibilization_defect = rep.reversibilization_defect.max(r.rev);
        }
    }
    for i in 0..=64 {
        let x = [0.0, -p.band + 2.0 * p.band * i as f64 / 64.0];
        for e2 in [0.3, 1.0, -0.7] {
            let a = reversibilized_h(model, x, [1e-12, e2]);
            let b = reversibilized_h(model, x, [-1e-12, e2]);
            rep.reversibilization_jump = rep.reversibilization_jump.max((a - b).abs());
        }
    }
    Ok(rep)
}

/// `F1*(x, eta) = F0*(x, eta)` for `eta1 >= 0` and `F0*(x, -eta)` otherwise.
pub fn reversibilized_h(m: &MetricModel, x: V2, eta: V2) -> f64 {
    if eta[0] >= 0.0 {
        m.hamiltonian(x, eta)
    } else {
        m.hamiltonian(x, [-eta[0], -eta[1]])
    }
}

/// Plateau identities of `psi` at random covectors: the largest
/// `|psi - eta1|` on `M_a0` and the largest `|psi|` off `M_a1`.
pub fn psi_plateaus(model: &MetricModel, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let p = params(model)?.clone();
    let inner = ConeSet::new(p.a0, p.profile.clone());
    let outer = ConeSet::new(p.a1, p.profile.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let on = draw(&mut rng, &p, p.a0, samples, |x, e| inner.contains(x, e));
    let off = draw(&mut rng, &p, p.band, samples, |x, e| !outer.contains(x, e));
    let mut e_on: f64 = 0.0;
    let mut e_off: f64 = 0.0;
    for (x, e) in on {
        for r in [0.5, 1.0, 3.0] {
            let eta = geom::scale(r, e);
            e_on = e_on.max((model.psi(x, eta) - eta[0]).abs());
        }
    }
    for (x, e) in off {
        e_off = e_off.max(model.psi(x, e).abs());
    }
    Ok((e_on, e_off))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_profile_from_ode() {
        let r = profile_ode(|s: f64| (s.cos(), -s.sin()), (-PI / 2.0, PI / 2.0), 0.0, (-2.5, 2.5), 500, 1e-12).unwrap();
        for (k, g) in r.g.iter().enumerate() {
            let t = r.t0 + k as f64 * r.dt;
            assert!((g - g0(t)).abs() < 1e-8, "{t}");
        }
    }

    #[test]
    fn blow_up_leaves_domain() {
        // h' = 1 + h^2 leaves (-2, 2) in finite time
        let r = profile_ode(|s: f64| (1.0 + s * s, 2.0 * s), (-2.0, 2.0), 0.0, (-3.0, 3.0), 300, 1e-10);
        assert!(matches!(r, Err(Error::BlowUp { .. })));
    }

    #[test]
    fn cone_membership_is_homogeneous() {
        let c = ConeSet::new(0.3, Profile::Sphere);
        let x = [1.0, 0.1];
        let e = [0.95 * g0(0.1), 0.1];
        for r in [0.1, 1.0, 7.0] {
            assert_eq!(c.contains(x, geom::scale(r, e)), c.contains(x, e));
        }
    }
}
