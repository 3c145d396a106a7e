//! Finsler metric models on the torus and on the cylinder chart.
//!
//! Primal side: `F(x, v)`, `L = F^2 / 2`, Legendre map `v -> d_v L`.
//! Dual side (cylinder models): `H(x, eta)` with velocity `H * d_eta H`.
//!
//! ```text
//!   Flat        F = |v|
//!   Randers     F = |v| + <b, v>,              |b| < 1
//!   Conformal   F = g(x) |v|,   g = sum a_k cos(2 pi <k, x> + phi_k)
//!   Rotational  F = g(x2) |v|,  H = |eta| / g(x2)
//!   KatokZiller H = alpha |eta| / g(x2) + beta psi(x, eta)
//!               psi = chi(x2) f(eta1 / F_g(eta)) eta1
//! ```

use crate::error::{finite, Error, Result};
use crate::geom::{self, dot, norm, V2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::{PI, TAU};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    Torus,
    Cylinder,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentVec {
    pub x: V2,
    pub v: V2,
}

impl TangentVec {
    pub fn new(x: V2, v: V2) -> Self {
        Self { x, v }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierMode {
    pub k1: i32,
    pub k2: i32,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Sampled profile with derivative, evaluated by cubic Hermite interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub t0: f64,
    pub dt: f64,
    pub g: Vec<f64>,
    pub dg: Vec<f64>,
}

impl ProfileTable {
    pub fn domain(&self) -> (f64, f64) {
        (self.t0, self.t0 + self.dt * (self.g.len() - 1) as f64)
    }

    pub fn eval(&self, t: f64) -> (f64, f64) {
        let n = self.g.len();
        let u = (t - self.t0) / self.dt;
        if !(u >= 0.0 && u <= (n - 1) as f64) {
            return (f64::NAN, f64::NAN);
        }
        let i = (u.floor() as usize).min(n - 2);
        let s = u - i as f64;
        let (p0, p1) = (self.g[i], self.g[i + 1]);
        let (m0, m1) = (self.dg[i] * self.dt, self.dg[i + 1] * self.dt);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let g = h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1;
        let dh00 = 6.0 * s2 - 6.0 * s;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = -6.0 * s2 + 6.0 * s;
        let dh11 = 3.0 * s2 - 2.0 * s;
        let dg = (dh00 * p0 + dh10 * m0 + dh01 * p1 + dh11 * m1) / self.dt;
        (g, dg)
    }
}

/// Profile `g(x2)` of a rotational metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Round sphere, `g0(t) = 2 e^t / (1 + e^{2t})`.
    Sphere,
    Table(ProfileTable),
}

/// The round-sphere profile `2 e^t / (1 + e^{2t})`.
pub fn g0(t: f64) -> f64 {
    let e = (-t.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

pub fn g0_prime(t: f64) -> f64 {
    -g0(t) * t.tanh()
}

impl Profile {
    pub fn g_dg(&self, t: f64) -> (f64, f64) {
        match self {
            Profile::Sphere => (g0(t), g0_prime(t)),
            Profile::Table(tab) => tab.eval(t),
        }
    }

    pub fn g(&self, t: f64) -> f64 {
        self.g_dg(t).0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KzParams {
    pub alpha: f64,
    pub beta: f64,
    pub a0: f64,
    pub a1: f64,
    pub b: f64,
    pub profile: Profile,
    /// Half-width of the cylinder interval used for sampling.
    pub band: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    Flat,
    Randers { b: V2 },
    Conformal { modes: Vec<FourierMode> },
    Rotational { profile: Profile, band: f64 },
    KatokZiller(KzParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceConstants {
    pub c_f: f64,
    pub resolution: usize,
}

/// Smooth step, 0 for `u <= 0`, 1 for `u >= 1`, built from `exp(-1/u)`.
pub fn smooth_step(u: f64) -> f64 {
    fn phi(u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else {
            (-1.0 / u).exp()
        }
    }
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = phi(u);
        a / (a + phi(1.0 - u))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricModel {
    pub kind: MetricKind,
}

const FD_STEP: f64 = 1e-6;

impl MetricModel {
    pub fn new(kind: MetricKind) -> Result<Self> {
        let m = Self { kind };
        m.validate()?;
        Ok(m)
    }

    pub fn flat() -> Self {
        Self { kind: MetricKind::Flat }
    }

    pub fn randers(b: V2) -> Result<Self> {
        Self::new(MetricKind::Randers { b })
    }

    pub fn conformal(modes: Vec<FourierMode>) -> Result<Self> {
        Self::new(MetricKind::Conformal { modes })
    }

    /// Bump of height 1.5 over background 1 centred at (1/2, 1/2), plus a
    /// weak skew mode `0.2 sin(2 pi x1) sin(2 pi x2)`.
    pub fn bump() -> Self {
        Self::new(MetricKind::Conformal { modes: bump_modes(1.5, 0.2) }).expect("bump metric")
    }

    pub fn rotational_sphere(band: f64) -> Self {
        Self { kind: MetricKind::Rotational { profile: Profile::Sphere, band } }
    }

    pub fn katok_ziller(p: KzParams) -> Result<Self> {
        Self::new(MetricKind::KatokZiller(p))
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            MetricKind::Flat => "flat",
            MetricKind::Randers { .. } => "randers",
            MetricKind::Conformal { .. } => "conformal",
            MetricKind::Rotational { .. } => "rotational",
            MetricKind::KatokZiller(_) => "katok_ziller",
        }
    }

    pub fn chart(&self) -> Chart {
        match self.kind {
            MetricKind::Rotational { .. } | MetricKind::KatokZiller(_) => Chart::Cylinder,
            _ => Chart::Torus,
        }
    }

    pub fn require_torus(&self, op: &str) -> Result<()> {
        if self.chart() == Chart::Torus {
            Ok(())
        } else {
            Err(Error::ChartMismatch(format!("{op} needs a torus-chart metric, got {}", self.name())))
        }
    }

    /// Box `[lo, hi]` of base points used for sampling.
    pub fn sample_box(&self) -> (V2, V2) {
        match &self.kind {
            MetricKind::Rotational { band, .. } => ([0.0, -band], [TAU, *band]),
            MetricKind::KatokZiller(p) => ([0.0, -p.band], [TAU, p.band]),
            _ => ([0.0, 0.0], [1.0, 1.0]),
        }
    }

    /// Periods of the chart; the cylinder is periodic in `x1` only.
    pub fn period(&self) -> V2 {
        match self.chart() {
            Chart::Torus => [1.0, 1.0],
            Chart::Cylinder => [TAU, f64::INFINITY],
        }
    }

    pub fn hash_hex(&self) -> String {
        let s = serde_json::to_string(&self.kind).unwrap_or_default();
        let d = Sha256::digest(s.as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            MetricKind::Flat => Ok(()),
            MetricKind::Randers { b } => {
                if !geom::is_finite(*b) || norm(*b) >= 1.0 {
                    return Err(Error::Invalid(format!("Randers drift must satisfy |b| < 1, got {b:?}")));
                }
                Ok(())
            }
            MetricKind::Conformal { modes } => {
                if modes.is_empty() {
                    return Err(Error::Invalid("conformal metric needs at least one mode".into()));
                }
                let n = 64;
                for i in 0..n {
                    for j in 0..n {
                        let x = [i as f64 / n as f64, j as f64 / n as f64];
                        let g = self.conformal_g(x).0;
                        if !(g > 0.0) {
                            return Err(Error::DegenerateMetric { value: g, x });
                        }
                    }
                }
                Ok(())
            }
            MetricKind::Rotational { profile, band } => {
                if !(*band > 0.0) {
                    return Err(Error::Invalid("band must be positive".into()));
                }
                check_profile(profile, *band)
            }
            MetricKind::KatokZiller(p) => {
                if !(p.alpha >= 0.0) || !p.beta.is_finite() || p.alpha + p.beta.abs() == 0.0 {
                    return Err(Error::Invalid("need alpha >= 0 and a nonzero Hamiltonian".into()));
                }
                if !(0.0 < p.a0 && p.a0 < p.a1 && p.a1 < p.b) {
                    return Err(Error::Invalid(format!(
                        "need 0 < a0 < a1 < b, got {}, {}, {}",
                        p.a0, p.a1, p.b
                    )));
                }
                if !(p.band > 0.0) {
                    return Err(Error::Invalid("band must be positive".into()));
                }
                check_profile(&p.profile, p.band.max(p.b))?;
                for k in 0..64 {
                    let t = -p.b + 2.0 * p.b * k as f64 / 63.0;
                    let d = (p.profile.g(t) - g0(t)).abs();
                    if d > 1e-8 {
                        return Err(Error::Invalid(format!(
                            "profile differs from g0 by {d:e} at {t} inside [-b, b]"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Conformal factor and its gradient for the scalar models.
    pub fn conformal_g(&self, x: V2) -> (f64, V2) {
        match &self.kind {
            MetricKind::Flat | MetricKind::Randers { .. } => (1.0, [0.0, 0.0]),
            MetricKind::Conformal { modes } => {
                let mut g = 0.0;
                let mut dg = [0.0, 0.0];
                for m in modes {
                    let arg = TAU * (m.k1 as f64 * x[0] + m.k2 as f64 * x[1]) + m.phase;
                    g += m.amplitude * arg.cos();
                    let s = -m.amplitude * arg.sin() * TAU;
                    dg[0] += s * m.k1 as f64;
                    dg[1] += s * m.k2 as f64;
                }
                (g, dg)
            }
            MetricKind::Rotational { profile, .. } => {
                let (g, d) = profile.g_dg(x[1]);
                (g, [0.0, d])
            }
            MetricKind::KatokZiller(p) => {
                let (g, d) = p.profile.g_dg(x[1]);
                (g, [0.0, d])
            }
        }
    }

    /// `F(x, v)` without input checks.
    pub fn f(&self, x: V2, v: V2) -> f64 {
        match &self.kind {
            MetricKind::Flat => norm(v),
            MetricKind::Randers { b } => norm(v) + dot(*b, v),
            MetricKind::Conformal { .. } | MetricKind::Rotational { .. } => self.conformal_g(x).0 * norm(v),
            MetricKind::KatokZiller(_) => {
                if v == [0.0, 0.0] {
                    return 0.0;
                }
                match self.covector(x, v) {
                    Ok(eta) => self.hamiltonian(x, eta),
                    Err(_) => f64::NAN,
                }
            }
        }
    }

    pub fn eval_f(&self, w: &TangentVec) -> Result<f64> {
        if !geom::is_finite(w.x) || !geom::is_finite(w.v) {
            return Err(Error::NonFinite { context: "eval_F input".into() });
        }
        finite(self.f(w.x, w.v), "eval_F")
    }

    /// `(dF/dx, dF/dv)` at `v != 0`.
    pub fn grad_f(&self, x: V2, v: V2) -> (V2, V2) {
        let n = norm(v);
        match &self.kind {
            MetricKind::Flat => ([0.0, 0.0], [v[0] / n, v[1] / n]),
            MetricKind::Randers { b } => ([0.0, 0.0], [v[0] / n + b[0], v[1] / n + b[1]]),
            MetricKind::Conformal { .. } | MetricKind::Rotational { .. } => {
                let (g, dg) = self.conformal_g(x);
                ([dg[0] * n, dg[1] * n], [g * v[0] / n, g * v[1] / n])
            }
            MetricKind::KatokZiller(_) => match self.covector(x, v) {
                Ok(eta) => {
                    let f = self.hamiltonian(x, eta);
                    let (hx, _) = self.dual_grad(x, eta);
                    ([-hx[0], -hx[1]], [eta[0] / f, eta[1] / f])
                }
                Err(_) => ([f64::NAN; 2], [f64::NAN; 2]),
            },
        }
    }

    /// Legendre transform `d_v (F^2 / 2)`.
    pub fn legendre(&self, w: &TangentVec) -> Result<V2> {
        if w.v == [0.0, 0.0] {
            return Err(Error::ZeroVelocity);
        }
        if let MetricKind::KatokZiller(_) = self.kind {
            return self.covector(w.x, w.v);
        }
        let f = self.eval_f(w)?;
        let (_, fv) = self.grad_f(w.x, w.v);
        let p = [f * fv[0], f * fv[1]];
        if !geom::is_finite(p) {
            return Err(Error::NonFinite { context: "legendre".into() });
        }
        Ok(p)
    }

    /// Dual norm `H(x, eta)`.
    pub fn hamiltonian(&self, x: V2, eta: V2) -> f64 {
        match &self.kind {
            MetricKind::Flat => norm(eta),
            MetricKind::Randers { b } => randers_dual(*b, eta),
            MetricKind::Conformal { .. } | MetricKind::Rotational { .. } => norm(eta) / self.conformal_g(x).0,
            MetricKind::KatokZiller(p) => kz_h(p, x, eta),
        }
    }

    /// `(dH/dx, dH/deta)`.
    pub fn dual_grad(&self, x: V2, eta: V2) -> (V2, V2) {
        match &self.kind {
            MetricKind::KatokZiller(p) => {
                let h = |y: V2, e: V2| kz_h(p, y, e);
                let mut gx = [0.0; 2];
                let mut ge = [0.0; 2];
                for k in 0..2 {
                    let s = FD_STEP * x[k].abs().max(1.0);
                    let mut a = x;
                    let mut b = x;
                    a[k] += s;
                    b[k] -= s;
                    gx[k] = (h(a, eta) - h(b, eta)) / (2.0 * s);
                    let s = FD_STEP * norm(eta).max(1e-300);
                    let mut a = eta;
                    let mut b = eta;
                    a[k] += s;
                    b[k] -= s;
                    ge[k] = (h(x, a) - h(x, b)) / (2.0 * s);
                }
                (gx, ge)
            }
            MetricKind::Randers { b } => {
                // H(eta) is the root of |eta - H b| = H; implicit differentiation.
                let hh = randers_dual(*b, eta);
                let r = [eta[0] - hh * b[0], eta[1] - hh * b[1]];
                let den = hh + dot(r, *b);
                ([0.0, 0.0], [r[0] / den, r[1] / den])
            }
            _ => {
                let (g, dg) = self.conformal_g(x);
                let n = norm(eta);
                ([-n * dg[0] / (g * g), -n * dg[1] / (g * g)], [eta[0] / (n * g), eta[1] / (n * g)])
            }
        }
    }

    /// Velocity `H d_eta H` of the dual energy `H^2 / 2`.
    pub fn velocity(&self, x: V2, eta: V2) -> V2 {
        let h = self.hamiltonian(x, eta);
        let (_, he) = self.dual_grad(x, eta);
        [h * he[0], h * he[1]]
    }

    /// Inverse of [`Self::velocity`]: the covector with velocity `v`, by damped
    /// Newton iteration (tolerance 1e-10, at most 50 steps) for the models
    /// without a closed form.
    pub fn covector(&self, x: V2, v: V2) -> Result<V2> {
        if v == [0.0, 0.0] {
            return Err(Error::ZeroVelocity);
        }
        let p = match &self.kind {
            MetricKind::KatokZiller(p) => p,
            _ => {
                // closed-form models: the Legendre map of the primal side
                let f = self.f(x, v);
                let (_, fv) = self.grad_f(x, v);
                return Ok([f * fv[0], f * fv[1]]);
            }
        };
        let g = p.profile.g(x[1]);
        let a2 = if p.alpha > 0.0 { p.alpha * p.alpha } else { 1.0 };
        let mut eta = [g * g * v[0] / a2, g * g * v[1] / a2];
        let vn = norm(v);
        let tol = 1e-10 * vn.max(1e-300);
        let resid = |e: V2| {
            let w = self.velocity(x, e);
            [w[0] - v[0], w[1] - v[1]]
        };
        let mut r = resid(eta);
        let mut rn = norm(r);
        for _ in 0..50 {
            if rn <= tol {
                return Ok(eta);
            }
            let s = 1e-5 * norm(eta).max(1e-300);
            let mut jac = [[0.0; 2]; 2];
            for k in 0..2 {
                let mut a = eta;
                let mut b = eta;
                a[k] += s;
                b[k] -= s;
                let ra = self.velocity(x, a);
                let rb = self.velocity(x, b);
                jac[0][k] = (ra[0] - rb[0]) / (2.0 * s);
                jac[1][k] = (ra[1] - rb[1]) / (2.0 * s);
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if !(det.abs() > 0.0) {
                break;
            }
            let d = [
                (jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
                (-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
            ];
            let mut lam = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let cand = [eta[0] - lam * d[0], eta[1] - lam * d[1]];
                let rc = resid(cand);
                let rcn = norm(rc);
                if rcn < rn {
                    eta = cand;
                    r = rc;
                    rn = rcn;
                    accepted = true;
                    break;
                }
                lam *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        // finite differences put a floor near 1e-10 relative; accept a
        // residual slightly above the tolerance rather than fail
        if rn <= 1e3 * tol {
            Ok(eta)
        } else {
            Err(Error::NoConvergence { iterations: 50, residual: rn })
        }
    }

    /// Euler-Lagrange acceleration for the torus models.
    pub fn accel(&self, x: V2, v: V2) -> V2 {
        match &self.kind {
            MetricKind::Flat | MetricKind::Randers { .. } => [0.0, 0.0],
            _ => {
                let (g, dg) = self.conformal_g(x);
                let v2 = dot(v, v);
                let gv = dot(dg, v);
                [(dg[0] * v2 - 2.0 * gv * v[0]) / g, (dg[1] * v2 - 2.0 * gv * v[1]) / g]
            }
        }
    }

    /// Hessian of `F^2 / 2` in `v` by central differences of the Legendre map.
    pub fn hessian_l(&self, x: V2, v: V2, step: f64) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut a = v;
            let mut b = v;
            a[k] += step;
            b[k] -= step;
            let pa = self.legendre(&TangentVec::new(x, a)).unwrap_or([f64::NAN; 2]);
            let pb = self.legendre(&TangentVec::new(x, b)).unwrap_or([f64::NAN; 2]);
            h[0][k] = (pa[0] - pb[0]) / (2.0 * step);
            h[1][k] = (pa[1] - pb[1]) / (2.0 * step);
        }
        h
    }

    /// Smallest eigenvalue of the Hessian of `H^2 / 2` in `eta`.
    pub fn dual_min_eig(&self, x: V2, eta: V2) -> f64 {
        let s = 1e-4 * norm(eta);
        let e2 = |e: V2| 0.5 * self.hamiltonian(x, e).powi(2);
        let f0 = e2(eta);
        let mut h = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut pp = eta;
                let mut pm = eta;
                let mut mp = eta;
                let mut mm = eta;
                pp[i] += s;
                pp[j] += s;
                pm[i] += s;
                pm[j] -= s;
                mp[i] -= s;
                mp[j] += s;
                mm[i] -= s;
                mm[j] -= s;
                h[i][j] = if i == j {
                    let mut p = eta;
                    let mut m = eta;
                    p[i] += s;
                    m[i] -= s;
                    (e2(p) - 2.0 * f0 + e2(m)) / (s * s)
                } else {
                    (e2(pp) - e2(pm) - e2(mp) + e2(mm)) / (4.0 * s * s)
                };
            }
        }
        min_eig_sym(h)
    }

    /// Equivalence constant `c_F` from a grid of base points and unit vectors,
    /// with a 1.05 safety factor.
    pub fn estimate_cf(&self, resolution: usize) -> Result<EquivalenceConstants> {
        if resolution < 16 {
            return Err(Error::Invalid("c_F resolution must be at least 16".into()));
        }
        let (lo, hi) = self.sample_box();
        let mut worst: f64 = 1.0;
        for i in 0..resolution {
            for j in 0..resolution {
                let x = [
                    lo[0] + (hi[0] - lo[0]) * i as f64 / resolution as f64,
                    lo[1] + (hi[1] - lo[1]) * (j as f64 + 0.5) / resolution as f64,
                ];
                for k in 0..resolution {
                    let v = geom::unit(TAU * k as f64 / resolution as f64);
                    let f = self.f(x, v);
                    if !(f > 0.0) || !f.is_finite() {
                        return Err(Error::DegenerateMetric { value: f, x });
                    }
                    worst = worst.max(f).max(1.0 / f);
                }
            }
        }
        Ok(EquivalenceConstants { c_f: 1.05 * worst, resolution })
    }

    /// `max |F(v) - F(-v)|` over sampled unit vectors; zero for reversible metrics.
    pub fn reversibility_defect(&self, resolution: usize) -> f64 {
        let (lo, hi) = self.sample_box();
        let mut d: f64 = 0.0;
        for i in 0..resolution {
            for k in 0..resolution {
                let x = [
                    lo[0] + (hi[0] - lo[0]) * i as f64 / resolution as f64,
                    lo[1] + (hi[1] - lo[1]) * (k as f64 + 0.5) / resolution as f64,
                ];
                let v = geom::unit(PI * k as f64 / resolution as f64);
                d = d.max((self.f(x, v) - self.f(x, [-v[0], -v[1]])).abs());
            }
        }
        d
    }

    /// The cutoff term `psi` of a Katok-Ziller model (zero for other kinds).
    pub fn psi(&self, x: V2, eta: V2) -> f64 {
        match &self.kind {
            MetricKind::KatokZiller(p) => kz_psi(p, x, eta),
            _ => 0.0,
        }
    }
}

fn check_profile(profile: &Profile, band: f64) -> Result<()> {
    for k in 0..=64 {
        let t = -band + 2.0 * band * k as f64 / 64.0;
        let g = profile.g(t);
        if !(g > 0.0) {
            return Err(Error::DegenerateMetric { value: g, x: [0.0, t] });
        }
    }
    Ok(())
}

/// Fourier modes of the bump metric: `1 + (A/4)(1 - cos 2pi x1)(1 - cos 2pi x2)
/// + eps sin 2pi x1 sin 2pi x2`.
pub fn bump_modes(height: f64, skew: f64) -> Vec<FourierMode> {
    let a = height;
    let mode = |k1, k2, amplitude| FourierMode { k1, k2, amplitude, phase: 0.0 };
    vec![
        mode(0, 0, 1.0 + a / 4.0),
        mode(1, 0, -a / 4.0),
        mode(0, 1, -a / 4.0),
        mode(1, 1, a / 8.0 - skew / 2.0),
        mode(1, -1, a / 8.0 + skew / 2.0),
    ]
}

/// Dual of `|v| + <b, v>`: the unit ball `{F* <= 1}` is the disc `|eta - b| <= 1`.
pub fn randers_dual(b: V2, eta: V2) -> f64 {
    let bb = dot(b, b);
    let eb = dot(eta, b);
    let ee = dot(eta, eta);
    let a = 1.0 - bb;
    (-eb + (eb * eb + a * ee).sqrt()) / a
}

fn kz_psi(p: &KzParams, x: V2, eta: V2) -> f64 {
    if x[1].abs() > p.b {
        return 0.0;
    }
    let n = norm(eta);
    if n == 0.0 {
        return 0.0;
    }
    let g = p.profile.g(x[1]);
    let t = eta[0] * g / n;
    let lo = g0(p.a1);
    let hi = g0(p.a0);
    smooth_step((t - lo) / (hi - lo)) * eta[0]
}

fn kz_h(p: &KzParams, x: V2, eta: V2) -> f64 {
    let g = p.profile.g(x[1]);
    let fg = norm(eta) / g;
    let mut h = p.alpha * fg;
    if p.beta != 0.0 {
        h += p.beta * kz_psi(p, x, eta);
    }
    h
}

pub(crate) fn min_eig_sym(h: [[f64; 2]; 2]) -> f64 {
    let a = h[0][0];
    let d = h[1][1];
    let b = 0.5 * (h[0][1] + h[1][0]);
    let tr = a + d;
    let disc = ((a - d) * (a - d) + 4.0 * b * b).sqrt();
    0.5 * (tr - disc)
}
