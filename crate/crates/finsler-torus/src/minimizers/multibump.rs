//! Multibump minimizers: `J`-minimizers forced through a finite sequence of
//! switches, alternating between the two boundary minimizers of a strip.
//!
//! A switch of sign `+` at shift `w` is represented by two walls in strip
//! coordinates `(s, u)`, placed around the translated test heteroclinic
//! `tau^w c+`: the left wall (where the test curve is a quarter across)
//! blocks the destination side beyond `u_c + delta`, the right wall (three
//! quarters across) blocks the origin side below `u_c - delta`. Switches of
//! sign `-` mirror this. Feasibility is a clamp on `u` for each `s`.

use super::heteroclinic::{solve_window_with, HetSign, HeteroclinicProblem, HeteroclinicResult, Projector};
use super::{zf, LiftedPath};
use crate::error::{Error, Result};
use crate::geom::{self, V2};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchSpec {
    /// Clearance between walls and test curve, in units of the strip width.
    pub delta: f64,
    /// Half-width of the switch region in periods; derived when absent.
    #[serde(default)]
    pub kappa: Option<usize>,
    pub nu: usize,
    /// Index `j` of the first window; switch `i` has sign `+` for even `i`.
    #[serde(default)]
    pub first_index: i64,
    /// Wall thickness along `z`, as a fraction of one period.
    #[serde(default = "default_wall")]
    pub wall_width: f64,
}

fn default_wall() -> f64 {
    0.08
}

impl Default for SwitchSpec {
    fn default() -> Self {
        Self { delta: 0.02, kappa: None, nu: 8, first_index: 0, wall_width: default_wall() }
    }
}

/// Profile `u_c(s)` of a test heteroclinic, relative to its own shift.
#[derive(Clone, Debug)]
struct TestCurve {
    s: Vec<f64>,
    u: Vec<f64>,
    sign: HetSign,
}

impl TestCurve {
    fn new(p: &HeteroclinicProblem, c: &LiftedPath, sign: HetSign) -> Self {
        let mut pts: Vec<(f64, f64)> = c.nodes.iter().map(|x| (p.strip.coords(*x).0, p.strip.u(*x).clamp(0.0, 1.0))).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { s: pts.iter().map(|q| q.0).collect(), u: pts.iter().map(|q| q.1).collect(), sign }
    }

    fn at(&self, s: f64) -> f64 {
        let n = self.s.len();
        if s <= self.s[0] {
            return self.u[0];
        }
        if s >= self.s[n - 1] {
            return self.u[n - 1];
        }
        let i = self.s.partition_point(|&x| x <= s);
        let f = (s - self.s[i - 1]) / (self.s[i] - self.s[i - 1]).max(1e-300);
        self.u[i - 1] + f * (self.u[i] - self.u[i - 1])
    }

    /// First `s` where the transition reaches `frac` of the way across.
    fn crossing(&self, frac: f64) -> f64 {
        let target = match self.sign {
            HetSign::Plus => frac,
            HetSign::Minus => 1.0 - frac,
        };
        for i in 1..self.s.len() {
            let (a, b) = (self.u[i - 1] - target, self.u[i] - target);
            if a == 0.0 {
                return self.s[i - 1];
            }
            if a * b <= 0.0 {
                return self.s[i - 1] + (self.s[i] - self.s[i - 1]) * a / (a - b);
            }
        }
        self.s[self.s.len() / 2]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Wall {
    pub switch: i64,
    pub s_lo: f64,
    pub s_hi: f64,
    /// `true`: blocks `u > u_c + delta`; `false`: blocks `u < u_c - delta`.
    pub from_above: bool,
    #[serde(skip)]
    shift: f64,
    #[serde(skip)]
    curve: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct MultibumpResult {
    pub path: LiftedPath,
    pub omega: f64,
    pub windows: Vec<i64>,
    pub signs: Vec<HetSign>,
    pub kappa: usize,
    pub nu: usize,
    pub delta: f64,
    /// Smallest distance in `u` from a node inside a wall band to the wall.
    pub clearance: f64,
    /// `true` when the minimizer stays off every wall.
    pub clear: bool,
    /// Arc length between the crossings of `tau^(w_j - kappa) sigma0` and
    /// `tau^(w_k + kappa) sigma0`.
    pub traversal: Option<f64>,
    pub residual: f64,
    pub converged: bool,
    pub walls: Vec<Wall>,
}

/// Switch machinery built once per strip from the two test heteroclinics.
pub struct Switches {
    problem: HeteroclinicProblem,
    curves: [TestCurve; 2],
    tests: [(LiftedPath, usize); 2],
    /// `s` coordinate of `sigma0`, the transversal through `q0(0)`.
    s_sigma: f64,
}

fn sign_of(i: i64) -> HetSign {
    if i.rem_euclid(2) == 0 {
        HetSign::Plus
    } else {
        HetSign::Minus
    }
}

impl Switches {
    /// `plus` and `minus` are the test heteroclinics of the strip.
    pub fn new(p: &HeteroclinicProblem, plus: &HeteroclinicResult, minus: &HeteroclinicResult) -> Result<Self> {
        let per = p.q0.loop_nodes().len();
        for r in [plus, minus] {
            if r.path.nodes.len() != 2 * r.window * per + 1 {
                return Err(Error::Invalid("test heteroclinic does not match the strip's node grid".into()));
            }
        }
        let base = p.with_sign(HetSign::Plus);
        let curves = [TestCurve::new(&base, &plus.path, HetSign::Plus), TestCurve::new(&base, &minus.path, HetSign::Minus)];
        let s_sigma = base.strip.coords(base.q0.nodes[0]).0;
        let tests = [(plus.path.clone(), plus.window), (minus.path.clone(), minus.window)];
        Ok(Self { problem: base, curves, tests, s_sigma })
    }

    fn curve(&self, sign: HetSign) -> usize {
        match sign {
            HetSign::Plus => 0,
            HetSign::Minus => 1,
        }
    }

    fn zlen(&self) -> f64 {
        self.problem.strip.zlen
    }

    fn walls_for(&self, i: i64, w: i64, spec: &SwitchSpec) -> [Wall; 2] {
        let sign = sign_of(i);
        let ci = self.curve(sign);
        let c = &self.curves[ci];
        let shift = w as f64 * self.zlen();
        let half = 0.5 * spec.wall_width * self.zlen();
        let left = c.crossing(0.25);
        let right = c.crossing(0.75);
        // destination side is above for `+`
        let plus = sign == HetSign::Plus;
        [
            Wall { switch: i, s_lo: left - half + shift, s_hi: left + half + shift, from_above: plus, shift, curve: ci },
            Wall { switch: i, s_lo: right - half + shift, s_hi: right + half + shift, from_above: !plus, shift, curve: ci },
        ]
    }

    /// Smallest `kappa` with every wall between `tau^-kappa sigma0` and
    /// `tau^kappa sigma0`, and both test curves within `1e-3` (in `u`) of
    /// their limits outside that range.
    pub fn derive_kappa(&self, spec: &SwitchSpec) -> usize {
        let zl = self.zlen();
        let mut k = 1usize;
        let walls = self.walls_for(0, 0, spec).into_iter().chain(self.walls_for(1, 0, spec));
        for wl in walls {
            let reach = (wl.s_lo - self.s_sigma).abs().max((wl.s_hi - self.s_sigma).abs());
            k = k.max((reach / zl).ceil() as usize);
        }
        for c in &self.curves {
            let (u0, u1) = match c.sign {
                HetSign::Plus => (0.0, 1.0),
                HetSign::Minus => (1.0, 0.0),
            };
            while k < 64 {
                let l = c.at(self.s_sigma - k as f64 * zl);
                let r = c.at(self.s_sigma + k as f64 * zl);
                if (l - u0).abs() <= 1e-3 && (r - u1).abs() <= 1e-3 {
                    break;
                }
                k += 1;
            }
        }
        k
    }

    fn wall_bound(&self, wl: &Wall, s: f64, delta: f64) -> f64 {
        let uc = self.curves[wl.curve].at(s - wl.shift);
        if wl.from_above {
            uc + delta
        } else {
            uc - delta
        }
    }
}

/// Minimise `J` over paths through the switches at shifts `windows`,
/// switch `i` (counted from `spec.first_index`) having sign `+` for even `i`.
pub fn multibump(sw: &Switches, windows: &[i64], spec: &SwitchSpec) -> Result<MultibumpResult> {
    if windows.is_empty() {
        return Err(Error::Invalid("need at least one window".into()));
    }
    if !(spec.delta > 0.0 && spec.delta < 0.25) {
        return Err(Error::ConstraintInfeasible(format!("delta = {} leaves no corridor", spec.delta)));
    }
    if !(spec.wall_width > 0.0 && spec.wall_width < 0.5) {
        return Err(Error::Invalid("wall width must lie in (0, 0.5) periods".into()));
    }
    let kappa = spec.kappa.unwrap_or_else(|| sw.derive_kappa(spec));
    for w in windows.windows(2) {
        if w[1] < w[0] + 2 * kappa as i64 + spec.nu as i64 {
            return Err(Error::Invalid(format!(
                "windows {} and {} closer than 2 kappa + nu = {}",
                w[0],
                w[1],
                2 * kappa + spec.nu
            )));
        }
    }
    let p = &sw.problem;
    let j = spec.first_index;
    let k = j + windows.len() as i64 - 1;
    let walls: Vec<Wall> = windows.iter().enumerate().flat_map(|(n, &w)| sw.walls_for(j + n as i64, w, spec)).collect();
    for wl in &walls {
        let mid = 0.5 * (wl.s_lo + wl.s_hi);
        let b = sw.wall_bound(wl, mid, spec.delta);
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::ConstraintInfeasible(format!("wall of switch {} leaves the strip", wl.switch)));
        }
    }
    let zv = zf(p.z);
    let zl = sw.zlen();
    let n_side = sw.tests.iter().map(|t| t.1).max().unwrap().max(kappa + 8) as i64;
    let q_of = |i: i64| if i.rem_euclid(2) == 0 { &p.q0 } else { &p.q1 };
    let start = geom::add(q_of(j).nodes[0], geom::scale((windows[0] - n_side) as f64, zv));
    let end = geom::add(q_of(k + 1).nodes[0], geom::scale((windows[windows.len() - 1] + n_side) as f64, zv));

    // seed: in the zone of switch i use the translated test curve's nodes
    let per = p.q0.loop_nodes().len();
    let first_period = windows[0] - n_side;
    let periods = (windows[windows.len() - 1] + n_side - first_period) as usize;
    let mids: Vec<f64> = windows.windows(2).map(|w| 0.5 * (w[0] + w[1]) as f64).collect();
    let mut seed = Vec::with_capacity(periods * per + 1);
    for kk in 0..=periods * per {
        let period = first_period + (kk / per) as i64;
        let jn = kk % per;
        let zone = mids.partition_point(|&e| e <= period as f64 + jn as f64 / per as f64);
        let i = j + zone as i64;
        let w = windows[zone];
        let (c, nc) = &sw.tests[sw.curve(sign_of(i))];
        let rel = period - (w - *nc as i64);
        let x = if rel >= 0 && ((rel as usize) * per + jn) < c.nodes.len() {
            geom::add(c.nodes[rel as usize * per + jn], geom::scale(w as f64, zv))
        } else {
            let q = if rel < 0 { q_of(i) } else { q_of(i + 1) };
            geom::add(q.loop_nodes()[jn], geom::scale(period as f64, zv))
        };
        seed.push(x);
    }
    seed[0] = start;
    seed[periods * per] = end;

    let strip = p.strip.clone();
    let shared = Arc::new((walls.clone(), spec.delta));
    let sw_curves = sw.curves.clone();
    let wall_proj: Projector = {
        let shared = shared.clone();
        Box::new(move |x: V2| -> V2 {
            let (s, t) = strip.coords(x);
            let (lo, hi) = strip.bounds(s);
            let mut u = (t - lo) / (hi - lo);
            for wl in shared.0.iter() {
                if s >= wl.s_lo && s <= wl.s_hi {
                    let uc = sw_curves[wl.curve].at(s - wl.shift);
                    if wl.from_above {
                        u = u.min(uc + shared.1);
                    } else {
                        u = u.max(uc - shared.1);
                    }
                }
            }
            let u = u.clamp(0.0, 1.0);
            strip.point(s, lo + u * (hi - lo))
        })
    };
    let out = solve_window_with(p, seed, std::slice::from_ref(&wall_proj));
    let path = LiftedPath::open(out.nodes);

    let mut clearance = f64::INFINITY;
    for x in &path.nodes {
        let (s, _) = p.strip.coords(*x);
        let u = p.strip.u(*x);
        for wl in &walls {
            if s >= wl.s_lo && s <= wl.s_hi {
                let b = sw.wall_bound(wl, s, spec.delta);
                let gap = if wl.from_above { b - u } else { u - b };
                clearance = clearance.min(gap);
            }
        }
    }
    let traversal = traversal_length(p, &path, sw.s_sigma + (windows[0] - kappa as i64) as f64 * zl, sw.s_sigma + (windows[windows.len() - 1] + kappa as i64) as f64 * zl);
    Ok(MultibumpResult {
        omega: out.omega,
        windows: windows.to_vec(),
        signs: (j..=k).map(sign_of).collect(),
        kappa,
        nu: spec.nu,
        delta: spec.delta,
        clear: clearance > 1e-9,
        clearance,
        traversal,
        residual: out.residual,
        converged: out.converged,
        walls,
        path,
    })
}

/// F-arc-length between the first crossings of `s = a` and `s = b`.
fn traversal_length(p: &HeteroclinicProblem, c: &LiftedPath, a: f64, b: f64) -> Option<f64> {
    let arc = c.arclength(&p.m);
    let cross = |target: f64| -> Option<f64> {
        for i in 1..c.nodes.len() {
            let s0 = p.strip.coords(c.nodes[i - 1]).0;
            let s1 = p.strip.coords(c.nodes[i]).0;
            if (s0 - target) * (s1 - target) <= 0.0 && s1 != s0 {
                let f = (target - s0) / (s1 - s0);
                return Some(arc[i - 1] + f * (arc[i] - arc[i - 1]));
            }
        }
        None
    };
    Some(cross(b)? - cross(a)?)
}

/// Double `nu` from `spec.nu` until a two-switch multibump at the minimal
/// spacing stays clear of its walls.
pub fn search_parameters(sw: &Switches, spec: &SwitchSpec, max_nu: usize) -> Result<(SwitchSpec, MultibumpResult)> {
    let mut s = spec.clone();
    let kappa = s.kappa.unwrap_or_else(|| sw.derive_kappa(&s));
    s.kappa = Some(kappa);
    loop {
        let gap = 2 * kappa as i64 + s.nu as i64;
        let r = multibump(sw, &[0, gap], &s)?;
        if r.clear {
            return Ok((s, r));
        }
        if s.nu * 2 > max_nu {
            return Err(Error::ConstraintInfeasible(format!(
                "no wall-free multibump up to nu = {} (clearance {:e})",
                s.nu, r.clearance
            )));
        }
        s.nu *= 2;
    }
}

/// Least-squares fit `T = C0 + C1 x` with its coefficient of determination.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let c1 = sxy / sxx;
    let c0 = my - c1 * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - c0 - c1 * a).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (c0, c1, r2)
}
