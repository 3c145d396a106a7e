//! Heteroclinics between neighbouring periodic minimizers via the
//! asymptotic action `J`.
//!
//! With `h0 = z theta / |z|^2` (theta the period length) the action
//! `A = l_F - <h0, displacement>` vanishes on each periodic minimizer over a
//! full period, so truncated windows pinned to `q0(-n theta)` and
//! `q1(n theta)` give a convergent sequence of values.

use super::solver::{self, Ends, Solver};
use super::{zf, LiftedPath};
use crate::error::{Error, Result};
use crate::geom::{self, V2};
use crate::metrics::MetricModel;
use crate::par;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HetSign {
    /// From `q0` at `-inf` to `q1` at `+inf`.
    Plus,
    /// From `q1` at `-inf` to `q0` at `+inf`.
    Minus,
}

/// The closed strip between two periodic minimizers of class `z`, as graphs
/// `t = f(s)` in coordinates along and across `z`.
#[derive(Clone, Debug)]
pub struct Strip {
    pub zhat: V2,
    pub nhat: V2,
    pub zlen: f64,
    lower: Vec<(f64, f64)>,
    upper: Vec<(f64, f64)>,
}

fn graph_table(p: &LiftedPath, zhat: V2, nhat: V2, zlen: f64) -> Result<Vec<(f64, f64)>> {
    let pts: Vec<(f64, f64)> = p.loop_nodes().iter().map(|x| (geom::dot(*x, zhat), geom::dot(*x, nhat))).collect();
    for w in pts.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::ConstraintInfeasible("boundary minimizer is not a graph over its direction".into()));
        }
    }
    if !(pts[0].0 + zlen > pts[pts.len() - 1].0) {
        return Err(Error::ConstraintInfeasible("boundary minimizer is not a graph over its direction".into()));
    }
    Ok(pts)
}

fn interp(tab: &[(f64, f64)], zlen: f64, s: f64) -> f64 {
    let s0 = tab[0].0;
    let k = ((s - s0) / zlen).floor();
    let sr = s - k * zlen;
    let i = tab.partition_point(|p| p.0 <= sr);
    let last = tab[tab.len() - 1];
    let (a, b) = if i == 0 {
        ((last.0 - zlen, last.1), tab[0])
    } else if i == tab.len() {
        (last, (tab[0].0 + zlen, tab[0].1))
    } else {
        (tab[i - 1], tab[i])
    };
    let f = (sr - a.0) / (b.0 - a.0);
    a.1 + f * (b.1 - a.1)
}

impl Strip {
    pub fn new(q0: &LiftedPath, q1: &LiftedPath) -> Result<Self> {
        let z = q0.closed_class.ok_or_else(|| Error::Invalid("strip boundaries must be loops".into()))?;
        if q1.closed_class != Some(z) {
            return Err(Error::Invalid("strip boundaries must share their class".into()));
        }
        let zv = zf(z);
        let zlen = geom::norm(zv);
        let zhat = geom::scale(1.0 / zlen, zv);
        let nhat = geom::perp(zhat);
        let lower = graph_table(q0, zhat, nhat, zlen)?;
        let upper = graph_table(q1, zhat, nhat, zlen)?;
        let s = Self { zhat, nhat, zlen, lower, upper };
        let mut min_gap = f64::INFINITY;
        let mut max_gap = f64::NEG_INFINITY;
        for k in 0..512 {
            let sv = s.lower[0].0 + zlen * k as f64 / 512.0;
            let (lo, hi) = s.bounds(sv);
            min_gap = min_gap.min(hi - lo);
            max_gap = max_gap.max(hi - lo);
        }
        if max_gap < 1e-9 {
            return Err(Error::NoGap);
        }
        if min_gap <= 0.0 {
            return Err(Error::ConstraintInfeasible("boundary minimizers are not ordered".into()));
        }
        Ok(s)
    }

    pub fn coords(&self, x: V2) -> (f64, f64) {
        (geom::dot(x, self.zhat), geom::dot(x, self.nhat))
    }

    pub fn point(&self, s: f64, t: f64) -> V2 {
        geom::add(geom::scale(s, self.zhat), geom::scale(t, self.nhat))
    }

    pub fn bounds(&self, s: f64) -> (f64, f64) {
        (interp(&self.lower, self.zlen, s), interp(&self.upper, self.zlen, s))
    }

    /// Normalised transverse position: 0 on the lower and 1 on the upper
    /// boundary.
    pub fn u(&self, x: V2) -> f64 {
        let (s, t) = self.coords(x);
        let (lo, hi) = self.bounds(s);
        (t - lo) / (hi - lo)
    }

    pub fn at_u(&self, s: f64, u: f64) -> V2 {
        let (lo, hi) = self.bounds(s);
        self.point(s, lo + u * (hi - lo))
    }

    pub fn clamp(&self, x: V2) -> V2 {
        let (s, t) = self.coords(x);
        let (lo, hi) = self.bounds(s);
        if t < lo {
            self.point(s, lo)
        } else if t > hi {
            self.point(s, hi)
        } else {
            x
        }
    }
}

#[derive(Clone, Debug)]
pub struct HeteroclinicProblem {
    pub m: MetricModel,
    pub q0: LiftedPath,
    pub q1: LiftedPath,
    pub z: [i64; 2],
    /// Period length of the boundary minimizers.
    pub theta: f64,
    pub h0: V2,
    pub window: usize,
    pub sign: HetSign,
    pub strip: Strip,
}

impl HeteroclinicProblem {
    /// `q1` is resampled onto `q0`'s node count if they differ.
    pub fn new(m: &MetricModel, q0: &LiftedPath, q1: &LiftedPath, window: usize, sign: HetSign) -> Result<Self> {
        let strip = Strip::new(q0, q1)?;
        let z = q0.closed_class.unwrap();
        let n0 = q0.loop_nodes().len();
        let q1 = if q1.loop_nodes().len() == n0 {
            q1.clone()
        } else {
            LiftedPath::closed(solver::equidistribute_closed(m, q1.loop_nodes(), zf(z), n0), z)
        };
        let theta = q0.length(m);
        let zv = zf(z);
        let h0 = geom::scale(theta / geom::dot(zv, zv), zv);
        Ok(Self { m: m.clone(), q0: q0.clone(), q1, z, theta, h0, window: window.max(1), sign, strip })
    }

    pub fn with_sign(&self, sign: HetSign) -> Self {
        Self { sign, ..self.clone() }
    }

    fn ends(&self) -> (&LiftedPath, &LiftedPath) {
        match self.sign {
            HetSign::Plus => (&self.q0, &self.q1),
            HetSign::Minus => (&self.q1, &self.q0),
        }
    }

    /// Pinned endpoints of the window with `n` periods on each side.
    pub fn pins(&self, n: usize) -> (V2, V2) {
        let (a, b) = self.ends();
        let w = geom::scale(n as f64, zf(self.z));
        (geom::sub(a.nodes[0], w), geom::add(b.nodes[0], w))
    }

    /// The constant `b = (c_F^2 + 1)/2 + |h0|` of the endpoint estimates.
    pub fn b_constant(&self) -> Result<f64> {
        let cf = self.m.estimate_cf(32)?.c_f;
        Ok(0.5 * (cf * cf + 1.0) + geom::norm(self.h0))
    }

    /// Seed following the start curve, switching at `center` (in periods
    /// from the left pin) with smooth profile.
    pub fn seed(&self, n: usize, center: f64) -> Vec<V2> {
        let (a, b) = self.ends();
        let per = a.loop_nodes().len();
        let zv = zf(self.z);
        let total = 2 * n * per;
        (0..=total)
            .map(|k| {
                let period = (k / per) as f64 - n as f64;
                let j = k % per;
                let shift = geom::scale(period, zv);
                let pa = geom::add(a.loop_nodes()[j], shift);
                let pb = geom::add(b.loop_nodes()[j], shift);
                let x = k as f64 / per as f64 - center;
                let sig = 0.5 * (1.0 + (2.0 * x).tanh());
                let sig = if k == 0 { 0.0 } else if k == total { 1.0 } else { sig };
                geom::lerp(pa, pb, sig)
            })
            .collect()
    }
}

/// `J` of a path whose ends sit near the boundary curves, with the gaps to
/// the exact pins closed by straight segments.
pub fn asymptotic_action_j(p: &HeteroclinicProblem, c: &LiftedPath) -> Result<f64> {
    let m = &p.m;
    let (a, b) = p.ends();
    let zv = zf(p.z);
    let snap = |x: V2, base: V2| -> (V2, f64) {
        let k = (geom::dot(geom::sub(x, base), zv) / geom::dot(zv, zv)).round();
        let y = geom::add(base, geom::scale(k, zv));
        (y, geom::dist(x, y))
    };
    let first = c.nodes[0];
    let last = *c.nodes.last().unwrap();
    let (ps, ds) = snap(first, a.nodes[0]);
    let (pe, de) = snap(last, b.nodes[0]);
    let worst = ds.max(de);
    if worst > 1e-2 {
        return Err(Error::BadAsymptotics { distance: worst });
    }
    let act = |x: V2, y: V2| solver::seg_len(m, x, y) - geom::dot(p.h0, geom::sub(y, x));
    let mut j = c.action(m, p.h0);
    if ds > 0.0 {
        j += act(ps, first);
    }
    if de > 0.0 {
        j += act(last, pe);
    }
    Ok(j)
}

/// Smallest action of any sub-arc of the given paths: the observed constant
/// `B` in `A(c[a, b]) >= B`.
pub fn observed_lower_bound(m: &MetricModel, h0: V2, paths: &[&LiftedPath]) -> f64 {
    let mut best = 0.0f64;
    for p in paths {
        let mut acc = 0.0;
        let mut peak = 0.0f64;
        for w in p.nodes.windows(2) {
            acc += solver::seg_len(m, w[0], w[1]) - geom::dot(h0, geom::sub(w[1], w[0]));
            best = best.min(acc - peak);
            peak = peak.max(acc);
        }
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct HeteroclinicResult {
    pub sign: HetSign,
    pub path: LiftedPath,
    pub omega: f64,
    /// `(n, omega_n)` for each window tried.
    pub window_trace: Vec<(usize, f64)>,
    pub window: usize,
    pub residual: f64,
    pub converged: bool,
    /// Smallest normalised distance to either boundary over nodes more than
    /// one period away from the pins.
    pub interior_margin: f64,
    pub crossings: usize,
    pub b_constant: f64,
}

fn solve_window(p: &HeteroclinicProblem, n: usize, center: f64) -> WindowSolveOut {
    solve_window_with(p, p.seed(n, center), &[])
}

pub(crate) type Projector = Box<dyn Fn(V2) -> V2 + Sync + Send>;

/// Minimise `J` over a window of `n` periods, scanning switch phases.
pub(crate) fn best_over_phases(p: &HeteroclinicProblem, n: usize, phases: usize) -> (WindowSolveOut, f64) {
    let runs = par::map_range(phases, |i| {
        let center = n as f64 + i as f64 / phases as f64;
        (solve_window(p, n, center), center)
    });
    let mut best = None::<(WindowSolveOut, f64)>;
    for (r, c) in runs {
        if best.as_ref().map_or(true, |(b, _)| r.omega < b.omega) {
            best = Some((r, c));
        }
    }
    best.unwrap()
}

pub(crate) struct WindowSolveOut {
    pub nodes: Vec<V2>,
    pub omega: f64,
    pub residual: f64,
    pub converged: bool,
}

/// Heteroclinic minimizer of `J` in the strip for the problem's sign. The
/// window starts at `p.window` periods per side and doubles until the value
/// moves by at most `1e-5` when two periods are added.
pub fn heteroclinic(p: &HeteroclinicProblem) -> Result<HeteroclinicResult> {
    let mut n = p.window.max(8);
    let mut trace = Vec::new();
    loop {
        let (a, center) = best_over_phases(p, n, 8);
        let b = solve_window(p, n + 2, center + 2.0);
        trace.push((n, a.omega));
        trace.push((n + 2, b.omega));
        if (a.omega - b.omega).abs() <= 1e-5 {
            return finish(p, a, n, trace);
        }
        if n >= 64 {
            return Err(Error::NoConvergence { iterations: n, residual: (a.omega - b.omega).abs() });
        }
        n *= 2;
    }
}

fn finish(p: &HeteroclinicProblem, a: WindowSolveOut, n: usize, trace: Vec<(usize, f64)>) -> Result<HeteroclinicResult> {
    let per = p.q0.loop_nodes().len();
    let path = LiftedPath::open(a.nodes);
    let interior_margin = path.nodes[per..path.nodes.len() - per]
        .iter()
        .map(|x| {
            let u = p.strip.u(*x);
            u.min(1.0 - u)
        })
        .fold(f64::INFINITY, f64::min);
    let crossings = count_crossings(&path, &p.q0, n + 1) + count_crossings(&path, &p.q1, n + 1);
    Ok(HeteroclinicResult {
        sign: p.sign,
        path,
        omega: a.omega,
        window_trace: trace,
        window: n,
        residual: a.residual,
        converged: a.converged,
        interior_margin,
        crossings,
        b_constant: p.b_constant()?,
    })
}

/// Proper crossings between an open path and the loop `q` unrolled over
/// `2 reach + 1` periods around the origin.
pub fn count_crossings(c: &LiftedPath, q: &LiftedPath, reach: usize) -> usize {
    let z = zf(q.closed_class.expect("loop"));
    let un = q.unroll(2 * reach + 1).translate(geom::scale(-(reach as f64), z));
    polyline_crossings(&c.nodes, &un.nodes, 1e-12)
}

/// Number of proper segment crossings between two polylines.
pub fn polyline_crossings(a: &[V2], b: &[V2], tol: f64) -> usize {
    let bbox = |p: V2, q: V2| ([p[0].min(q[0]), p[1].min(q[1])], [p[0].max(q[0]), p[1].max(q[1])]);
    let mut n = 0;
    for s in a.windows(2) {
        let (alo, ahi) = bbox(s[0], s[1]);
        for t in b.windows(2) {
            let (blo, bhi) = bbox(t[0], t[1]);
            if ahi[0] < blo[0] || bhi[0] < alo[0] || ahi[1] < blo[1] || bhi[1] < alo[1] {
                continue;
            }
            if geom::segments_cross(s[0], s[1], t[0], t[1], tol) {
                n += 1;
            }
        }
    }
    n
}

pub(crate) fn solve_window_with(
    p: &HeteroclinicProblem,
    seed: Vec<V2>,
    walls: &[Projector],
) -> WindowSolveOut {
    let strip = &p.strip;
    let proj = |x: V2| -> V2 {
        let mut y = strip.clamp(x);
        for w in walls {
            y = w(y);
        }
        y
    };
    let mut nodes = seed;
    let mut s = Solver::new(&p.m, Ends::Pinned);
    s.project = Some(&proj);
    let rep = s.run(&mut nodes);
    let c = LiftedPath::open(nodes);
    let omega = c.action(&p.m, p.h0);
    WindowSolveOut { nodes: c.nodes, omega, residual: rep.residual, converged: rep.converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimizers::periodic_from_point;

    #[test]
    fn strip_coordinates() {
        let m = MetricModel::flat();
        let q0 = periodic_from_point(&m, [1, 0], 16, [0.0, 0.2]).unwrap().path;
        let q1 = q0.translate([0.0, 0.5]);
        let s = Strip::new(&q0, &q1).unwrap();
        assert!((s.u([0.3, 0.45]) - 0.5).abs() < 1e-12);
        assert_eq!(s.clamp([0.3, 0.9]), [0.3, 0.7]);
        assert!(matches!(Strip::new(&q0, &q0), Err(Error::NoGap)));
    }

    #[test]
    fn crossing_counter() {
        let a = [[0.0, 0.0], [1.0, 1.0]];
        let b = [[0.0, 1.0], [1.0, 0.0]];
        assert_eq!(polyline_crossings(&a, &b, 1e-12), 1);
        let c = [[0.0, 0.5], [1.0, 1.5]];
        assert_eq!(polyline_crossings(&a, &c, 1e-12), 0);
    }
}
