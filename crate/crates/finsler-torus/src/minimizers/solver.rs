//! Polyline length minimisation on node normal offsets.
//!
//! Unknowns are scalar offsets `s_i` along frozen node normals. Search
//! directions come from Polak-Ribiere+ conjugate gradients preconditioned by
//! the (cyclic) tridiagonal Hessian of the discrete length, which makes the
//! iteration behave like a damped Newton method near the minimum.

use crate::geom::{self, V2};
use crate::metrics::MetricModel;

/// Per-node projection onto a feasible set; returns the projected point.
pub type Projector<'a> = &'a (dyn Fn(V2) -> V2 + Sync);

#[derive(Clone, Copy, Debug)]
pub enum Ends {
    /// `nodes[N] = nodes[0] + shift`; all stored nodes are free.
    Closed(V2),
    /// First and last nodes are fixed.
    Pinned,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub length: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Length after every accepted step.
    pub history: Vec<f64>,
    /// Nodes moved by the projector at the last evaluation.
    pub active: usize,
}

pub struct Solver<'a> {
    pub m: &'a MetricModel,
    pub ends: Ends,
    pub project: Option<Projector<'a>>,
    pub tol: f64,
    pub max_iter: usize,
}

/// F-length of the chord `a -> b` (8-point Gauss-Legendre).
pub fn seg_len(m: &MetricModel, a: V2, b: V2) -> f64 {
    let d = geom::sub(b, a);
    geom::GL8.iter().map(|&(t, w)| w * m.f(geom::lerp(a, b, t), d)).sum()
}

/// Chord length with its gradients in both endpoints.
pub fn seg_grad(m: &MetricModel, a: V2, b: V2) -> (f64, V2, V2) {
    let d = geom::sub(b, a);
    if d == [0.0, 0.0] {
        return (0.0, [0.0, 0.0], [0.0, 0.0]);
    }
    let mut l = 0.0;
    let mut ga = [0.0, 0.0];
    let mut gb = [0.0, 0.0];
    for &(t, w) in geom::GL8.iter() {
        let x = geom::lerp(a, b, t);
        l += w * m.f(x, d);
        let (fx, fv) = m.grad_f(x, d);
        for k in 0..2 {
            ga[k] += w * ((1.0 - t) * fx[k] - fv[k]);
            gb[k] += w * (t * fx[k] + fv[k]);
        }
    }
    (l, ga, gb)
}

/// Length of an open polyline.
pub fn poly_len(m: &MetricModel, nodes: &[V2]) -> f64 {
    nodes.windows(2).map(|w| seg_len(m, w[0], w[1])).sum()
}

/// Cholesky factor of a symmetric cyclic tridiagonal matrix with diagonal
/// `a`, superdiagonal `b` and corner entry `c = A[0][n-1]`.
struct CyclicChol {
    d: Vec<f64>,
    e: Vec<f64>,
    r: Vec<f64>,
}

impl CyclicChol {
    fn new(a: &[f64], b: &[f64], c: f64) -> Option<Self> {
        let n = a.len();
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if n == 1 {
            return ok(a[0]).then(|| Self { d: vec![a[0].sqrt()], e: vec![], r: vec![] });
        }
        if n == 2 {
            let off = b[0] + c;
            let d0 = a[0].sqrt();
            let l10 = off / d0;
            let p = a[1] - l10 * l10;
            return (ok(a[0]) && ok(p)).then(|| Self { d: vec![d0, p.sqrt()], e: vec![], r: vec![l10] });
        }
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n.saturating_sub(2)];
        let mut r = vec![0.0; n - 1];
        if !ok(a[0]) {
            return None;
        }
        d[0] = a[0].sqrt();
        r[0] = c / d[0];
        if n > 2 {
            e[0] = b[0] / d[0];
        }
        for i in 1..n - 1 {
            let p = a[i] - e[i - 1] * e[i - 1];
            if !ok(p) {
                return None;
            }
            d[i] = p.sqrt();
            if i < n - 2 {
                e[i] = b[i] / d[i];
                r[i] = -r[i - 1] * e[i - 1] / d[i];
            } else {
                r[i] = (b[i] - r[i - 1] * e[i - 1]) / d[i];
            }
        }
        let p = a[n - 1] - r.iter().map(|x| x * x).sum::<f64>();
        if !ok(p) {
            return None;
        }
        d[n - 1] = p.sqrt();
        Some(Self { d, e, r })
    }

    fn solve(&self, g: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        if n == 1 {
            return vec![g[0] / (self.d[0] * self.d[0])];
        }
        if n == 2 {
            let y0 = g[0] / self.d[0];
            let y1 = (g[1] - self.r[0] * y0) / self.d[1];
            let x1 = y1 / self.d[1];
            let x0 = (y0 - self.r[0] * x1) / self.d[0];
            return vec![x0, x1];
        }
        let mut y = vec![0.0; n];
        y[0] = g[0] / self.d[0];
        for i in 1..n - 1 {
            y[i] = (g[i] - self.e[i - 1] * y[i - 1]) / self.d[i];
        }
        let s: f64 = (0..n - 1).map(|i| self.r[i] * y[i]).sum();
        y[n - 1] = (g[n - 1] - s) / self.d[n - 1];
        let mut x = vec![0.0; n];
        x[n - 1] = y[n - 1] / self.d[n - 1];
        x[n - 2] = (y[n - 2] - self.r[n - 2] * x[n - 1]) / self.d[n - 2];
        for i in (0..n - 2).rev() {
            x[i] = (y[i] - self.e[i] * x[i + 1] - self.r[i] * x[n - 1]) / self.d[i];
        }
        x
    }
}

impl<'a> Solver<'a> {
    pub fn new(m: &'a MetricModel, ends: Ends) -> Self {
        Self { m, ends, project: None, tol: 1e-8, max_iter: 10_000 }
    }

    fn free_range(&self, n: usize) -> std::ops::Range<usize> {
        match self.ends {
            Ends::Closed(_) => 0..n,
            Ends::Pinned => 1..n - 1,
        }
    }

    /// Node `i` of the closed curve extended by its class shift.
    fn node(&self, nodes: &[V2], i: usize) -> V2 {
        match self.ends {
            Ends::Closed(z) if i >= nodes.len() => geom::add(nodes[i - nodes.len()], z),
            _ => nodes[i],
        }
    }

    fn prev(&self, nodes: &[V2], i: usize) -> V2 {
        match self.ends {
            Ends::Closed(z) if i == 0 => geom::sub(nodes[nodes.len() - 1], z),
            _ => nodes[i - 1],
        }
    }

    fn num_segments(&self, n: usize) -> usize {
        match self.ends {
            Ends::Closed(_) => n,
            Ends::Pinned => n - 1,
        }
    }

    pub fn length(&self, nodes: &[V2]) -> f64 {
        (0..self.num_segments(nodes.len())).map(|k| seg_len(self.m, self.node(nodes, k), self.node(nodes, k + 1))).sum()
    }

    fn gradient(&self, nodes: &[V2]) -> (f64, Vec<V2>) {
        let n = nodes.len();
        let mut g = vec![[0.0, 0.0]; n];
        let mut l = 0.0;
        for k in 0..self.num_segments(n) {
            let (sl, ga, gb) = seg_grad(self.m, self.node(nodes, k), self.node(nodes, k + 1));
            l += sl;
            g[k] = geom::add(g[k], ga);
            let kb = (k + 1) % n;
            g[kb] = geom::add(g[kb], gb);
        }
        (l, g)
    }

    fn normals(&self, nodes: &[V2]) -> Vec<V2> {
        let n = nodes.len();
        (0..n)
            .map(|i| {
                let (a, b) = match self.ends {
                    Ends::Closed(_) => (self.prev(nodes, i), self.node(nodes, i + 1)),
                    Ends::Pinned => (nodes[i.saturating_sub(1)], nodes[(i + 1).min(n - 1)]),
                };
                let t = geom::sub(b, a);
                let l = geom::norm(t);
                if l == 0.0 {
                    [0.0, 1.0]
                } else {
                    geom::perp(geom::scale(1.0 / l, t))
                }
            })
            .collect()
    }

    /// Tridiagonal Hessian of the length in the free normal offsets, by
    /// central differences of the analytic chord gradients.
    fn hessian(&self, nodes: &[V2], nrm: &[V2]) -> (Vec<f64>, Vec<f64>, f64) {
        let n = nodes.len();
        let fr = self.free_range(n);
        let nf = fr.len();
        let mut a = vec![0.0; nf];
        let mut b = vec![0.0; nf.saturating_sub(1)];
        let mut c = 0.0;
        let idx = |i: usize| -> Option<usize> { fr.contains(&i).then(|| i - fr.start) };
        for k in 0..self.num_segments(n) {
            let ia = k;
            let ib = (k + 1) % n;
            let pa = self.node(nodes, k);
            let pb = self.node(nodes, k + 1);
            let h = 1e-5 * geom::dist(pa, pb).max(1e-12);
            let (na, nb) = (nrm[ia], nrm[ib]);
            let ga = |x: V2, y: V2| seg_grad(self.m, x, y);
            let (_, ga_p, gb_p) = ga(geom::add(pa, geom::scale(h, na)), pb);
            let (_, ga_m, gb_m) = ga(geom::sub(pa, geom::scale(h, na)), pb);
            let (_, _, gb_pb) = ga(pa, geom::add(pb, geom::scale(h, nb)));
            let (_, _, gb_mb) = ga(pa, geom::sub(pb, geom::scale(h, nb)));
            let haa = geom::dot(geom::sub(ga_p, ga_m), na) / (2.0 * h);
            let hab = geom::dot(geom::sub(gb_p, gb_m), nb) / (2.0 * h);
            let hbb = geom::dot(geom::sub(gb_pb, gb_mb), nb) / (2.0 * h);
            let (ua, ub) = (idx(ia), idx(ib));
            if let Some(u) = ua {
                a[u] += haa;
            }
            if let Some(u) = ub {
                a[u] += hbb;
            }
            if let (Some(u), Some(v)) = (ua, ub) {
                if v == u + 1 {
                    b[u] += hab;
                } else if u == nf - 1 && v == 0 {
                    c += hab;
                }
            }
        }
        (a, b, c)
    }

    fn factor(a: &[f64], b: &[f64], c: f64) -> CyclicChol {
        let scale = a.iter().map(|x| x.abs()).sum::<f64>() / a.len() as f64;
        let mut mu = 0.0;
        loop {
            let shifted: Vec<f64> = a.iter().map(|x| x + mu).collect();
            if let Some(f) = CyclicChol::new(&shifted, b, c) {
                return f;
            }
            mu = if mu == 0.0 { 1e-8 * scale.max(1e-300) } else { mu * 10.0 };
        }
    }

    fn apply(&self, nodes: &[V2], nrm: &[V2], dir: &[f64], t: f64) -> (Vec<V2>, usize) {
        let fr = self.free_range(nodes.len());
        let mut out = nodes.to_vec();
        let mut active = 0;
        for (u, i) in fr.enumerate() {
            let p = geom::add(nodes[i], geom::scale(t * dir[u], nrm[i]));
            out[i] = match self.project {
                Some(pr) => {
                    let q = pr(p);
                    if q != p {
                        active += 1;
                    }
                    q
                }
                None => p,
            };
        }
        (out, active)
    }

    /// Normal gradient, its sup norm over nodes not held by the constraint,
    /// and the held mask.
    fn projected(&self, nodes: &[V2], g: &[V2], nrm: &[V2]) -> (Vec<f64>, f64, Vec<bool>) {
        let fr = self.free_range(nodes.len());
        let mut res: f64 = 0.0;
        let mut held = Vec::with_capacity(fr.len());
        let gp: Vec<f64> = fr
            .map(|i| {
                let v = geom::dot(g[i], nrm[i]);
                let h = match self.project {
                    Some(pr) => {
                        let p = geom::sub(nodes[i], geom::scale(1e-9 * v.signum(), nrm[i]));
                        geom::dist(pr(p), p) > 1e-12
                    }
                    None => false,
                };
                if !h {
                    res = res.max(v.abs());
                }
                held.push(h);
                v
            })
            .collect();
        (gp, res, held)
    }

    /// Largest step factor keeping every node within a quarter of its
    /// shorter adjacent chord, which rules out folds.
    fn step_cap(&self, nodes: &[V2], dir: &[f64]) -> f64 {
        let fr = self.free_range(nodes.len());
        let mut cap = f64::INFINITY;
        for (u, i) in fr.enumerate() {
            let a = match self.ends {
                Ends::Closed(_) => self.prev(nodes, i),
                Ends::Pinned => nodes[i - 1],
            };
            let b = self.node(nodes, i + 1);
            let h = geom::dist(a, nodes[i]).min(geom::dist(nodes[i], b));
            if dir[u] != 0.0 {
                cap = cap.min(0.25 * h / dir[u].abs());
            }
        }
        cap.min(1.0)
    }

    /// Descend from `nodes` in place.
    pub fn run(&self, nodes: &mut Vec<V2>) -> SolveReport {
        assert!(nodes.len() >= 3, "polyline too short");
        if let Some(pr) = self.project {
            let fr = self.free_range(nodes.len());
            for i in fr {
                nodes[i] = pr(nodes[i]);
            }
        }
        let (mut len, mut g) = self.gradient(nodes);
        let mut history = vec![len];
        let mut prev: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None; // (grad, precond grad, dir)
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        let mut converged = false;
        let mut active = 0;
        while iterations < self.max_iter {
            let nrm = self.normals(nodes);
            let (mut gp, res, held) = self.projected(nodes, &g, &nrm);
            residual = res;
            if residual <= self.tol {
                converged = true;
                break;
            }
            iterations += 1;
            // held nodes drop out of the Newton system
            let (mut a, mut b, mut c) = self.hessian(nodes, &nrm);
            let nf = a.len();
            for u in (0..nf).filter(|&u| held[u]) {
                gp[u] = 0.0;
                a[u] = a[u].abs().max(1.0);
                if u > 0 {
                    b[u - 1] = 0.0;
                }
                if u + 1 < nf {
                    b[u] = 0.0;
                }
                if u == 0 || u == nf - 1 {
                    c = 0.0;
                }
            }
            let z = Self::factor(&a, &b, c).solve(&gp);
            let mut dir: Vec<f64> = z.iter().map(|x| -x).collect();
            if let Some((g0, z0, d0)) = &prev {
                let num: f64 = z.iter().zip(gp.iter().zip(g0)).map(|(zi, (gi, g0i))| zi * (gi - g0i)).sum();
                let den: f64 = z0.iter().zip(g0).map(|(a, b)| a * b).sum();
                let beta = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
                for (u, (d, p)) in dir.iter_mut().zip(d0).enumerate() {
                    if !held[u] {
                        *d += beta * p;
                    }
                }
            }
            let mut slope: f64 = dir.iter().zip(&gp).map(|(d, g)| d * g).sum();
            if !(slope < 0.0) {
                dir = z.iter().map(|x| -x).collect();
                slope = dir.iter().zip(&gp).map(|(d, g)| d * g).sum();
                if !(slope < 0.0) {
                    dir = gp.iter().map(|x| -x).collect();
                    slope = -gp.iter().map(|x| x * x).sum::<f64>();
                }
            }
            // backtracking on the exact length, with a rounding-aware
            // acceptance once decreases fall below the noise floor
            let noise = 4.0 * f64::EPSILON * len.abs() * (nodes.len() as f64).sqrt();
            let mut t = self.step_cap(nodes, &dir);
            let mut accepted = None;
            for _ in 0..60 {
                let (trial, act) = self.apply(nodes, &nrm, &dir, t);
                let (lt, gt) = self.gradient(&trial);
                if lt <= len + 1e-4 * t * slope {
                    accepted = Some((trial, lt, gt, act));
                    break;
                }
                if lt <= len + noise && (-t * slope) <= noise {
                    let (_, rt, _) = self.projected(&trial, &gt, &self.normals(&trial));
                    if rt < residual {
                        accepted = Some((trial, lt.min(len), gt, act));
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((trial, lt, gt, act)) = accepted else { break };
            *nodes = trial;
            len = lt;
            g = gt;
            active = act;
            history.push(len);
            prev = Some((gp, z, dir.iter().map(|d| d * t).collect()));
        }
        if !converged {
            let nrm = self.normals(nodes);
            residual = self.projected(nodes, &g, &nrm).1;
            converged = residual <= self.tol;
        }
        SolveReport { length: len, residual, iterations, converged, history, active }
    }
}

/// Resample a closed curve (class shift `z`) to `n` nodes equally spaced in
/// F-length, keeping the first node.
pub fn equidistribute_closed(m: &MetricModel, nodes: &[V2], z: V2, n: usize) -> Vec<V2> {
    let mut pts = nodes.to_vec();
    pts.push(geom::add(nodes[0], z));
    resample_by(&pts, n, |a, b| seg_len(m, a, b))
}

/// Resample an open polyline to `n + 1` nodes (first and last kept), equally
/// spaced for the given chord measure. Returns `n` nodes dropping the last,
/// which suits closed curves.
pub fn resample_by(pts: &[V2], n: usize, measure: impl Fn(V2, V2) -> f64) -> Vec<V2> {
    let seg: Vec<f64> = pts.windows(2).map(|w| measure(w[0], w[1])).collect();
    let total: f64 = seg.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    let mut acc = 0.0;
    for j in 0..n {
        let target = total * j as f64 / n as f64;
        while k < seg.len() - 1 && acc + seg[k] < target {
            acc += seg[k];
            k += 1;
        }
        let f = if seg[k] > 0.0 { ((target - acc) / seg[k]).clamp(0.0, 1.0) } else { 0.0 };
        out.push(geom::lerp(pts[k], pts[k + 1], f));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_cholesky_solves() {
        let n = 7;
        let a: Vec<f64> = (0..n).map(|i| 4.0 + i as f64 * 0.1).collect();
        let b: Vec<f64> = (0..n - 1).map(|i| -1.0 + 0.05 * i as f64).collect();
        let c = -0.7;
        let f = CyclicChol::new(&a, &b, c).unwrap();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&rhs);
        for i in 0..n {
            let mut s = a[i] * x[i];
            if i + 1 < n {
                s += b[i] * x[i + 1];
            }
            if i > 0 {
                s += b[i - 1] * x[i - 1];
            }
            if i == 0 {
                s += c * x[n - 1];
            }
            if i == n - 1 {
                s += c * x[0];
            }
            assert!((s - rhs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn open_tridiagonal_solves() {
        let a = vec![2.0; 5];
        let b = vec![-1.0; 4];
        let f = CyclicChol::new(&a, &b, 0.0).unwrap();
        let x = f.solve(&[1.0, 0.0, 0.0, 0.0, 1.0]);
        for v in x {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn seg_grad_matches_differences() {
        let m = MetricModel::bump();
        let (a, b) = ([0.3, 0.4], [0.34, 0.47]);
        let (_, ga, gb) = seg_grad(&m, a, b);
        let h = 1e-7;
        for k in 0..2 {
            let mut ap = a;
            ap[k] += h;
            let mut am = a;
            am[k] -= h;
            let fd = (seg_len(&m, ap, b) - seg_len(&m, am, b)) / (2.0 * h);
            assert!((fd - ga[k]).abs() < 1e-7);
            let mut bp = b;
            bp[k] += h;
            let mut bm = b;
            bm[k] -= h;
            let fd = (seg_len(&m, a, bp) - seg_len(&m, a, bm)) / (2.0 * h);
            assert!((fd - gb[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn pinned_flat_becomes_straight() {
        let m = MetricModel::flat();
        let mut nodes: Vec<V2> = (0..=20).map(|i| [i as f64 / 20.0, if i % 20 == 0 { 0.0 } else { 0.02 * (i as f64).sin() }]).collect();
        let r = Solver::new(&m, Ends::Pinned).run(&mut nodes);
        assert!(r.converged, "{r:?}");
        assert!((r.length - 1.0).abs() < 1e-12);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0] + 1e-14));
    }
}
