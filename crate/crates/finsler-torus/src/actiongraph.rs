//! Periodic lattice graph on the torus carrying Finsler edge lengths.
//!
//! Nodes sit at `(i/N, j/N)`; edges use the primitive offsets `(p, q)` with
//! `max(|p|, |q|) <= S`. With a constant 1-form `eta` and energy `k` the edge
//! cost at optimal parametrisation is
//!
//! ```text
//!   c(e) = sqrt(2k) len(e) - <eta, d(e)>
//! ```
//!
//! so Mane's critical value is `alpha(eta) = r*^2 / 2` with `r*` the maximal
//! cycle ratio `sum <eta, d> / sum len`.

use crate::error::{Error, Result};
use crate::geom::{self, gcd, V2};
use crate::metrics::{MetricKind, MetricModel};
use crate::par;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::Mutex;

/// Energy margin above the critical value used wherever `k = alpha` is needed.
pub const CRITICAL_MARGIN: f64 = 1e-6;

const MAX_EDGES: u64 = 100_000_000;

#[derive(Clone, Debug, Serialize)]
pub struct StableNormPath {
    pub z: [i64; 2],
    pub length: f64,
    /// Lifted node positions from `x` to `x + z`.
    pub nodes: Vec<V2>,
}

pub struct ActionGraph {
    pub n: usize,
    pub s: usize,
    pub stencil: Vec<(i32, i32)>,
    /// Edge lengths, `len[node * stencil.len() + k]`.
    pub len: Vec<f64>,
    succ: Vec<u32>,
    metric: MetricModel,
    c_f: f64,
    lower: LowerNorm,
    cache: Mutex<HashMap<([i64; 2], usize), StableNormPath>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DominatedPotential {
    pub eta: V2,
    pub k: f64,
    pub n: usize,
    pub u: Vec<f64>,
}

/// Result of the ratio-cycle search behind `critical_alpha`.
#[derive(Clone, Debug, Serialize)]
pub struct CriticalCycle {
    pub alpha: f64,
    pub ratio: f64,
    /// Total displacement of the maximising cycle (its homology class).
    pub displacement: V2,
    pub cycle_len: f64,
    pub bisection_steps: usize,
}

/// Primitive offsets with `max(|p|, |q|) <= s`, in a fixed order.
pub fn stencil(s: usize) -> Vec<(i32, i32)> {
    let s = s as i32;
    let mut out = Vec::new();
    for q in -s..=s {
        for p in -s..=s {
            if (p, q) != (0, 0) && gcd(p as i64, q as i64) == 1 {
                out.push((p, q));
            }
        }
    }
    out
}

/// F-length of the straight segment `a -> a + d` by composite 8-point
/// Gauss-Legendre quadrature.
pub fn segment_length(m: &MetricModel, a: V2, d: V2, panels: usize) -> f64 {
    let panels = panels.max(1);
    let h = 1.0 / panels as f64;
    let mut l = 0.0;
    for p in 0..panels {
        for &(s, w) in geom::GL8.iter() {
            let t = (p as f64 + s) * h;
            l += w * h * m.f([a[0] + t * d[0], a[1] + t * d[1]], d);
        }
    }
    l
}

/// A norm bounded above by `F(x, .)` at every `x`; the A* heuristic.
#[derive(Copy, Clone, Debug)]
enum LowerNorm {
    Scaled(f64),
    Randers(V2),
}

impl LowerNorm {
    fn of(m: &MetricModel, c_f: f64) -> Self {
        match &m.kind {
            MetricKind::Flat => LowerNorm::Scaled(1.0),
            MetricKind::Randers { b } => LowerNorm::Randers(*b),
            MetricKind::Conformal { .. } => {
                let n = 256;
                let mut gmin = f64::INFINITY;
                let mut slope: f64 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let (g, dg) = m.conformal_g([i as f64 / n as f64, j as f64 / n as f64]);
                        gmin = gmin.min(g);
                        slope = slope.max(geom::norm(dg));
                    }
                }
                LowerNorm::Scaled((gmin - slope / n as f64).max(1.0 / c_f))
            }
            _ => LowerNorm::Scaled(1.0 / c_f),
        }
    }

    fn eval(&self, w: V2) -> f64 {
        match self {
            LowerNorm::Scaled(c) => c * geom::norm(w),
            // F(w) >= F(w) (1 - 1e-12) keeps rounding on the admissible side
            LowerNorm::Randers(b) => (geom::norm(w) + geom::dot(*b, w)) * (1.0 - 1e-12),
        }
    }
}

#[derive(Copy, Clone, PartialEq)]
struct HeapItem {
    key: f64,
    node: u32,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, o: &Self) -> Ordering {
        // min-heap on (key, node)
        o.key.partial_cmp(&self.key).unwrap_or(Ordering::Equal).then_with(|| o.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl ActionGraph {
    pub fn build(m: &MetricModel, n: usize, s: usize) -> Result<Self> {
        m.require_torus("actiongraph.build")?;
        if n < 16 || s < 1 {
            return Err(Error::Invalid(format!("need N >= 16 and S >= 1, got N = {n}, S = {s}")));
        }
        let st = stencil(s);
        let edges = (n * n) as u64 * st.len() as u64;
        if edges > MAX_EDGES {
            return Err(Error::OutOfMemory { edges });
        }
        let c_f = m.estimate_cf(32)?.c_f;
        let ns = st.len();
        let rows: Vec<Vec<f64>> = par::map_range(n * n, |node| {
            let (i, j) = (node % n, node / n);
            let a = [i as f64 / n as f64, j as f64 / n as f64];
            st.iter()
                .map(|&(p, q)| {
                    let d = [p as f64 / n as f64, q as f64 / n as f64];
                    segment_length(m, a, d, p.unsigned_abs().max(q.unsigned_abs()) as usize)
                })
                .collect()
        });
        let len: Vec<f64> = rows.into_iter().flatten().collect();
        let mut succ = Vec::with_capacity(n * n * ns);
        for node in 0..n * n {
            let (i, j) = ((node % n) as i64, (node / n) as i64);
            for &(p, q) in &st {
                let ti = (i + p as i64).rem_euclid(n as i64);
                let tj = (j + q as i64).rem_euclid(n as i64);
                succ.push((ti + tj * n as i64) as u32);
            }
        }
        let lower = LowerNorm::of(m, c_f);
        Ok(Self { n, s, stencil: st, len, succ, metric: m.clone(), c_f, lower, cache: Mutex::new(HashMap::new()) })
    }

    pub fn metric(&self) -> &MetricModel {
        &self.metric
    }

    pub fn c_f(&self) -> f64 {
        self.c_f
    }

    pub fn num_nodes(&self) -> usize {
        self.n * self.n
    }

    pub fn node_pos(&self, node: usize) -> V2 {
        [(node % self.n) as f64 / self.n as f64, (node / self.n) as f64 / self.n as f64]
    }

    pub fn node_at(&self, i: usize, j: usize) -> usize {
        (i % self.n) + self.n * (j % self.n)
    }

    pub fn displacement(&self, k: usize) -> V2 {
        let (p, q) = self.stencil[k];
        [p as f64 / self.n as f64, q as f64 / self.n as f64]
    }

    pub fn edge_target(&self, node: usize, k: usize) -> usize {
        self.succ[node * self.stencil.len() + k] as usize
    }

    fn costs(&self, eta: V2, speed: f64) -> Vec<f64> {
        let ns = self.stencil.len();
        let flux: Vec<f64> = (0..ns).map(|k| geom::dot(eta, self.displacement(k))).collect();
        self.len.iter().enumerate().map(|(e, l)| speed * l - flux[e % ns]).collect()
    }

    /// Label-correcting shortest paths from the given initial labels. Returns
    /// the labels and predecessors, or a negative cycle as a list of edges.
    fn spfa(&self, cost: &[f64], init: Vec<f64>) -> std::result::Result<(Vec<f64>, Vec<u32>), Vec<usize>> {
        let nn = self.num_nodes();
        let ns = self.stencil.len();
        let mut dist = init;
        let mut pred_edge = vec![u32::MAX; nn];
        let mut in_queue = vec![false; nn];
        let mut queue: VecDeque<u32> = VecDeque::new();
        for v in 0..nn {
            if dist[v].is_finite() {
                queue.push_back(v as u32);
                in_queue[v] = true;
            }
        }
        let mut relax_count: usize = 0;
        let check_every = nn;
        while let Some(u) = queue.pop_front() {
            let u = u as usize;
            in_queue[u] = false;
            let du = dist[u];
            for k in 0..ns {
                let e = u * ns + k;
                let v = self.succ[e] as usize;
                let nd = du + cost[e];
                if nd < dist[v] - 1e-13 * (1.0 + nd.abs()) {
                    dist[v] = nd;
                    pred_edge[v] = e as u32;
                    relax_count += 1;
                    if !in_queue[v] {
                        in_queue[v] = true;
                        queue.push_back(v as u32);
                    }
                    if relax_count % check_every == 0 {
                        if let Some(c) = self.find_pred_cycle(&pred_edge) {
                            return Err(c);
                        }
                    }
                }
            }
        }
        Ok((dist, pred_edge))
    }

    /// A cycle in the predecessor graph, as edges in forward order.
    fn find_pred_cycle(&self, pred_edge: &[u32]) -> Option<Vec<usize>> {
        let nn = self.num_nodes();
        let ns = self.stencil.len();
        let mut state = vec![0u32; nn];
        for start in 0..nn {
            if state[start] != 0 {
                continue;
            }
            let mark = start as u32 + 1;
            let mut v = start;
            loop {
                if state[v] == mark {
                    // walk once more around to collect the cycle
                    let mut cyc = Vec::new();
                    let mut w = v;
                    loop {
                        let e = pred_edge[w] as usize;
                        cyc.push(e);
                        w = e / ns;
                        if w == v {
                            break;
                        }
                    }
                    cyc.reverse();
                    return Some(cyc);
                }
                if state[v] != 0 || pred_edge[v] == u32::MAX {
                    break;
                }
                state[v] = mark;
                v = pred_edge[v] as usize / ns;
            }
        }
        None
    }

    fn cycle_sums(&self, cyc: &[usize], eta: V2) -> (f64, f64, V2) {
        let ns = self.stencil.len();
        let mut l = 0.0;
        let mut d = [0.0, 0.0];
        for &e in cyc {
            l += self.len[e];
            let dk = self.displacement(e % ns);
            d = geom::add(d, dk);
        }
        (geom::dot(eta, d), l, d)
    }

    /// Mane's critical value of `L_F - eta`, by bisection on the cycle ratio
    /// with negative-cycle detection (tolerance 1e-6 on the ratio).
    pub fn critical_alpha(&self, eta: V2) -> f64 {
        self.critical_cycle(eta).alpha
    }

    pub fn critical_cycle(&self, eta: V2) -> CriticalCycle {
        let zero = CriticalCycle { alpha: 0.0, ratio: 0.0, displacement: [0.0, 0.0], cycle_len: 0.0, bisection_steps: 0 };
        if geom::norm(eta) == 0.0 {
            return zero;
        }
        let mut lo = 0.0;
        let mut hi = self.c_f * geom::norm(eta) * 1.01;
        let mut best = zero;
        let mut steps = 0;
        while hi - lo > 1e-6 {
            steps += 1;
            let mid = 0.5 * (lo + hi);
            let cost = self.costs(eta, mid);
            match self.spfa(&cost, vec![0.0; self.num_nodes()]) {
                Err(cyc) => {
                    let (flux, l, d) = self.cycle_sums(&cyc, eta);
                    let ratio = flux / l;
                    if ratio > best.ratio {
                        best = CriticalCycle { alpha: 0.0, ratio, displacement: d, cycle_len: l, bisection_steps: 0 };
                    }
                    lo = mid.max(ratio);
                }
                Ok(_) => hi = mid,
            }
        }
        let r = if best.ratio > 0.0 { best.ratio } else { lo };
        best.alpha = 0.5 * r * r;
        best.ratio = r;
        best.bisection_steps = steps;
        best
    }

    /// Mane potential `Phi(x0, .)` of `L_F - eta + k` over the torus.
    pub fn mane_potential(&self, eta: V2, k: f64, x0: usize) -> Result<Vec<f64>> {
        if !(k >= 0.0) {
            return Err(Error::SubcriticalEnergy { k });
        }
        let cost = self.costs(eta, (2.0 * k).sqrt());
        let mut init = vec![f64::INFINITY; self.num_nodes()];
        init[x0] = 0.0;
        if cost.iter().all(|&c| c >= 0.0) {
            return Ok(self.dijkstra(&cost, init));
        }
        match self.spfa(&cost, init) {
            Ok((d, _)) => Ok(d),
            Err(_) => Err(Error::SubcriticalEnergy { k }),
        }
    }

    fn dijkstra(&self, cost: &[f64], init: Vec<f64>) -> Vec<f64> {
        let ns = self.stencil.len();
        let mut dist = init;
        let mut done = vec![false; dist.len()];
        let mut heap = BinaryHeap::new();
        for (v, &d) in dist.iter().enumerate() {
            if d.is_finite() {
                heap.push(HeapItem { key: d, node: v as u32 });
            }
        }
        while let Some(HeapItem { key, node }) = heap.pop() {
            let u = node as usize;
            if done[u] || key > dist[u] {
                continue;
            }
            done[u] = true;
            for k in 0..ns {
                let e = u * ns + k;
                let v = self.succ[e] as usize;
                let nd = key + cost[e];
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(HeapItem { key: nd, node: v as u32 });
                }
            }
        }
        dist
    }

    /// `u(x) = min_y Phi(y, x)`, a dominated function for `L_F - eta + k`.
    pub fn dominated_potential(&self, eta: V2, k: f64) -> Result<DominatedPotential> {
        let cost = self.costs(eta, (2.0 * k.max(0.0)).sqrt());
        let u = match self.spfa(&cost, vec![0.0; self.num_nodes()]) {
            Ok((d, _)) => d,
            Err(_) => return Err(Error::SubcriticalEnergy { k }),
        };
        Ok(DominatedPotential { eta, k, n: self.n, u })
    }

    /// `max_e (u(y) - u(x) - c(e))`; nonpositive for a dominated function.
    pub fn domination_residual(&self, p: &DominatedPotential) -> f64 {
        let cost = self.costs(p.eta, (2.0 * p.k).sqrt());
        let ns = self.stencil.len();
        let mut worst = f64::NEG_INFINITY;
        for (e, c) in cost.iter().enumerate() {
            let x = e / ns;
            let y = self.succ[e] as usize;
            worst = worst.max(p.u[y] - p.u[x] - c);
        }
        worst
    }

    /// Edge cost for a given `(eta, k)`, exposed for checks.
    pub fn edge_cost(&self, eta: V2, k: f64, node: usize, kk: usize) -> f64 {
        (2.0 * k).sqrt() * self.len[node * self.stencil.len() + kk] - geom::dot(eta, self.displacement(kk))
    }

    /// Minimal length of a lattice path from `x` to `x + z` in the cover, over
    /// all start nodes `x`. The minimising path is cached.
    pub fn stable_norm(&self, z: [i64; 2], reps: usize) -> f64 {
        self.stable_norm_path(z, reps).length
    }

    pub fn stable_norm_path(&self, z: [i64; 2], reps: usize) -> StableNormPath {
        assert!(z != [0, 0], "stable_norm needs z != 0");
        let key = (z, reps);
        if let Some(p) = self.cache.lock().unwrap().get(&key) {
            return p.clone();
        }
        let n = self.n as i64;
        let s = self.s as i64;
        // A closed walk of class z crosses some integer line transverse to z;
        // the first node past the crossing lies in one of these columns (rows).
        let (axis, sign) = if z[0] != 0 { (0, z[0].signum()) } else { (1, z[1].signum()) };
        let band: Vec<i64> = if sign > 0 { (0..s).collect() } else { std::iter::once(0).chain(n - s + 1..n).collect() };
        let mut starts = Vec::new();
        for a in 0..n {
            for &b in &band {
                let (i, j) = if axis == 0 { (b, a) } else { (a, b) };
                starts.push((i + n * j) as usize);
            }
        }
        starts.sort_unstable();
        let bound = AtomicU64::new(f64::INFINITY.to_bits());
        let results = par::map_slice(&starts, |&v| {
            let r = self.astar_cover(v, z, reps, &bound);
            if let Some((l, _)) = &r {
                let mut cur = bound.load(AtomicOrdering::Relaxed);
                while *l < f64::from_bits(cur) {
                    match bound.compare_exchange(cur, l.to_bits(), AtomicOrdering::Relaxed, AtomicOrdering::Relaxed) {
                        Ok(_) => break,
                        Err(c) => cur = c,
                    }
                }
            }
            r
        });
        let mut best: Option<(f64, usize, Vec<V2>)> = None;
        for (idx, r) in results.into_iter().enumerate() {
            if let Some((l, nodes)) = r {
                if best.as_ref().map_or(true, |(bl, _, _)| l < *bl) {
                    best = Some((l, starts[idx], nodes));
                }
            }
        }
        let (length, _, nodes) = best.expect("no path found in the unrolled cover");
        let out = StableNormPath { z, length, nodes };
        self.cache.lock().unwrap().insert(key, out.clone());
        out
    }

    /// A* from node `v` to its translate by `z` inside a box of periods,
    /// abandoning the search once every open label exceeds `bound`.
    fn astar_cover(&self, v: usize, z: [i64; 2], reps: usize, bound: &AtomicU64) -> Option<(f64, Vec<V2>)> {
        let n = self.n as i64;
        let ns = self.stencil.len();
        let r = reps as i64;
        let lo = [z[0].min(0) - r, z[1].min(0) - r];
        let hi = [z[0].max(0) + r + 1, z[1].max(0) + r + 1];
        let w = ((hi[0] - lo[0]) * n) as usize;
        let h = ((hi[1] - lo[1]) * n) as usize;
        let (i0, j0) = ((v % self.n) as i64, (v / self.n) as i64);
        let to_box = |i: i64, j: i64| -> Option<usize> {
            let bi = i - lo[0] * n;
            let bj = j - lo[1] * n;
            if bi < 0 || bj < 0 || bi >= w as i64 || bj >= h as i64 {
                None
            } else {
                Some(bi as usize + w * bj as usize)
            }
        };
        let target = (i0 + n * z[0], j0 + n * z[1]);
        let tpos = [target.0 as f64 / n as f64, target.1 as f64 / n as f64];
        let heur = |i: i64, j: i64| self.lower.eval(geom::sub(tpos, [i as f64 / n as f64, j as f64 / n as f64]));
        let mut dist = vec![f64::INFINITY; w * h];
        let mut pred = vec![u32::MAX; w * h];
        let mut closed = vec![false; w * h];
        let mut heap = BinaryHeap::new();
        let s0 = to_box(i0, j0)?;
        let t0 = to_box(target.0, target.1)?;
        dist[s0] = 0.0;
        heap.push(HeapItem { key: heur(i0, j0), node: s0 as u32 });
        while let Some(HeapItem { key, node }) = heap.pop() {
            let b = node as usize;
            if closed[b] {
                continue;
            }
            let ub = f64::from_bits(bound.load(AtomicOrdering::Relaxed));
            if key > ub * (1.0 + 1e-12) {
                return None;
            }
            closed[b] = true;
            let db = dist[b];
            if b == t0 {
                let mut nodes = Vec::new();
                let mut c = b;
                loop {
                    let (bi, bj) = ((c % w) as i64 + lo[0] * n, (c / w) as i64 + lo[1] * n);
                    nodes.push([bi as f64 / n as f64, bj as f64 / n as f64]);
                    if pred[c] == u32::MAX {
                        break;
                    }
                    c = pred[c] as usize;
                }
                nodes.reverse();
                return Some((db, nodes));
            }
            let (bi, bj) = ((b % w) as i64 + lo[0] * n, (b / w) as i64 + lo[1] * n);
            let base = (bi.rem_euclid(n) + n * bj.rem_euclid(n)) as usize * ns;
            for (k, &(p, q)) in self.stencil.iter().enumerate() {
                let (ti, tj) = (bi + p as i64, bj + q as i64);
                let Some(tb) = to_box(ti, tj) else { continue };
                if closed[tb] {
                    continue;
                }
                let nd = db + self.len[base + k];
                if nd < dist[tb] {
                    dist[tb] = nd;
                    pred[tb] = b as u32;
                    heap.push(HeapItem { key: nd + heur(ti, tj), node: tb as u32 });
                }
            }
        }
        None
    }

    pub fn write_potential_csv<W: Write>(&self, u: &[f64], mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,j,x1,x2,u")?;
        for (node, val) in u.iter().enumerate() {
            let p = self.node_pos(node);
            writeln!(w, "{},{},{},{},{}", node % self.n, node / self.n, p[0], p[1], val)?;
        }
        Ok(())
    }

    pub fn cache_path(dir: &Path, m: &MetricModel, n: usize, s: usize) -> PathBuf {
        dir.join(format!("graph-{}-{n}-{s}.bin", &m.hash_hex()[..16]))
    }

    /// Store the edge lengths as little-endian `f64` after a small header.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(b"FTAG1")?;
        f.write_all(&(self.n as u64).to_le_bytes())?;
        f.write_all(&(self.s as u64).to_le_bytes())?;
        f.write_all(&(self.len.len() as u64).to_le_bytes())?;
        for l in &self.len {
            f.write_all(&l.to_le_bytes())?;
        }
        Ok(())
    }

    /// Build, reusing a cached copy from `dir` when one exists.
    pub fn build_cached(m: &MetricModel, n: usize, s: usize, dir: &Path) -> Result<Self> {
        let path = Self::cache_path(dir, m, n, s);
        if let Ok(mut f) = std::fs::File::open(&path) {
            let mut buf = Vec::new();
            f.read_to_end(&mut buf)?;
            if let Some(lens) = parse_cache(&buf, n, s) {
                let mut g = Self::build_skeleton(m, n, s)?;
                if lens.len() == g.succ.len() {
                    g.len = lens;
                    return Ok(g);
                }
            }
        }
        let g = Self::build(m, n, s)?;
        std::fs::create_dir_all(dir)?;
        g.save(&path)?;
        Ok(g)
    }

    fn build_skeleton(m: &MetricModel, n: usize, s: usize) -> Result<Self> {
        m.require_torus("actiongraph.build")?;
        let st = stencil(s);
        let c_f = m.estimate_cf(32)?.c_f;
        let mut succ = Vec::with_capacity(n * n * st.len());
        for node in 0..n * n {
            let (i, j) = ((node % n) as i64, (node / n) as i64);
            for &(p, q) in &st {
                succ.push(((i + p as i64).rem_euclid(n as i64) + n as i64 * (j + q as i64).rem_euclid(n as i64)) as u32);
            }
        }
        Ok(Self {
            n,
            s,
            stencil: st,
            len: Vec::new(),
            succ,
            metric: m.clone(),
            c_f,
            lower: LowerNorm::of(m, c_f),
            cache: Mutex::new(HashMap::new()),
        })
    }
}

fn parse_cache(buf: &[u8], n: usize, s: usize) -> Option<Vec<f64>> {
    if buf.len() < 29 || &buf[..5] != b"FTAG1" {
        return None;
    }
    let rd = |o: usize| u64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    if rd(5) as usize != n || rd(13) as usize != s {
        return None;
    }
    let cnt = rd(21) as usize;
    if buf.len() != 29 + 8 * cnt {
        return None;
    }
    Some((0..cnt).map(|i| f64::from_le_bytes(buf[29 + 8 * i..37 + 8 * i].try_into().unwrap())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_sizes() {
        assert_eq!(stencil(1).len(), 8);
        assert_eq!(stencil(3).len(), 32);
        // 16 reduced directions per half-plane at S = 3
        assert_eq!(stencil(3).iter().filter(|&&(p, q)| q > 0 || (q == 0 && p > 0)).count(), 16);
    }

    #[test]
    fn flat_edge_lengths() {
        let g = ActionGraph::build(&MetricModel::flat(), 16, 1).unwrap();
        for node in 0..g.num_nodes() {
            for (k, &(p, q)) in g.stencil.iter().enumerate() {
                let l = g.len[node * g.stencil.len() + k];
                if p == 0 || q == 0 {
                    assert!((l - 1.0 / 16.0).abs() < 1e-15);
                } else {
                    assert!((l - 2f64.sqrt() / 16.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn edge_bounds_and_bump_quadrature() {
        let m = MetricModel::bump();
        let g = ActionGraph::build(&m, 16, 2).unwrap();
        let cf = g.c_f();
        for node in 0..g.num_nodes() {
            for k in 0..g.stencil.len() {
                let d = geom::norm(g.displacement(k));
                let l = g.len[node * g.stencil.len() + k];
                assert!(l > 0.0 && l >= d / cf && l <= cf * d);
            }
        }
        // an edge through the bump centre is longer than |d| * min g
        let node = g.node_at(7, 8);
        let k = g.stencil.iter().position(|&s| s == (1, 0)).unwrap();
        assert!(g.len[node * g.stencil.len() + k] > 2.0 / 16.0);
    }

    #[test]
    fn chart_and_size_guards() {
        assert!(matches!(
            ActionGraph::build(&MetricModel::rotational_sphere(1.0), 16, 1),
            Err(Error::ChartMismatch(_))
        ));
        assert!(ActionGraph::build(&MetricModel::flat(), 8, 1).is_err());
        assert!(matches!(ActionGraph::build(&MetricModel::flat(), 2000, 3), Err(Error::OutOfMemory { .. })));
    }

    #[test]
    fn alpha_of_zero_is_zero() {
        let g = ActionGraph::build(&MetricModel::bump(), 16, 1).unwrap();
        assert_eq!(g.critical_alpha([0.0, 0.0]), 0.0);
    }

    #[test]
    fn flat_alpha_and_stable_norm() {
        let g = ActionGraph::build(&MetricModel::flat(), 16, 3).unwrap();
        let a = g.critical_alpha([1.0, 0.0]);
        assert!((a - 0.5).abs() < 2e-3, "{a}");
        let a2 = g.critical_alpha([2.0, 0.0]);
        assert!((a2 / a - 4.0).abs() < 1e-5 * 4.0);
        assert!((g.stable_norm([1, 1], 1) - 2f64.sqrt()).abs() < 2e-2);
        let p = g.stable_norm_path([1, 0], 1);
        assert!((p.length - 1.0).abs() < 1e-12);
        let end = *p.nodes.last().unwrap();
        let start = p.nodes[0];
        assert!((end[0] - start[0] - 1.0).abs() < 1e-12 && (end[1] - start[1]).abs() < 1e-12);
    }

    #[test]
    fn flat_mane_potential_is_distance() {
        let g = ActionGraph::build(&MetricModel::flat(), 16, 3).unwrap();
        let phi = g.mane_potential([0.0, 0.0], 0.5, 0).unwrap();
        for node in 0..g.num_nodes() {
            let d = geom::torus_dist(g.node_pos(node), [0.0, 0.0], [1.0, 1.0]);
            assert!((phi[node] - d).abs() <= 2.0 / 16.0, "{} {}", phi[node], d);
        }
    }

    #[test]
    fn subcritical_energy_is_reported() {
        let g = ActionGraph::build(&MetricModel::flat(), 16, 1).unwrap();
        assert!(matches!(g.mane_potential([1.0, 0.0], 0.1, 0), Err(Error::SubcriticalEnergy { .. })));
        assert!(matches!(g.dominated_potential([1.0, 0.0], 0.1), Err(Error::SubcriticalEnergy { .. })));
    }

    #[test]
    fn flat_dominated_potential_calibrates_horizontals() {
        let g = ActionGraph::build(&MetricModel::flat(), 16, 3).unwrap();
        let eta = [1.0, 0.0];
        let k = g.critical_alpha(eta) + CRITICAL_MARGIN;
        let p = g.dominated_potential(eta, k).unwrap();
        assert!(g.domination_residual(&p) <= 1e-12);
        // the lifted potential <eta, x> + u(x) differs from <eta, x> by a constant
        let (mn, mx) = p.u.iter().fold((f64::MAX, f64::MIN), |(a, b), &u| (a.min(u), b.max(u)));
        assert!(mx - mn <= 2.0 / 16.0);
        let kk = g.stencil.iter().position(|&s| s == (1, 0)).unwrap();
        for node in 0..g.num_nodes() {
            let y = g.edge_target(node, kk);
            let gap = g.edge_cost(eta, k, node, kk) - (p.u[y] - p.u[node]);
            assert!(gap.abs() < 1e-4);
        }
    }

    #[test]
    fn cache_roundtrip() {
        let dir = std::env::temp_dir().join(format!("ftg-cache-{}", std::process::id()));
        let m = MetricModel::bump();
        let a = ActionGraph::build_cached(&m, 16, 1, &dir).unwrap();
        let b = ActionGraph::build_cached(&m, 16, 1, &dir).unwrap();
        assert_eq!(a.len, b.len);
        let _ = std::fs::remove_dir_all(dir);
    }
}
