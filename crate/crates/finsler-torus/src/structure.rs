//! Structural checks: the gap scan over rational directions, non-crossing
//! of minimizers, invariant tori for irrational directions assembled from
//! rational approximants, and their cyclic ordering.

use crate::error::{Error, Result};
use crate::geom::{self, V2};
use crate::mather::{farey_bracket, Bracket};
use crate::metrics::MetricModel;
use crate::minimizers::heteroclinic::{polyline_crossings, solve_window_with};
use crate::minimizers::{heteroclinic, periodic_from_point, zf, HetSign, HeteroclinicProblem, HeteroclinicResult, LiftedPath};
use crate::par;
use serde::Serialize;
use std::io::Write;

/// Cells per side of the coverage raster; the cover radius is one cell.
pub const COVER_GRID: usize = 128;

/// Largest angle (radians) between traces of distinct leaves within one
/// cell. Leaves of a smooth foliation turn by `O(r)` across a cell, and near
/// the turning band of a Clairaut integral that turn reaches a few tenths;
/// crossing families differ by more.
pub const SPREAD_TOL: f64 = 0.5;

#[derive(Clone, Debug, Serialize)]
pub struct GapScanOptions {
    /// Nodes per period of the class.
    pub nodes_per_period: usize,
    /// Pinning points per gap and sign are `fan x fan`.
    pub fan: usize,
    /// Periods on each side of a heteroclinic window.
    pub window: usize,
    /// Excess of `J` over `omega` below which a pinning point counts as
    /// lying on a minimizing heteroclinic.
    pub fan_tol: f64,
}

impl Default for GapScanOptions {
    fn default() -> Self {
        Self { nodes_per_period: 32, fan: 4, window: 8, fan_tol: 1e-4 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GapInfo {
    /// Indices into `minimizer_family` of the lower and upper boundary.
    pub lower: usize,
    pub upper: usize,
    pub width: f64,
    pub omega_plus: Option<f64>,
    pub omega_minus: Option<f64>,
    pub het_coverage_plus: Option<f64>,
    pub het_coverage_minus: Option<f64>,
    /// Solver failures for this gap, if any.
    pub errors: Vec<String>,
    #[serde(skip)]
    pub plus: Option<HeteroclinicResult>,
    #[serde(skip)]
    pub minus: Option<HeteroclinicResult>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub z: [i64; 2],
    pub minimizer_family: Vec<LiftedPath>,
    /// Height of each family member: mean of `det(z, x)` over a period, mod 1.
    pub heights: Vec<f64>,
    pub lengths: Vec<f64>,
    pub coverage: f64,
    pub gaps: Vec<GapInfo>,
    pub gap_condition: bool,
    /// Largest half-width of a strip of direction `z` holding a family path.
    pub deviation: f64,
    #[serde(skip)]
    pub mask: Vec<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossingReport {
    pub crossings: Vec<(usize, usize)>,
    pub min_clearance: f64,
}

/// A lifted segment with the unit velocity it carries.
#[derive(Clone, Copy, Debug)]
struct Seg {
    a: V2,
    b: V2,
    v: V2,
    curve: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TorusGraphSample {
    pub h: V2,
    pub approximants: [[i64; 2]; 2],
    pub weights: [f64; 2],
    pub grid: usize,
    /// Unit velocities at `(i + 1/2, j + 1/2) / grid`, row `j` major.
    pub field: Vec<V2>,
    pub lipschitz_estimate: f64,
    /// Largest distance from a grid point to the nearest sampled trace.
    pub max_trace_distance: f64,
    #[serde(skip)]
    families: [Vec<Seg>; 2],
}

fn mean_det(p: &LiftedPath, z: [i64; 2]) -> f64 {
    // exact average of det(z, x) over one period in the coordinate along z
    let zv = zf(z);
    let zz = geom::dot(zv, zv);
    let mut num = Vec::with_capacity(p.nodes.len());
    for w in p.nodes.windows(2) {
        let ds = geom::dot(geom::sub(w[1], w[0]), zv) / zz;
        num.push(0.5 * ds * (geom::cross(zv, w[0]) + geom::cross(zv, w[1])));
    }
    geom::ksum(num)
}

/// A lattice vector `w` with `det(z, w) = 1`, reduced along `z` so that it
/// is as close to orthogonal as the lattice allows.
pub fn transversal(z: [i64; 2]) -> Result<[i64; 2]> {
    if geom::gcd(z[0], z[1]) != 1 {
        return Err(Error::Invalid(format!("class {z:?} is not primitive")));
    }
    let q = 2 * z[0].abs().max(z[1].abs()).max(1);
    let mut w = [0, 0];
    'search: for a in -q..=q {
        for b in -q..=q {
            if z[0] * b - z[1] * a == 1 {
                w = [a, b];
                break 'search;
            }
        }
    }
    let k = ((w[0] * z[0] + w[1] * z[1]) as f64 / (z[0] * z[0] + z[1] * z[1]) as f64).round() as i64;
    Ok([w[0] - k * z[0], w[1] - k * z[1]])
}

/// Minimizers of class `z` started from `seeds` straight loops, reduced to
/// the global ones and clustered by height. Returns `(paths, heights,
/// lengths)` sorted by height.
pub fn periodic_family(m: &MetricModel, z: [i64; 2], seeds: usize, nodes_per_period: usize) -> Result<(Vec<LiftedPath>, Vec<f64>, Vec<f64>)> {
    let w = transversal(z)?;
    let n_path = (nodes_per_period * z[0].abs().max(z[1].abs()) as usize).max(8);
    let runs: Vec<Result<(LiftedPath, f64)>> = par::map_range(seeds, |i| {
        let x0 = geom::scale(i as f64 / seeds as f64, zf(w));
        let r = periodic_from_point(m, z, n_path, x0)?;
        Ok((r.path, r.length))
    });
    let mut found = Vec::new();
    for r in runs {
        found.push(r?);
    }
    let best = found.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let mut fam: Vec<(f64, LiftedPath, f64)> = found
        .into_iter()
        .filter(|r| r.1 <= best * (1.0 + 1e-7))
        .map(|(p, l)| (mean_det(&p, z).rem_euclid(1.0), p, l))
        .collect();
    fam.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, LiftedPath, f64)> = Vec::new();
    for f in fam {
        match out.last_mut() {
            Some(last) if (f.0 - last.0).abs() <= 1e-6 => {
                if f.2 < last.2 {
                    *last = f;
                }
            }
            _ => out.push(f),
        }
    }
    if out.len() > 1 && (out[0].0 + 1.0 - out[out.len() - 1].0) <= 1e-6 {
        out.pop();
    }
    let heights = out.iter().map(|f| f.0).collect();
    let lengths = out.iter().map(|f| f.2).collect();
    Ok((out.into_iter().map(|f| f.1).collect(), heights, lengths))
}

fn segments(paths: &[LiftedPath], m: &MetricModel) -> Vec<Seg> {
    let mut v = Vec::new();
    for (ci, p) in paths.iter().enumerate() {
        for w in p.nodes.windows(2) {
            let d = geom::sub(w[1], w[0]);
            let f = m.f(geom::lerp(w[0], w[1], 0.5), d);
            if f > 0.0 {
                v.push(Seg { a: w[0], b: w[1], v: geom::scale(1.0 / f, d), curve: ci });
            }
        }
    }
    v
}

/// Distance on the torus from `x` to a short lifted segment.
fn seg_dist(s: &Seg, x: V2) -> f64 {
    let mid = geom::lerp(s.a, s.b, 0.5);
    let k = [(mid[0] - x[0]).round(), (mid[1] - x[1]).round()];
    let y = geom::add(x, k);
    let mut best = geom::seg_point_dist(s.a, s.b, y);
    // long chords can reach past the nearest image
    if geom::dist(s.a, s.b) > 0.25 {
        for dx in -1..=1 {
            for dy in -1..=1 {
                best = best.min(geom::seg_point_dist(s.a, s.b, geom::add(y, [dx as f64, dy as f64])));
            }
        }
    }
    best
}

/// Raster of cells whose centre lies within one cell of a trace.
fn coverage_mask(paths: &[LiftedPath], grid: usize) -> Vec<bool> {
    let mut mask = vec![false; grid * grid];
    let r = 1.0 / grid as f64;
    for p in paths {
        for w in p.nodes.windows(2) {
            let len = geom::dist(w[0], w[1]);
            let k = ((len / (0.25 * r)).ceil() as usize).max(1);
            for i in 0..=k {
                let x = geom::lerp(w[0], w[1], i as f64 / k as f64);
                let x = [x[0].rem_euclid(1.0), x[1].rem_euclid(1.0)];
                let ci = (x[0].rem_euclid(1.0) * grid as f64).floor() as i64;
                let cj = (x[1].rem_euclid(1.0) * grid as f64).floor() as i64;
                for di in -2..=2 {
                    for dj in -2..=2 {
                        let (a, b) = (ci + di, cj + dj);
                        let c = [(a as f64 + 0.5) * r, (b as f64 + 0.5) * r];
                        if geom::dist(c, x) <= r {
                            let (a, b) = (a.rem_euclid(grid as i64) as usize, b.rem_euclid(grid as i64) as usize);
                            mask[b * grid + a] = true;
                        }
                    }
                }
            }
        }
    }
    mask
}

/// Scan the minimizers of class `z` from `resolution` initial heights and
/// look for strips not foliated by either heteroclinic family.
pub fn gap_scan(m: &MetricModel, z: [i64; 2], resolution: usize) -> Result<GapReport> {
    gap_scan_with(m, z, resolution, &GapScanOptions::default())
}

pub fn gap_scan_with(m: &MetricModel, z: [i64; 2], resolution: usize, opt: &GapScanOptions) -> Result<GapReport> {
    if resolution < 128 {
        return Err(Error::Invalid("gap_scan needs resolution >= 128".into()));
    }
    let (family, heights, lengths) = periodic_family(m, z, resolution, opt.nodes_per_period)?;
    let mask = coverage_mask(&family, COVER_GRID);
    let coverage = mask.iter().filter(|b| **b).count() as f64 / mask.len() as f64;
    let zv = zf(z);
    let deviation = family.iter().map(|p| p.deviation(zv)).fold(0.0, f64::max);
    let mut gaps = Vec::new();
    if coverage < 1.0 - 1.0 / 64.0 {
        for (i, j, upper) in consecutive(&family, z)? {
            match strip_width(&family[i], &upper) {
                Err(e) => gaps.push(GapInfo { lower: i, upper: j, width: 0.0, omega_plus: None, omega_minus: None, het_coverage_plus: None, het_coverage_minus: None, errors: vec![e.to_string()], plus: None, minus: None }),
                Ok(width) if width > 2.0 / COVER_GRID as f64 => gaps.push(scan_gap(m, &family[i], &upper, i, j, width, opt)),
                Ok(_) => {}
            }
        }
    }
    let gap_condition = coverage < 1.0
        && gaps.iter().any(|g| matches!((g.het_coverage_plus, g.het_coverage_minus), (Some(a), Some(b)) if a < 1.0 && b < 1.0));
    Ok(GapReport { z, minimizer_family: family, heights, lengths, coverage, gaps, gap_condition, deviation, mask })
}

/// Consecutive family members `(i, j, upper)` with `upper` the translate of
/// member `j` lying just above member `i`.
fn consecutive(family: &[LiftedPath], z: [i64; 2]) -> Result<Vec<(usize, usize, LiftedPath)>> {
    let w = zf(transversal(z)?);
    let k = family.len();
    Ok((0..k)
        .map(|i| {
            let j = (i + 1) % k;
            let d = mean_det(&family[j], z) - mean_det(&family[i], z);
            (i, j, family[j].translate(geom::scale((-d).floor() + 1.0, w)))
        })
        .collect())
}

/// Largest transversal width of the strip between two loops.
fn strip_width(lower: &LiftedPath, upper: &LiftedPath) -> Result<f64> {
    let strip = crate::minimizers::Strip::new(lower, upper)?;
    let s0 = strip.coords(lower.nodes[0]).0;
    Ok((0..256)
        .map(|t| {
            let (lo, hi) = strip.bounds(s0 + strip.zlen * t as f64 / 256.0);
            hi - lo
        })
        .fold(0.0, f64::max))
}

/// The pair of consecutive minimizers of class `z` bounding the widest gap.
pub fn widest_gap(m: &MetricModel, z: [i64; 2], seeds: usize, nodes_per_period: usize) -> Result<(LiftedPath, LiftedPath, f64)> {
    let (family, _, _) = periodic_family(m, z, seeds, nodes_per_period)?;
    let mut best: Option<(LiftedPath, LiftedPath, f64)> = None;
    for (i, _, upper) in consecutive(&family, z)? {
        let w = strip_width(&family[i], &upper)?;
        if best.as_ref().map_or(true, |b| w > b.2) {
            best = Some((family[i].clone(), upper, w));
        }
    }
    match best {
        Some(b) if b.2 > 2.0 / COVER_GRID as f64 => Ok(b),
        _ => Err(Error::NoGap),
    }
}

fn scan_gap(m: &MetricModel, q0: &LiftedPath, q1: &LiftedPath, lower: usize, upper: usize, width: f64, opt: &GapScanOptions) -> GapInfo {
    let mut info = GapInfo { lower, upper, width, omega_plus: None, omega_minus: None, het_coverage_plus: None, het_coverage_minus: None, errors: vec![], plus: None, minus: None };
    for sign in [HetSign::Plus, HetSign::Minus] {
        let run = || -> Result<(HeteroclinicResult, f64)> {
            let p = HeteroclinicProblem::new(m, q0, q1, opt.window, sign)?;
            let r = heteroclinic(&p)?;
            let cov = het_fan_coverage(&p, &r, opt.fan, opt.fan_tol);
            Ok((r, cov))
        };
        match run() {
            Ok((r, cov)) => match sign {
                HetSign::Plus => {
                    info.omega_plus = Some(r.omega);
                    info.het_coverage_plus = Some(cov);
                    info.plus = Some(r);
                }
                HetSign::Minus => {
                    info.omega_minus = Some(r.omega);
                    info.het_coverage_minus = Some(cov);
                    info.minus = Some(r);
                }
            },
            Err(e) => info.errors.push(format!("{sign:?}: {e}")),
        }
    }
    info
}

/// Excess of the least `J` among heteroclinics forced through `x` over
/// `omega`; the window is split at the node pinned to `x`.
pub fn pinned_excess(p: &HeteroclinicProblem, r: &HeteroclinicResult, node_in_period: usize, u: f64) -> f64 {
    let n = r.window;
    let per = p.q0.loop_nodes().len();
    let k = n * per + node_in_period % per;
    // place the smooth transition so that the seed passes through level u
    let sig = match p.sign {
        HetSign::Plus => u,
        HetSign::Minus => 1.0 - u,
    };
    let x = 0.5 * (2.0 * sig - 1.0).clamp(-0.999999, 0.999999).atanh();
    let center = k as f64 / per as f64 - x;
    let mut seed = p.seed(n, center);
    let (s, _) = p.strip.coords(seed[k]);
    seed[k] = p.strip.at_u(s, u);
    let left = solve_window_with(p, seed[..=k].to_vec(), &[]);
    let right = solve_window_with(p, seed[k..].to_vec(), &[]);
    left.omega + right.omega - r.omega
}

/// Fraction of a `fan x fan` grid of interior points through which a
/// heteroclinic of the problem's sign attains `omega` within `tol`.
pub fn het_fan_coverage(p: &HeteroclinicProblem, r: &HeteroclinicResult, fan: usize, tol: f64) -> f64 {
    let per = p.q0.loop_nodes().len();
    let pts: Vec<(usize, f64)> = (0..fan).flat_map(|i| (0..fan).map(move |j| (i * per / fan, (j as f64 + 0.5) / fan as f64))).collect();
    let ex = par::map_slice(&pts, |(k, u)| pinned_excess(p, r, *k, *u));
    ex.iter().filter(|e| **e <= tol).count() as f64 / pts.len() as f64
}

impl GapReport {
    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let g = COVER_GRID;
        writeln!(w, "P2\n{g} {g}\n255")?;
        for j in (0..g).rev() {
            let row: Vec<String> = (0..g).map(|i| if self.mask[j * g + i] { "255".into() } else { "0".into() }).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn has_gaps(&self) -> bool {
        !self.gaps.is_empty()
    }
}

/// Pairwise crossings and the least distance between the given polylines.
pub fn graph_property_test(paths: &[LiftedPath], same_direction: bool) -> Result<CrossingReport> {
    if paths.len() < 2 {
        return Err(Error::Invalid("need at least two paths".into()));
    }
    if same_direction {
        let d = |p: &LiftedPath| geom::sub(*p.nodes.last().unwrap(), p.nodes[0]);
        let d0 = d(&paths[0]);
        for p in &paths[1..] {
            if geom::dot(d(p), d0) <= 0.0 {
                return Err(Error::Invalid("paths do not share a direction".into()));
            }
        }
    }
    let pairs: Vec<(usize, usize)> = (0..paths.len()).flat_map(|i| (i + 1..paths.len()).map(move |j| (i, j))).collect();
    let res = par::map_slice(&pairs, |(i, j)| {
        let c = polyline_crossings(&paths[*i].nodes, &paths[*j].nodes, 0.0);
        (c, polyline_distance(&paths[*i].nodes, &paths[*j].nodes))
    });
    let mut crossings = Vec::new();
    let mut min_clearance = f64::INFINITY;
    for ((i, j), (c, d)) in pairs.iter().zip(res) {
        if c > 0 {
            crossings.push((*i, *j));
        }
        min_clearance = min_clearance.min(d);
    }
    Ok(CrossingReport { crossings, min_clearance })
}

/// Least distance between two polylines (zero if they cross).
pub fn polyline_distance(a: &[V2], b: &[V2]) -> f64 {
    if polyline_crossings(a, b, 0.0) > 0 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for p in a {
        for w in b.windows(2) {
            best = best.min(geom::seg_point_dist(w[0], w[1], *p));
        }
    }
    for p in b {
        for w in a.windows(2) {
            best = best.min(geom::seg_point_dist(w[0], w[1], *p));
        }
    }
    best
}

fn angle_of(v: V2) -> f64 {
    v[1].atan2(v[0])
}

/// Merge the two approximant families into a velocity field for the
/// irrational direction `h`.
pub fn assemble_torus(m: &MetricModel, h: V2, q: usize, grid: usize) -> Result<TorusGraphSample> {
    assemble_torus_with(m, h, q, grid, 32, 16)
}

pub fn assemble_torus_with(m: &MetricModel, h: V2, q: usize, grid: usize, seeds: usize, nodes_per_period: usize) -> Result<TorusGraphSample> {
    if let Bracket::Exact(z) = farey_bracket(h, (q / 4).max(1)) {
        return Err(Error::Invalid(format!("direction is parallel to the class {z:?}")));
    }
    let (z1, z2) = match farey_bracket(h, q) {
        Bracket::Between { z1, z2, .. } => (z1, z2),
        Bracket::Exact(z) => return Err(Error::Invalid(format!("direction is parallel to the class {z:?}"))),
    };
    let ang = |v: V2| angle_of(v);
    let (p1, p2, ph) = (ang(zf(z1)), ang(zf(z2)), ang(h));
    let d12 = geom::wrap_angle(p2 - p1);
    let w1 = geom::wrap_angle(p2 - ph) / d12;
    let weights = [w1, 1.0 - w1];
    let mut families: [Vec<Seg>; 2] = [Vec::new(), Vec::new()];
    for (fi, z) in [z1, z2].into_iter().enumerate() {
        let opt = GapScanOptions { nodes_per_period, ..GapScanOptions::default() };
        let (fam, _, _) = periodic_family(m, z, seeds, nodes_per_period)?;
        let mut paths = fam.clone();
        // fill strips not covered by the periodic family with the +
        // heteroclinic and its translates
        let mask = coverage_mask(&fam, COVER_GRID);
        let cov = mask.iter().filter(|b| **b).count() as f64 / mask.len() as f64;
        if cov < 1.0 - 1.0 / 64.0 && fam.len() == 1 {
            let w = transversal(z)?;
            let upper = fam[0].translate(zf(w));
            let p = HeteroclinicProblem::new(m, &fam[0], &upper, opt.window, HetSign::Plus)?;
            let r = heteroclinic(&p)?;
            paths.push(r.path);
        }
        families[fi] = segments(&paths, m);
    }
    let mut t = TorusGraphSample { h, approximants: [z1, z2], weights, grid, field: vec![], lipschitz_estimate: 0.0, max_trace_distance: 0.0, families };
    let pts: Vec<V2> = (0..grid * grid).map(|k| [((k % grid) as f64 + 0.5) / grid as f64, ((k / grid) as f64 + 0.5) / grid as f64]).collect();
    let vals: Vec<Result<(V2, f64)>> = par::map_slice(&pts, |x| t.sample(m, *x, 1.0 / grid as f64));
    let mut field = Vec::with_capacity(pts.len());
    for v in vals {
        let (v, d) = v?;
        t.max_trace_distance = t.max_trace_distance.max(d);
        field.push(v);
    }
    let mut lip: f64 = 0.0;
    let step = 1.0 / grid as f64;
    for j in 0..grid {
        for i in 0..grid {
            let a = field[j * grid + i];
            let r = field[j * grid + (i + 1) % grid];
            let u = field[((j + 1) % grid) * grid + i];
            lip = lip.max(geom::dist(a, r) / step).max(geom::dist(a, u) / step);
        }
    }
    t.field = field;
    t.lipschitz_estimate = lip;
    Ok(t)
}

impl TorusGraphSample {
    /// Velocity angle of a family at `x`, with the distance to its nearest
    /// trace. The angle is interpolated between the nearest leaf and the
    /// nearest distinct leaf on the other side of `x`. Traces of distinct
    /// leaves within `r` must agree to [`SPREAD_TOL`].
    fn family_angle(&self, f: usize, x: V2, r: f64) -> Result<(f64, f64)> {
        let segs = &self.families[f];
        let near: Vec<(f64, &Seg)> = segs.iter().map(|s| (seg_dist(s, x), s)).collect();
        let (d0, s0) = near.iter().copied().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
        let a0 = angle_of(s0.v);
        let side = |s: &Seg| {
            let mid = geom::lerp(s.a, s.b, 0.5);
            let y = geom::add(x, [(mid[0] - x[0]).round(), (mid[1] - x[1]).round()]);
            geom::cross(s.v, geom::sub(y, s.a)).signum()
        };
        let s0_side = side(s0);
        let mut other: Option<(f64, &Seg)> = None;
        for (d, s) in &near {
            if *d > 4.0 * r || s.curve == s0.curve {
                continue;
            }
            if *d <= r {
                let spread = geom::wrap_angle(angle_of(s.v) - a0).abs();
                if spread > SPREAD_TOL {
                    return Err(Error::MultiValued { x, spread });
                }
            }
            if side(s) != s0_side && other.map_or(true, |o| *d < o.0) {
                other = Some((*d, s));
            }
        }
        let a = match other {
            Some((d1, s1)) if d0 + d1 > 0.0 => a0 + d0 / (d0 + d1) * geom::wrap_angle(angle_of(s1.v) - a0),
            _ => a0,
        };
        Ok((a, d0))
    }

    fn sample(&self, m: &MetricModel, x: V2, r: f64) -> Result<(V2, f64)> {
        let (a1, d1) = self.family_angle(0, x, r)?;
        let (a2, d2) = self.family_angle(1, x, r)?;
        let th = a1 + self.weights[1] * geom::wrap_angle(a2 - a1);
        let e = geom::unit(th);
        let f = m.f(x, e);
        Ok((geom::scale(1.0 / f, e), d1.max(d2)))
    }

    /// Velocity angle of the assembled field at an arbitrary base point.
    pub fn angle_at(&self, m: &MetricModel, x: V2) -> Result<f64> {
        let (v, _) = self.sample(m, x, 1.0 / self.grid as f64)?;
        Ok(angle_of(v))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x1,x2,v1,v2")?;
        let g = self.grid;
        for (k, v) in self.field.iter().enumerate() {
            let x = [((k % g) as f64 + 0.5) / g as f64, ((k / g) as f64 + 0.5) / g as f64];
            writeln!(w, "{:.12e},{:.12e},{:.12e},{:.12e}", x[0], x[1], v[0], v[1])?;
        }
        Ok(())
    }
}

/// Count base points where the velocity angles of tori with counterclockwise
/// ordered directions fail to appear in the same cyclic order.
pub fn cyclic_order_violations(m: &MetricModel, tori: &[&TorusGraphSample], points: &[V2]) -> Result<usize> {
    let tau = 2.0 * std::f64::consts::PI;
    let mut bad = 0;
    for x in points {
        let ang: Vec<f64> = tori.iter().map(|t| t.angle_at(m, *x)).collect::<Result<_>>()?;
        let rel: Vec<f64> = ang.iter().map(|a| (a - ang[0]).rem_euclid(tau)).collect();
        if !rel.windows(2).all(|w| w[0] < w[1]) {
            bad += 1;
        }
    }
    Ok(bad)
}
