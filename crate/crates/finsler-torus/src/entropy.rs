//! Topological entropy of the geodesic flow from maximal `(T, eps)`-separated
//! sets, with the euclidean product metric on base and velocity.
//!
//! Greedy extraction gives a maximal (not maximum) separated set, so counts
//! are an estimator of `s(T, eps)`. A pair already `eps`-apart at time 0 is
//! separated for every `T`, so only pairs that start close are integrated
//! and tracked; for those the first separation time is recorded.

use crate::error::{Error, Result};
use crate::flow;
use crate::geom::{self, V2};
use crate::metrics::{Chart, MetricKind, MetricModel, TangentVec};
use crate::par;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::HashMap;
use std::io::Write;

/// Cap on `samples * T_max / dt`.
pub const STEP_CAP: f64 = 2e9;

#[derive(Clone, Debug, Serialize)]
pub struct EntropyEstimate {
    pub epsilon: f64,
    pub t_values: Vec<f64>,
    pub log_counts: Vec<f64>,
    pub counts: Vec<usize>,
    pub slope: f64,
    /// 5% and 95% quantiles of the slope over bootstrap resamples.
    pub slope_band: (f64, f64),
    pub sample_size: usize,
    pub seed: u64,
    /// Pairs closer than `eps` at time zero, the only ones integrated.
    pub near_pairs: usize,
}

#[derive(Clone, Debug)]
pub struct EntropyOptions {
    /// Integrator step; snapshots are every `eps / (4 c_F)` or finer.
    pub dt: f64,
    /// Rungs of the geometric ladder of `T` values.
    pub rungs: usize,
    pub bootstrap: usize,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        Self { dt: 1e-2, rungs: 12, bootstrap: 100 }
    }
}

/// Snapshot of one orbit: base point and unit velocity at equal times.
pub type Snapshots = Vec<(V2, V2)>;

fn phase_dist(m: &MetricModel, a: &(V2, V2), b: &(V2, V2)) -> f64 {
    let dx = geom::torus_dist(a.0, b.0, m.period());
    let dv = geom::dist(a.1, b.1);
    (dx * dx + dv * dv).sqrt()
}

/// Greedy `(T, eps)`-separated subset of orbits given as snapshot lists on a
/// common time grid covering `[0, T]`, taken in input order.
pub fn separation_count(m: &MetricModel, snaps: &[Snapshots], upto: usize, epsilon: f64) -> usize {
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..snaps.len() {
        let ok = chosen.iter().all(|&j| (0..=upto.min(snaps[i].len() - 1)).any(|k| phase_dist(m, &snaps[i][k], &snaps[j][k]) > epsilon));
        if ok {
            chosen.push(i);
        }
    }
    chosen.len()
}

/// Uniform unit-speed initial conditions. On the cylinder only covectors
/// whose Clairaut integral keeps the orbit inside the sampled band are kept.
pub fn sample_initial(m: &MetricModel, n: usize, seed: u64) -> Result<Vec<TangentVec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = m.sample_box();
    let g_edge = match &m.kind {
        MetricKind::Rotational { .. } => Some(m.conformal_g([0.0, hi[1]]).0),
        MetricKind::KatokZiller(_) => return Err(Error::ChartMismatch("entropy sampling supports torus and rotational models".into())),
        _ => None,
    };
    let mut out = Vec::with_capacity(n);
    let mut tries = 0usize;
    while out.len() < n {
        tries += 1;
        if tries > 1000 * n {
            return Err(Error::Invalid("sampling region is empty".into()));
        }
        let x = [rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])];
        let e = geom::unit(rng.gen_range(0.0..2.0 * std::f64::consts::PI));
        let f = m.f(x, e);
        let v = geom::scale(1.0 / f, e);
        if let Some(ge) = g_edge {
            let g = m.conformal_g(x).0;
            // |eta1| = g^2 |v1| for F = g |v| at unit speed; |eta| = g
            if g * g * v[0].abs() < ge * 1.000001 {
                continue;
            }
        }
        out.push(TangentVec::new(x, v));
    }
    Ok(out)
}

/// Pairs `(i, j)` with phase distance at most `eps`, via a cell grid on the
/// base.
fn near_pairs(m: &MetricModel, w: &[TangentVec], eps: f64) -> Vec<(usize, usize)> {
    let (lo, hi) = m.sample_box();
    let nx = (((hi[0] - lo[0]) / eps).floor() as i64).max(1);
    let ny = (((hi[1] - lo[1]) / eps).floor() as i64).max(1);
    let cell = |x: V2| -> (i64, i64) {
        let cx = (((x[0] - lo[0]) / (hi[0] - lo[0])).rem_euclid(1.0) * nx as f64).floor() as i64;
        let cy = (((x[1] - lo[1]) / (hi[1] - lo[1])) * ny as f64).floor() as i64;
        (cx.min(nx - 1), cy.clamp(0, ny - 1))
    };
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, t) in w.iter().enumerate() {
        grid.entry(cell(t.x)).or_default().push(i);
    }
    let periodic_y = m.chart() == Chart::Torus;
    let mut out = Vec::new();
    for (i, t) in w.iter().enumerate() {
        let (cx, cy) = cell(t.x);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let mut y = cy + dy;
                if periodic_y {
                    y = y.rem_euclid(ny);
                } else if y < 0 || y >= ny {
                    continue;
                }
                let key = ((cx + dx).rem_euclid(nx), y);
                if let Some(v) = grid.get(&key) {
                    for &j in v {
                        if j > i && phase_dist(m, &(t.x, t.v), &(w[j].x, w[j].v)) <= eps {
                            out.push((i, j));
                        }
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Least-squares slope over the trailing half of `(x, y)`.
fn trailing_slope(x: &[f64], y: &[f64]) -> f64 {
    let h = x.len() / 2;
    let (xs, ys) = (&x[h..], &y[h..]);
    if xs.len() < 2 {
        return 0.0;
    }
    crate::minimizers::linear_fit(xs, ys).1
}

/// Greedy counts for each rung: sample `i` (in order) is rejected when some
/// already chosen near partner has not separated by `T`.
fn ladder_counts(order: &[usize], sep: &HashMap<(usize, usize), f64>, partners: &[Vec<usize>], t_values: &[f64]) -> Vec<usize> {
    let n = partners.len();
    let mut counts = Vec::with_capacity(t_values.len());
    let mut prev = 0usize;
    for &t in t_values {
        let mut chosen = vec![false; n];
        let mut c = 0usize;
        for &i in order {
            let blocked = partners[i].iter().any(|&j| {
                chosen[j] && {
                    let key = if i < j { (i, j) } else { (j, i) };
                    sep.get(&key).map_or(false, |&s| s > t)
                }
            });
            if !blocked {
                chosen[i] = true;
                c += 1;
            }
        }
        // a set separated at an earlier rung stays separated
        prev = prev.max(c);
        counts.push(prev);
    }
    counts
}

pub fn estimate_entropy(m: &MetricModel, epsilon: f64, t_max: f64, samples: usize, seed: u64) -> Result<EntropyEstimate> {
    estimate_entropy_with(m, epsilon, t_max, samples, seed, &EntropyOptions::default())
}

pub fn estimate_entropy_with(m: &MetricModel, epsilon: f64, t_max: f64, samples: usize, seed: u64, opt: &EntropyOptions) -> Result<EntropyEstimate> {
    if !(1e-3..=0.5).contains(&epsilon) {
        return Err(Error::Invalid(format!("epsilon {epsilon} outside [1e-3, 0.5]")));
    }
    if samples < 1000 {
        return Err(Error::Invalid("entropy needs at least 1000 samples".into()));
    }
    if !(t_max > 0.0) || opt.rungs < 2 {
        return Err(Error::Invalid("need T_max > 0 and at least two rungs".into()));
    }
    let cf = match m.chart() {
        Chart::Torus => m.estimate_cf(32)?.c_f,
        Chart::Cylinder => 1.0,
    };
    let snap_dt = epsilon / (4.0 * cf);
    let every = ((snap_dt / opt.dt).ceil() as usize).max(1);
    let dt = snap_dt / every as f64;
    let work = samples as f64 * t_max / dt;
    if work > STEP_CAP {
        return Err(Error::BudgetExceeded { steps: work, cap: STEP_CAP });
    }
    let init = sample_initial(m, samples, seed)?;
    let pairs = near_pairs(m, &init, epsilon);
    let mut involved: Vec<usize> = pairs.iter().flat_map(|p| [p.0, p.1]).collect();
    involved.sort_unstable();
    involved.dedup();
    let orbits: Vec<Result<Snapshots>> = par::map_slice(&involved, |&i| {
        let o = flow::integrate_every(m, init[i], t_max, dt, every)?;
        Ok(o.states.iter().map(|s| (s.x, s.v)).collect())
    });
    let mut snaps: HashMap<usize, Snapshots> = HashMap::with_capacity(involved.len());
    for (i, o) in involved.iter().zip(orbits) {
        snaps.insert(*i, o?);
    }
    let seps: Vec<f64> = par::map_slice(&pairs, |(i, j)| {
        let (a, b) = (&snaps[i], &snaps[j]);
        let n = a.len().min(b.len());
        (0..n).find(|&k| phase_dist(m, &a[k], &b[k]) > epsilon).map_or(f64::INFINITY, |k| k as f64 * snap_dt)
    });
    let sep: HashMap<(usize, usize), f64> = pairs.iter().copied().zip(seps).collect();
    let mut partners = vec![Vec::new(); samples];
    for &(i, j) in &pairs {
        partners[i].push(j);
        partners[j].push(i);
    }
    let t0 = (t_max / 2f64.powi(opt.rungs as i32 - 1)).max(snap_dt);
    let ratio = (t_max / t0).powf(1.0 / (opt.rungs - 1) as f64);
    let t_values: Vec<f64> = (0..opt.rungs).map(|k| t0 * ratio.powi(k as i32)).collect();
    let mut order: Vec<usize> = (0..samples).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
    let counts = ladder_counts(&order, &sep, &partners, &t_values);
    let log_counts: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let slope = trailing_slope(&t_values, &log_counts);

    // bootstrap over sample subsets
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut boot = Vec::with_capacity(opt.bootstrap);
    for _ in 0..opt.bootstrap {
        let keep: Vec<bool> = (0..samples).map(|_| rng.gen_bool(0.5)).collect();
        let sub: Vec<usize> = order.iter().copied().filter(|&i| keep[i]).collect();
        let c = ladder_counts(&sub, &sep, &partners, &t_values);
        let lc: Vec<f64> = c.iter().map(|&c| (c.max(1) as f64).ln()).collect();
        boot.push(trailing_slope(&t_values, &lc));
    }
    boot.sort_by(|a, b| a.total_cmp(b));
    let q = |f: f64| if boot.is_empty() { slope } else { boot[((boot.len() - 1) as f64 * f).round() as usize] };
    Ok(EntropyEstimate {
        epsilon,
        t_values,
        log_counts,
        counts,
        slope,
        slope_band: (q(0.05), q(0.95)),
        sample_size: samples,
        seed,
        near_pairs: pairs.len(),
    })
}

/// Estimates over a ladder of `eps` values. Counts at a smaller `eps` are
/// raised to those at the larger one, since separation at `eps` implies
/// separation at any smaller value.
pub fn entropy_ladder(m: &MetricModel, eps: &[f64], t_max: f64, samples: usize, seed: u64, opt: &EntropyOptions) -> Result<Vec<EntropyEstimate>> {
    let mut sorted = eps.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut out: Vec<EntropyEstimate> = Vec::new();
    for e in sorted {
        let mut est = estimate_entropy_with(m, e, t_max, samples, seed, opt)?;
        if let Some(prev) = out.last() {
            for (c, p) in est.counts.iter_mut().zip(&prev.counts) {
                *c = (*c).max(*p);
            }
            est.log_counts = est.counts.iter().map(|&c| (c as f64).ln()).collect();
            est.slope = trailing_slope(&est.t_values, &est.log_counts);
        }
        out.push(est);
    }
    Ok(out)
}

pub fn write_csv<W: Write>(ests: &[EntropyEstimate], mut w: W) -> std::io::Result<()> {
    writeln!(w, "epsilon,T,count")?;
    for e in ests {
        for (t, c) in e.t_values.iter().zip(&e.counts) {
            writeln!(w, "{},{:.12e},{}", e.epsilon, t, c)?;
        }
    }
    Ok(())
}
