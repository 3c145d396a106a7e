//! Continuous minimal geodesics on the torus: periodic minimizers per class,
//! rotation vectors, heteroclinics and multibump minimizers.

pub mod heteroclinic;
pub mod multibump;
pub mod solver;

use crate::actiongraph::ActionGraph;
use crate::error::{Error, Result};
use crate::flow::OrbitSample;
use crate::geom::{self, V2};
use crate::metrics::MetricModel;
use serde::Serialize;
use solver::{Ends, Solver};
use std::io::Write;

pub use heteroclinic::{asymptotic_action_j, heteroclinic, HetSign, HeteroclinicProblem, HeteroclinicResult, Strip};
pub use multibump::{linear_fit, multibump, search_parameters, MultibumpResult, SwitchSpec, Switches, Wall};

#[derive(Clone, Debug, Serialize)]
pub struct LiftedPath {
    pub nodes: Vec<V2>,
    /// For loops `nodes[last] = nodes[0] + z`.
    pub closed_class: Option<[i64; 2]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RotationData {
    pub rho: V2,
    pub delta_plus: V2,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Minimizer {
    pub path: LiftedPath,
    pub length: f64,
    pub seed_length: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub history: Vec<f64>,
}

impl Minimizer {
    /// Turn an unconverged result into `NoConvergence`.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence { iterations: self.iterations, residual: self.residual })
        }
    }
}

impl LiftedPath {
    pub fn open(nodes: Vec<V2>) -> Self {
        Self { nodes, closed_class: None }
    }

    pub fn closed(mut nodes: Vec<V2>, z: [i64; 2]) -> Self {
        let first = nodes[0];
        nodes.push(geom::add(first, zf(z)));
        Self { nodes, closed_class: Some(z) }
    }

    /// Stored nodes of a loop without the repeated endpoint.
    pub fn loop_nodes(&self) -> &[V2] {
        match self.closed_class {
            Some(_) => &self.nodes[..self.nodes.len() - 1],
            None => &self.nodes,
        }
    }

    pub fn length(&self, m: &MetricModel) -> f64 {
        solver::poly_len(m, &self.nodes)
    }

    /// `A_{L_F - eta + 1/2}` at unit speed: `l_F - <eta, displacement>`.
    pub fn action(&self, m: &MetricModel, eta: V2) -> f64 {
        self.length(m) - geom::dot(eta, geom::sub(*self.nodes.last().unwrap(), self.nodes[0]))
    }

    pub fn translate(&self, w: V2) -> Self {
        Self { nodes: self.nodes.iter().map(|p| geom::add(*p, w)).collect(), closed_class: self.closed_class }
    }

    /// Loop repeated `k` times as an open path.
    pub fn unroll(&self, k: usize) -> Self {
        let z = zf(self.closed_class.expect("unroll needs a loop"));
        let base = self.loop_nodes();
        let mut nodes = Vec::with_capacity(base.len() * k + 1);
        for r in 0..k {
            let w = geom::scale(r as f64, z);
            nodes.extend(base.iter().map(|p| geom::add(*p, w)));
        }
        nodes.push(geom::add(base[0], geom::scale(k as f64, z)));
        Self::open(nodes)
    }

    /// Cumulative F-arc-length at each node.
    pub fn arclength(&self, m: &MetricModel) -> Vec<f64> {
        // compensated summation: unrolled loops run to ~1e6 segments
        let mut s = vec![0.0];
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for w in self.nodes.windows(2) {
            let x = solver::seg_len(m, w[0], w[1]);
            let t = sum + x;
            comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
            sum = t;
            s.push(sum + comp);
        }
        s
    }

    /// Half-width of the thinnest strip of direction `dir` containing the path.
    pub fn deviation(&self, dir: V2) -> f64 {
        let n = geom::perp(geom::scale(1.0 / geom::norm(dir), dir));
        let (lo, hi) = self
            .nodes
            .iter()
            .map(|p| geom::dot(*p, n))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(t), b.max(t)));
        0.5 * (hi - lo)
    }

    pub fn write_csv<W: Write>(&self, m: &MetricModel, mut w: W) -> std::io::Result<()> {
        writeln!(w, "s,x1,x2")?;
        for (s, p) in self.arclength(m).iter().zip(&self.nodes) {
            writeln!(w, "{},{},{}", s, p[0], p[1])?;
        }
        Ok(())
    }
}

pub(crate) fn zf(z: [i64; 2]) -> V2 {
    [z[0] as f64, z[1] as f64]
}

/// Periodic minimizer of class `z`, seeded from the graph's stable-norm path.
pub fn periodic_minimizer(m: &MetricModel, z: [i64; 2], n_path: usize, g: &ActionGraph) -> Result<Minimizer> {
    if z == [0, 0] {
        return Err(Error::Invalid("class must be nonzero".into()));
    }
    let seed = g.stable_norm_path(z, 1);
    periodic_from_seed(m, z, n_path, &seed.nodes)
}

/// Periodic minimizer of class `z` started from the straight loop through `x0`.
pub fn periodic_from_point(m: &MetricModel, z: [i64; 2], n_path: usize, x0: V2) -> Result<Minimizer> {
    let seed = [x0, geom::add(x0, zf(z))];
    periodic_from_seed(m, z, n_path, &seed)
}

/// Refine a lifted seed polyline running from `x` to `x + z`.
pub fn periodic_from_seed(m: &MetricModel, z: [i64; 2], n_path: usize, seed: &[V2]) -> Result<Minimizer> {
    m.require_torus("periodic_minimizer")?;
    if n_path < 8 {
        return Err(Error::Invalid("need at least 8 path nodes".into()));
    }
    let end = *seed.last().unwrap();
    let disp = geom::sub(end, seed[0]);
    if geom::dist(disp, zf(z)) > 1e-9 {
        return Err(Error::Invalid(format!("seed displacement {disp:?} is not the class {z:?}")));
    }
    let seed_length = solver::poly_len(m, seed);
    let mut nodes = solver::resample_by(seed, n_path, |a, b| solver::seg_len(m, a, b));
    let solver = Solver::new(m, Ends::Closed(zf(z)));
    let mut rep = solver.run(&mut nodes);
    // one F-arc-length redistribution, kept only if it does not lengthen
    let redistributed = solver::equidistribute_closed(m, &nodes, zf(z), n_path);
    if solver.length(&redistributed) <= rep.length {
        let mut trial = redistributed;
        let rep2 = solver.run(&mut trial);
        if rep2.length <= rep.length {
            let mut history = rep.history;
            history.extend(rep2.history);
            rep = solver::SolveReport { history, iterations: rep.iterations + rep2.iterations, ..rep2 };
            nodes = trial;
        }
    }
    Ok(Minimizer {
        path: LiftedPath::closed(nodes, z),
        length: rep.length,
        seed_length,
        residual: rep.residual,
        iterations: rep.iterations,
        converged: rep.converged,
        history: rep.history,
    })
}

fn rotation_from_samples(t: &[f64], x: &[V2]) -> Result<RotationData> {
    let n = t.len();
    let total = t[n - 1] - t[0];
    if total < 50.0 {
        return Err(Error::TooShort { length: total, required: 50.0 });
    }
    let k = n as f64;
    let tm = geom::ksum(t.iter().copied()) / k;
    let xm = [geom::ksum(x.iter().map(|p| p[0])) / k, geom::ksum(x.iter().map(|p| p[1])) / k];
    let stt = geom::ksum(t.iter().map(|ti| (ti - tm) * (ti - tm)));
    let stx = [
        geom::ksum(t.iter().zip(x).map(|(ti, xi)| (ti - tm) * (xi[0] - xm[0]))),
        geom::ksum(t.iter().zip(x).map(|(ti, xi)| (ti - tm) * (xi[1] - xm[1]))),
    ];
    let rho = [stx[0] / stt, stx[1] / stt];
    let mut residual: f64 = 0.0;
    for (ti, xi) in t.iter().zip(x) {
        let fit = geom::add(xm, geom::scale(ti - tm, rho));
        residual = residual.max(geom::dist(fit, *xi));
    }
    let disp = geom::sub(x[n - 1], x[0]);
    let dn = geom::norm(disp);
    let delta_plus = if dn > 0.0 { geom::scale(1.0 / dn, disp) } else { [0.0, 0.0] };
    Ok(RotationData { rho, delta_plus, residual })
}

/// Rotation vector of an arc-length parametrised orbit, fitted over the
/// trailing 80% of the sample.
pub fn rotation_vector_orbit(o: &OrbitSample) -> Result<RotationData> {
    let n = o.len();
    if n < 2 {
        return Err(Error::TooShort { length: 0.0, required: 50.0 });
    }
    let total = o.times[n - 1] - o.times[0];
    if total < 50.0 {
        return Err(Error::TooShort { length: total, required: 50.0 });
    }
    let start = o.times.iter().position(|&t| t >= o.times[0] + 0.2 * total).unwrap_or(0);
    let t = &o.times[start..];
    let x: Vec<V2> = o.states[start..].iter().map(|w| w.x).collect();
    rotation_from_samples(t, &x)
}

/// Rotation vector of a lifted path at F-arc-length. Loops are unrolled to
/// total length at least `1e4` and the fit window is cut at whole periods.
pub fn rotation_vector_path(m: &MetricModel, p: &LiftedPath) -> Result<RotationData> {
    match p.closed_class {
        Some(_) => {
            let period = p.length(m);
            if !(period > 0.0) {
                return Err(Error::TooShort { length: period, required: 50.0 });
            }
            let k = ((1e4 / period).ceil() as usize).max(50);
            let skip = k / 5;
            let un = p.unroll(k);
            let per = p.loop_nodes().len();
            let s = un.arclength(m);
            let start = skip * per;
            rotation_from_samples(&s[start..], &un.nodes[start..])
        }
        None => {
            let s = p.arclength(m);
            let total = *s.last().unwrap();
            let start = s.iter().position(|&t| t >= 0.2 * total).unwrap_or(0);
            rotation_from_samples(&s[start..], &p.nodes[start..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(m: &MetricModel) -> ActionGraph {
        ActionGraph::build(m, 16, 3).unwrap()
    }

    #[test]
    fn flat_horizontal_loop() {
        let m = MetricModel::flat();
        let r = periodic_minimizer(&m, [1, 0], 32, &graph(&m)).unwrap();
        assert!(r.converged);
        assert!((r.length - 1.0).abs() < 1e-8);
        assert!(r.length <= r.seed_length + 1e-12);
    }

    #[test]
    fn flat_diagonal_loop() {
        let m = MetricModel::flat();
        let r = periodic_minimizer(&m, [3, 4], 80, &graph(&m)).unwrap();
        assert!(r.converged, "{} {}", r.residual, r.iterations);
        assert!((r.length - 5.0).abs() < 1e-7, "{}", r.length);
    }

    #[test]
    fn bump_loop_bends_and_is_shorter_than_the_bump_line() {
        let m = MetricModel::bump();
        let g = ActionGraph::build(&m, 32, 3).unwrap();
        let r = periodic_minimizer(&m, [1, 0], 64, &g).unwrap();
        assert!(r.converged, "{} {}", r.residual, r.iterations);
        assert!(r.length < 1.5);
        assert!(r.path.deviation([1.0, 0.0]) > 1e-3);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0] + 1e-13));
        let sn = g.stable_norm([1, 0], 1);
        assert!((r.length - sn).abs() <= 0.02 * sn, "{} {}", r.length, sn);
    }

    #[test]
    fn rotation_of_flat_loop() {
        let m = MetricModel::flat();
        let r = periodic_from_point(&m, [1, 0], 16, [0.1, 0.3]).unwrap();
        let rot = rotation_vector_path(&m, &r.path).unwrap();
        assert!(geom::dist(rot.rho, [1.0, 0.0]) < 1e-9);
        assert!(rot.residual < 1e-9, "{rot:?}");
    }

    #[test]
    fn short_paths_are_rejected() {
        let m = MetricModel::flat();
        let p = LiftedPath::open(vec![[0.0, 0.0], [1.0, 0.0]]);
        assert!(matches!(rotation_vector_path(&m, &p), Err(Error::TooShort { .. })));
    }
}
