//! Geodesic flow by fixed-step RK4.
//!
//! Torus models integrate the Euler-Lagrange system `x' = v, v' = a(x, v)`.
//! Cylinder models integrate Hamilton's equations in `(x, eta)`: either for the
//! energy `H^2 / 2` (geodesic flow) or for the norm `H` itself, which gives the
//! degree-one flow with `phi^t(r xi) = r phi^t(xi)`.

use crate::error::{Error, Result};
use crate::geom::{self, V2};
use crate::metrics::{Chart, MetricModel, TangentVec};
use serde::Serialize;
use std::io::Write;

/// Relative energy drift that aborts an integration.
pub const MAX_DRIFT: f64 = 1e-4;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct OrbitSample {
    pub times: Vec<f64>,
    pub states: Vec<TangentVec>,
    pub energy_trace: Vec<f64>,
    /// Covectors along the orbit for models integrated on the cotangent side.
    pub covectors: Option<Vec<V2>>,
}

impl OrbitSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &TangentVec {
        self.states.last().expect("empty orbit")
    }

    /// Base points reduced to the fundamental domain of the torus.
    pub fn wrapped(&self, m: &MetricModel) -> Result<Vec<V2>> {
        if m.chart() != Chart::Torus {
            return Err(Error::ChartMismatch("wrapping to the torus needs a torus-chart metric".into()));
        }
        Ok(self.states.iter().map(|s| [s.x[0].rem_euclid(1.0), s.x[1].rem_euclid(1.0)]).collect())
    }

    pub fn max_relative_drift(&self) -> f64 {
        let e0 = self.energy_trace[0];
        self.energy_trace.iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x1,x2,v1,v2,E")?;
        for ((t, s), e) in self.times.iter().zip(&self.states).zip(&self.energy_trace) {
            writeln!(w, "{},{},{},{},{},{}", t, s.x[0], s.x[1], s.v[0], s.v[1], e)?;
        }
        Ok(())
    }
}

/// Which Hamiltonian drives a cotangent integration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    /// `H^2 / 2`, the geodesic flow.
    Energy,
    /// `H` itself.
    Norm,
}

fn check_step(t_total: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt <= 1e-2) {
        return Err(Error::Invalid(format!("dt must lie in (0, 1e-2], got {dt}")));
    }
    if !(t_total >= 0.0) || t_total / dt > 1e7 {
        return Err(Error::Invalid(format!("T/dt must be at most 1e7 (T = {t_total}, dt = {dt})")));
    }
    Ok((t_total / dt).round() as usize)
}

/// Integrate the geodesic flow, recording every step.
pub fn integrate(m: &MetricModel, w0: TangentVec, t_total: f64, dt: f64) -> Result<OrbitSample> {
    integrate_every(m, w0, t_total, dt, 1)
}

/// Integrate the geodesic flow, recording every `every`-th step and the end point.
pub fn integrate_every(m: &MetricModel, w0: TangentVec, t_total: f64, dt: f64, every: usize) -> Result<OrbitSample> {
    let steps = check_step(t_total, dt)?;
    let f0 = m.eval_f(&w0)?;
    if !(f0 > 0.0) {
        return Err(Error::ZeroVelocity);
    }
    match m.chart() {
        Chart::Torus => integrate_tangent(m, w0, steps, dt, every.max(1)),
        Chart::Cylinder => {
            let eta = m.covector(w0.x, w0.v)?;
            integrate_cotangent(m, w0.x, eta, steps, dt, every.max(1), Generator::Energy)
        }
    }
}

/// Integrate Hamilton's equations from a covector, `steps` fixed steps.
pub fn integrate_cotangent(
    m: &MetricModel,
    x0: V2,
    eta0: V2,
    steps: usize,
    dt: f64,
    every: usize,
    generator: Generator,
) -> Result<OrbitSample> {
    let every = every.max(1);
    let rhs = |y: [f64; 4]| -> [f64; 4] {
        let x = [y[0], y[1]];
        let e = [y[2], y[3]];
        let (hx, he) = m.dual_grad(x, e);
        let s = match generator {
            Generator::Energy => m.hamiltonian(x, e),
            Generator::Norm => 1.0,
        };
        [s * he[0], s * he[1], -s * hx[0], -s * hx[1]]
    };
    let energy = |y: &[f64; 4]| 0.5 * m.hamiltonian([y[0], y[1]], [y[2], y[3]]).powi(2);
    let mut y = [x0[0], x0[1], eta0[0], eta0[1]];
    let e0 = energy(&y);
    if !(e0 > 0.0) || !e0.is_finite() {
        return Err(Error::ZeroVelocity);
    }
    let cap = steps / every + 2;
    let mut out = OrbitSample {
        times: Vec::with_capacity(cap),
        states: Vec::with_capacity(cap),
        energy_trace: Vec::with_capacity(cap),
        covectors: Some(Vec::with_capacity(cap)),
    };
    let push = |out: &mut OrbitSample, t: f64, y: &[f64; 4], e: f64| {
        let x = [y[0], y[1]];
        let eta = [y[2], y[3]];
        out.times.push(t);
        out.states.push(TangentVec::new(x, m.velocity(x, eta)));
        out.energy_trace.push(e);
        if let Some(c) = out.covectors.as_mut() {
            c.push(eta);
        }
    };
    push(&mut out, 0.0, &y, e0);
    for n in 1..=steps {
        y = rk4(&rhs, y, dt);
        let record = n % every == 0 || n == steps;
        if record || n % 64 == 0 {
            let e = energy(&y);
            let drift = (e - e0).abs() / e0;
            if !(drift <= MAX_DRIFT) {
                return Err(Error::StepRejected { drift, t: n as f64 * dt });
            }
            if record {
                push(&mut out, n as f64 * dt, &y, e);
            }
        }
    }
    Ok(out)
}

fn integrate_tangent(m: &MetricModel, w0: TangentVec, steps: usize, dt: f64, every: usize) -> Result<OrbitSample> {
    let rhs = |y: [f64; 4]| -> [f64; 4] {
        let a = m.accel([y[0], y[1]], [y[2], y[3]]);
        [y[2], y[3], a[0], a[1]]
    };
    let energy = |y: &[f64; 4]| 0.5 * m.f([y[0], y[1]], [y[2], y[3]]).powi(2);
    let mut y = [w0.x[0], w0.x[1], w0.v[0], w0.v[1]];
    let e0 = energy(&y);
    let cap = steps / every + 2;
    let mut out = OrbitSample {
        times: Vec::with_capacity(cap),
        states: Vec::with_capacity(cap),
        energy_trace: Vec::with_capacity(cap),
        covectors: None,
    };
    out.times.push(0.0);
    out.states.push(w0);
    out.energy_trace.push(e0);
    for n in 1..=steps {
        y = rk4(&rhs, y, dt);
        let record = n % every == 0 || n == steps;
        if record || n % 64 == 0 {
            let e = energy(&y);
            let drift = (e - e0).abs() / e0;
            if !(drift <= MAX_DRIFT) {
                return Err(Error::StepRejected { drift, t: n as f64 * dt });
            }
            if record {
                out.times.push(n as f64 * dt);
                out.states.push(TangentVec::new([y[0], y[1]], [y[2], y[3]]));
                out.energy_trace.push(e);
            }
        }
    }
    Ok(out)
}

#[inline]
pub(crate) fn rk4<F: Fn([f64; 4]) -> [f64; 4]>(f: &F, y: [f64; 4], h: f64) -> [f64; 4] {
    let ax = |a: [f64; 4], k: [f64; 4], s: f64| [a[0] + s * k[0], a[1] + s * k[1], a[2] + s * k[2], a[3] + s * k[3]];
    let k1 = f(y);
    let k2 = f(ax(y, k1, 0.5 * h));
    let k3 = f(ax(y, k2, 0.5 * h));
    let k4 = f(ax(y, k3, h));
    let mut out = y;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// F-length of the orbit by the trapezoid rule in time.
pub fn orbit_length(o: &OrbitSample, m: &MetricModel) -> f64 {
    directed_length(o, m, 1.0)
}

/// F-length of the orbit traversed backwards, `int F(x, -v) dt`.
pub fn reverse_length(o: &OrbitSample, m: &MetricModel) -> f64 {
    directed_length(o, m, -1.0)
}

fn directed_length(o: &OrbitSample, m: &MetricModel, sign: f64) -> f64 {
    let sp: Vec<f64> = o.states.iter().map(|s| m.f(s.x, geom::scale(sign, s.v))).collect();
    let mut l = 0.0;
    for i in 1..o.len() {
        l += 0.5 * (sp[i] + sp[i - 1]) * (o.times[i] - o.times[i - 1]);
    }
    l
}

/// Reparametrise by F-arc-length: new times are cumulative lengths and
/// velocities are rescaled to `F = 1`.
pub fn arc_length_reparam(o: &OrbitSample, m: &MetricModel) -> Result<OrbitSample> {
    let mut sp = Vec::with_capacity(o.len());
    for (i, s) in o.states.iter().enumerate() {
        let f = m.f(s.x, s.v);
        if !(f > 0.0) {
            return Err(Error::ZeroSpeed { index: i });
        }
        sp.push(f);
    }
    let mut times = Vec::with_capacity(o.len());
    let mut acc = 0.0;
    times.push(0.0);
    for i in 1..o.len() {
        acc += 0.5 * (sp[i] + sp[i - 1]) * (o.times[i] - o.times[i - 1]);
        times.push(acc);
    }
    let states = o
        .states
        .iter()
        .zip(&sp)
        .map(|(s, f)| TangentVec::new(s.x, geom::scale(1.0 / f, s.v)))
        .collect();
    let covectors = o
        .covectors
        .as_ref()
        .map(|c| c.iter().zip(&sp).map(|(e, f)| geom::scale(1.0 / f, *e)).collect());
    Ok(OrbitSample { times, states, energy_trace: vec![0.5; o.len()], covectors })
}
