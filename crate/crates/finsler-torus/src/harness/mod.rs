//! Experiment configuration and orchestration for the command-line driver.
//! This is the only module that touches the file system.

pub mod config;

pub use config::ExperimentConfig;

use crate::actiongraph::ActionGraph;
use crate::entropy::{self, EntropyOptions};
use crate::error::{Error, Result};
use crate::flow;
use crate::katok;
use crate::mather;
use crate::metrics::{MetricModel, TangentVec};
use crate::minimizers::{self, heteroclinic, linear_fit, multibump, search_parameters, HetSign, HeteroclinicProblem, Switches};
use crate::structure::{self, GapScanOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Version of the JSON layouts written by the harness.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Integrate,
    Minimize,
    BetaTable,
    AlphaLevel,
    GapScan,
    Heteroclinic,
    Multibump,
    Entropy,
    Torus,
    KatokCheck,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Integrate,
        Command::Minimize,
        Command::BetaTable,
        Command::AlphaLevel,
        Command::GapScan,
        Command::Heteroclinic,
        Command::Multibump,
        Command::Entropy,
        Command::Torus,
        Command::KatokCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Integrate => "integrate",
            Command::Minimize => "minimize",
            Command::BetaTable => "beta-table",
            Command::AlphaLevel => "alpha-level",
            Command::GapScan => "gap-scan",
            Command::Heteroclinic => "heteroclinic",
            Command::Multibump => "multibump",
            Command::Entropy => "entropy",
            Command::Torus => "torus",
            Command::KatokCheck => "katok-check",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub metric: String,
    pub metric_hash: String,
    pub parallel: bool,
    pub status: String,
    pub exit_code: Option<i32>,
    pub wall_clock_s: f64,
    pub timings: Vec<(String, f64)>,
    pub outputs: Vec<String>,
    pub error: Option<Value>,
}

/// Hex SHA-256 of the canonical TOML form of a config.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let d = Sha256::digest(cfg.to_toml().as_bytes());
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory, manifest and timers of one run. Files are written from
/// the calling thread only.
struct Run {
    dir: PathBuf,
    manifest: RunManifest,
    start: Instant,
}

impl Run {
    fn new(dir: &Path, cmd: Command, cfg: &ExperimentConfig, m: &MetricModel) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            command: cmd.name().into(),
            config_hash: config_hash(cfg),
            code_version: env!("CARGO_PKG_VERSION").into(),
            seed: cfg.seed,
            metric: m.name().into(),
            metric_hash: m.hash_hex(),
            parallel: crate::par::is_parallel(),
            status: "running".into(),
            exit_code: None,
            wall_clock_s: 0.0,
            timings: vec![],
            outputs: vec![],
            error: None,
        };
        let run = Self { dir: dir.to_path_buf(), manifest, start: Instant::now() };
        run.write_manifest()?;
        fs::write(dir.join("config.toml"), cfg.to_toml())?;
        Ok(run)
    }

    fn write_manifest(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }

    fn timed<T>(&mut self, op: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.manifest.timings.push((op.to_string(), t.elapsed().as_secs_f64()));
        out
    }

    fn file(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(self.dir.join(name))?);
        f(&mut w)?;
        w.flush()?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        let mut v = v.clone();
        if let Value::Object(m) = &mut v {
            m.insert("schema_version".into(), SCHEMA_VERSION.into());
        }
        let text = serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))?;
        self.file(name, |w| w.write_all(text.as_bytes()))
    }

    fn gnuplot(&mut self, body: &str) -> Result<()> {
        let text = format!("# gnuplot script; run from this directory\nset datafile separator ','\nset key autotitle columnhead\n{body}\n");
        self.file("plot.gp", |w| w.write_all(text.as_bytes()))
    }

    fn finish(mut self, outcome: &Result<()>) -> Result<i32> {
        let code = match outcome {
            Ok(()) => 0,
            Err(e) => e.exit_code(),
        };
        self.manifest.status = if code == 0 { "ok".into() } else { "failed".into() };
        self.manifest.exit_code = Some(code);
        self.manifest.error = outcome.as_ref().err().map(Error::to_json);
        self.manifest.wall_clock_s = self.start.elapsed().as_secs_f64();
        if let Some(e) = &self.manifest.error {
            let text = serde_json::to_string_pretty(e).unwrap_or_default();
            fs::write(self.dir.join("error.json"), text)?;
        }
        self.write_manifest()?;
        Ok(code)
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Run `cmd` writing into `out`. Validation failures before the output
/// directory exists come back as `Err`; afterwards the error is recorded in
/// the manifest and `error.json` and its exit code returned.
pub fn run(cmd: Command, cfg: &ExperimentConfig, out: &Path) -> Result<i32> {
    cfg.validate()?;
    if cfg.threads > 0 {
        crate::par::init_threads(cfg.threads);
    }
    let m = cfg.metric.build()?;
    let mut r = Run::new(out, cmd, cfg, &m)?;
    let outcome = dispatch(cmd, cfg, &m, &mut r);
    r.finish(&outcome)
}

fn dispatch(cmd: Command, cfg: &ExperimentConfig, m: &MetricModel, r: &mut Run) -> Result<()> {
    match cmd {
        Command::Integrate => cmd_integrate(cfg, m, r),
        Command::Minimize => cmd_minimize(cfg, m, r),
        Command::BetaTable => cmd_beta_table(cfg, m, r),
        Command::AlphaLevel => cmd_alpha_level(cfg, m, r),
        Command::GapScan => cmd_gap_scan(cfg, m, r),
        Command::Heteroclinic => cmd_heteroclinic(cfg, m, r),
        Command::Multibump => cmd_multibump(cfg, m, r),
        Command::Entropy => cmd_entropy(cfg, m, r),
        Command::Torus => cmd_torus(cfg, m, r),
        Command::KatokCheck => cmd_katok(cfg, m, r),
    }
}

fn graph(cfg: &ExperimentConfig, m: &MetricModel, r: &mut Run) -> Result<ActionGraph> {
    m.require_torus("action graph")?;
    let (n, s) = (cfg.graph.n, cfg.graph.s);
    if cfg.graph.cache {
        let dir = r.dir.join("cache");
        r.timed("graph", || ActionGraph::build_cached(m, n, s, &dir))
    } else {
        r.timed("graph", || ActionGraph::build(m, n, s))
    }
}

fn cmd_integrate(cfg: &ExperimentConfig, m: &MetricModel, r: &mut Run) -> Result<()> {
    let c = &cfg.integrate;
    let w0 = TangentVec::new(c.x, c.v);
    let o = r.timed("integrate", || flow::integrate_every(m, w0, c.t, c.dt, c.every))?;
    r.file("orbit.csv", |w| o.write_csv(w))?;
    let length = flow::orbit_length(&o, m);
    r.json("integrate.json", &json!({ "samples": o.len(), "max_relative_drift": o.max_relative_drift(), "length": length }))?;
    r.gnuplot("plot 'orbit.csv' using 2:3 with dots title 'orbit'")
}

fn cmd_minimize(cfg: &ExperimentConfig, m: &MetricModel, r: &mut Run) -> Result<()> {
    let g = graph(cfg, m, r)?;
    let mut rows = Vec::new();
    let mut failed = None;
    for z in &cfg.minimize.classes {
        let n_path = cfg.minimize.nodes_per_period * z[0].unsigned_abs().max(z[1].unsigned_abs()).max(1) as usize;
        let mz = r.timed(&format!("minimize {z:?}"), || minimizers::periodic_minimizer(m, *z, n_path, &g))?;
        let rot = minimizers::rotation_vector_path(m, &mz.path)?;
        r.file(&format!("minimizer_{}_{}.csv", z[0], z[1]), |w| mz.path.write_csv(m, w))?;
        if !mz.converged && failed.is_none() {
            failed = Some(Error::NoConvergence { iterations: mz.iterations, residual: mz.residual });
        }
        rows.push((z, mz, rot));
    }
    r.file("minimizers.csv", |w| {
        writeln!(w, "z1,z2,length,residual,iterations,converged,rho1,rho2,delta1,delta2")?;
        for (z, mz, rot) in &rows {
            writeln!(w, "{},{},{:.15e},{:.3e},{},{},{:.15e},{:.15e},{:.15e},{:.15e}", z[0], z[1], mz.length, mz.residual, mz.iterations, mz.converged, rot.rho[0], rot.rho[1], rot.delta_plus[0], rot.delta_plus[1])?;
        }
        Ok(())
    })?;
    let names: Vec<String> = rows.iter().map(|(z, _, _)| format!("'minimizer_{}_{}.csv' using 2:3 with lines", z[0], z[1])).collect();
    r.gnuplot(&format!("plot {}", names.join(", ")))?;
    failed.map_or(Ok(()), Err)
}

fn cmd_beta_table(cfg: &ExperimentConfig, m: &MetricModel, r: &mut Run) -> Result<()> {
    let g = graph(cfg, m, r)?;
    let t = r.timed("beta_table", || mather::beta_table(&g, cfg.mather.q))?;
    r.file("beta_table.csv", |w| t.write_csv(w))?;
    let mut corners = Vec::new();
    for z in &cfg.mather.corner_classes {
        let c = r.timed(&format!("corner {z:?}"), || mather::beta_corner(&g, *z, cfg.mather.corner_q))?;
        corners.push(c);
    }
    r.json("beta_table.json", &json!({ "q": t.q, "entries": t.entries.len(), "min_convexity": t.min_convexity(), "corners": to_value(&corners) }))?;
    r.gnuplot("plot 'beta_table.csv' using 3:5 with points title 'beta along the angle'")
}

fn cmd_alpha_level(cfg: &ExperimentConfig, m: &MetricModel, r: &mut Run) -> Result<()> {
    let g = graph(cfg, m, r)?;
    let t = r.timed("alpha_level", || mather::alpha_level(&g, cfg.mather.directions))?;
    r.file("alpha_level.csv", |w| t.write_csv(w))?;
    r.json("alpha_level.json", &json!({ "level": t.level, "points": t.entries.len() }))?;
    r.gnuplot("set size ratio -1\nplot 'alpha_level.csv' using 1:2 with linespoints title 'alpha = level'")
}

fn write_paths(r: &mut Run, name: &str, m: &MetricModel, paths: &[&minimizers::LiftedPath]) -> Result<()> {
    r.file(name, |w| {
        writeln!(w, "curve,node,x1,x2,F")?;
        for (c, p) in paths.iter().enumerate() {
            for (k, x) in p.nodes.iter().enumerate() {
                let f = p.nodes.get(k + 1).map_or(0.0, |y| crate::minimizers::solver::seg_len(m, *x, *y));
                writeln!(w, "{c},{k},{:.15e},{:.15e},{:.15e}", x[0], x[1], f)?;
            }
        }
        Ok(())
    })
}

fn cmd_gap_scan(cfg: &ExperimentConfig, m: &MetricModel, r: &mut Run) -> Result<()> {
    let c = &cfg.gap_scan;
    let opt = GapScanOptions { nodes_per_period: c.nodes_per_period, fan: c.fan, window: c.window, fan_tol: c.fan_tol };
    let rep = r.timed("gap_scan", || structure::gap_scan_with(m, c.z, c.resolution, &opt))?;
    r.file("coverage.pgm", |w| rep.write_pgm(w))?;
    let fam: Vec<&minimizers::LiftedPath> = rep.minimizer_family.iter().collect();
    write_paths(r, "family.csv", m, &fam)?;
    let mut hets = Vec::new();
    for g in &rep.gaps {
        hets.extend(g.plus.as_ref().map(|h| &h.path));
        hets.extend(g.minus.as_ref().map(|h| &h.path));
    }
    write_paths(r, "heteroclinics.csv", m, &hets)?;
    r.json(
        "gap_scan.json",
        &json!({
            "z": rep.z,
            "family_size": rep.minimizer_family.len(),
            "heights": rep.heights,
            "lengths": rep.lengths,
            "coverage": rep.coverage,
            "gaps": to_value(&rep.gaps),
            "gap_condition": rep.gap_condition,
            "deviation": rep.deviation,
        }),
    )?;
    r.gnuplot("plot 'family.csv' using 3:4 with dots title 'minimizers', 'heteroclinics.csv' using 3:4 with lines title 'heteroclinics'")
}

fn het_pair(cfg: &ExperimentConfig, m: &MetricModel, r: &mut Run) -> Result<(HeteroclinicProblem, minimizers::HeteroclinicResult, minimizers::HeteroclinicResult)> {
    let c = &cfg.heteroclinic;
    let (q0, q1, _) = r.timed("bounding minimizers", || structure::widest_gap(m, c.z, cfg.gap_scan.resolution, c.nodes_per_period))?;
    let p = HeteroclinicProblem::new(m, &q0, &q1, c.window, HetSign::Plus)?;
    let plus = r.timed("heteroclinic +", || heteroclinic(&p))?;
    let minus = r.timed("heteroclinic -", || heteroclinic(&p.with_sign(HetSign::Minus)))?;
    Ok((p, plus, minus))
}

fn cmd_heteroclinic(cfg: &ExperimentConfig, m: &MetricModel, r: &mut Run) -> Result<()> {
    let (p, plus, minus) = het_pair(cfg, m, r)?;
    write_paths(r, "bounding.csv", m, &[&p.q0, &p.q1])?;
    write_paths(r, "heteroclinics.csv", m, &[&plus.path, &minus.path])?;
    r.json("heteroclinic.json", &json!({ "plus": to_value(&strip_path(&plus)), "minus": to_value(&strip_path(&minus)) }))?;
    r.gnuplot("plot 'bounding.csv' using 3:4 with lines title 'bounding', 'heteroclinics.csv' using 3:4 with lines title 'heteroclinics'")?;
    for h in [&plus, &minus] {
        if !h.converged {
            return Err(Error::NoConvergence { iterations: h.window_trace.len(), residual: h.residual });
        }
    }
    Ok(())
}

fn strip_path(h: &minimizers::HeteroclinicResult) -> Value {
    let mut v = to_value(h);
    if let Value::Object(o) = &mut v {
        o.remove("path");
    }
    v
}

fn cmd_multibump(cfg: &ExperimentConfig, m: &MetricModel, r: &mut Run) -> Result<()> {
    let c = &cfg.multibump;
    let (p, plus, minus) = het_pair(cfg, m, r)?;
    let sw = Switches::new(&p, &plus, &minus)?;
    let (spec, res) = if c.windows.is_empty() {
        r.timed("parameter search", || search_parameters(&sw, &c.switch, c.max_nu))?
    } else {
        let mut spec = c.switch.clone();
        spec.kappa = Some(spec.kappa.unwrap_or_else(|| sw.derive_kappa(&spec)));
        let res = r.timed("multibump", || multibump(&sw, &c.windows, &spec))?;
        (spec, res)
    };
    write_paths(r, "multibump.csv", m, &[&res.path])?;
    // traversal length against window spacing
    let base = 2 * spec.kappa.unwrap_or(0) as i64 + spec.nu as i64;
    let mut fit_rows = Vec::new();
    for s in &c.spacings {
        let gap = base + s;
        let t = r.timed(&format!("spacing {gap}"), || multibump(&sw, &[0, gap], &spec))?;
        if let Some(len) = t.traversal {
            fit_rows.push((gap as f64, len, t.omega, t.clear));
        }
    }
    r.file("traversal.csv", |w| {
        writeln!(w, "spacing,traversal,omega,clear")?;
        for (g, t, o, cl) in &fit_rows {
            writeln!(w, "{g},{t:.15e},{o:.15e},{cl}")?;
        }
        Ok(())
    })?;
    let xs: Vec<f64> = fit_rows.iter().map(|f| f.0).collect();
    let ys: Vec<f64> = fit_rows.iter().map(|f| f.1).collect();
    let fit = (xs.len() >= 2).then(|| linear_fit(&xs, &ys));
    let mut summary = to_value(&res);
    if let Value::Object(o) = &mut summary {
        o.remove("path");
        o.remove("walls");
    }
    r.json(
        "multibump.json",
        &json!({
            "spec": to_value(&spec),
            "result": summary,
            "omega_plus": plus.omega,
            "omega_minus": minus.omega,
            "traversal_fit": fit.map(|(c0, c1, r2)| json!({ "c0": c0, "c1": c1, "r2": r2 })),
        }),
    )?;
    r.gnuplot("plot 'multibump.csv' using 3:4 with lines title 'multibump'\n# plot 'traversal.csv' using 1:2 with linespoints")?;
    if !res.converged {
        return Err(Error::NoConvergence { iterations: 0, residual: res.residual });
    }
    Ok(())
}

fn cmd_entropy(cfg: &ExperimentConfig, m: &MetricModel, r: &mut Run) -> Result<()> {
    let c = &cfg.entropy;
    let opt = EntropyOptions { dt: c.dt, rungs: c.rungs, bootstrap: c.bootstrap };
    let ests = r.timed("entropy", || entropy::entropy_ladder(m, &c.epsilons, c.t_max, c.samples, cfg.seed, &opt))?;
    r.file("entropy.csv", |w| entropy::write_csv(&ests, w))?;
    r.json("entropy.json", &json!({ "estimates": to_value(&ests) }))?;
    r.gnuplot("plot 'entropy.csv' using 2:3 with linespoints title 'log N(T, eps)'")
}

fn cmd_torus(cfg: &ExperimentConfig, m: &MetricModel, r: &mut Run) -> Result<()> {
    let c = &cfg.torus;
    let mut tori = Vec::new();
    for (i, h) in c.directions.iter().enumerate() {
        let t = r.timed(&format!("torus {i}"), || structure::assemble_torus_with(m, *h, c.q, c.grid, c.seeds, c.nodes_per_period))?;
        r.file(&format!("torus_{i}.csv"), |w| t.write_csv(w))?;
        tori.push(t);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pts: Vec<crate::V2> = (0..c.check_points).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
    let refs: Vec<&structure::TorusGraphSample> = tori.iter().collect();
    let violations = r.timed("cyclic order", || structure::cyclic_order_violations(m, &refs, &pts))?;
    r.json("torus.json", &json!({ "tori": to_value(&tori), "check_points": pts.len(), "violations": violations }))?;
    let plots: Vec<String> = (0..tori.len()).map(|i| format!("'torus_{i}.csv' using 1:2:($3/40):($4/40) with vectors")).collect();
    r.gnuplot(&format!("plot {}", plots.join(", ")))
}

fn cmd_katok(cfg: &ExperimentConfig, m: &MetricModel, r: &mut Run) -> Result<()> {
    let rep = r.timed("invariance and period", || katok::check_invariance_and_period(m, cfg.katok.samples, cfg.seed))?;
    let (psi_inner, psi_outer) = r.timed("psi plateaus", || katok::psi_plateaus(m, cfg.katok.plateau_samples, cfg.seed))?;
    r.file("returns.csv", |w| {
        writeln!(w, "sample,rotational,translation")?;
        for (i, (a, b)) in rep.return_rotational.iter().zip(&rep.return_translation).enumerate() {
            writeln!(w, "{i},{a:.6e},{b:.6e}")?;
        }
        Ok(())
    })?;
    r.json("katok.json", &json!({ "report": to_value(&rep), "passes": rep.passes(), "psi_minus_eta1_inner": psi_inner, "psi_outer": psi_outer }))?;
    r.gnuplot("set logscale y\nplot 'returns.csv' using 1:2 title 'rotational', '' using 1:3 title 'translation'")
}
