//! Experiment configuration, read from TOML with unknown keys rejected.

use crate::error::{Error, Result};
use crate::metrics::{bump_modes, FourierMode, KzParams, MetricModel, Profile};
use crate::minimizers::SwitchSpec;
use crate::V2;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    // a struct variant, so unknown keys next to `kind = "flat"` are rejected
    Flat {},
    Randers {
        b: V2,
    },
    Conformal {
        modes: Vec<FourierMode>,
    },
    Bump {
        #[serde(default = "d_height")]
        height: f64,
        #[serde(default = "d_skew")]
        skew: f64,
    },
    Rotational {
        #[serde(default = "d_band")]
        band: f64,
    },
    KatokZiller {
        #[serde(default = "one")]
        alpha: f64,
        #[serde(default = "d_kz_beta")]
        beta: f64,
        #[serde(default = "d_a0")]
        a0: f64,
        #[serde(default = "d_a1")]
        a1: f64,
        #[serde(default = "d_b")]
        b: f64,
        #[serde(default = "d_band")]
        band: f64,
    },
}

fn d_height() -> f64 {
    1.5
}
fn d_skew() -> f64 {
    0.2
}
fn d_band() -> f64 {
    1.0
}
fn one() -> f64 {
    1.0
}
fn d_kz_beta() -> f64 {
    0.005
}
fn d_a0() -> f64 {
    0.3
}
fn d_a1() -> f64 {
    0.7
}
fn d_b() -> f64 {
    0.9
}

impl MetricSpec {
    pub fn build(&self) -> Result<MetricModel> {
        match self {
            MetricSpec::Flat {} => Ok(MetricModel::flat()),
            MetricSpec::Randers { b } => MetricModel::randers(*b),
            MetricSpec::Conformal { modes } => MetricModel::conformal(modes.clone()),
            MetricSpec::Bump { height, skew } => MetricModel::conformal(bump_modes(*height, *skew)),
            MetricSpec::Rotational { band } => {
                if !(*band > 0.0) {
                    return Err(Error::Invalid("band must be positive".into()));
                }
                Ok(MetricModel::rotational_sphere(*band))
            }
            MetricSpec::KatokZiller { alpha, beta, a0, a1, b, band } => crate::katok::kz_hamiltonian(Profile::Sphere, *alpha, *beta, *a0, *a1, *b, *band),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphCfg {
    /// Grid points per side.
    pub n: usize,
    /// Stencil radius.
    pub s: usize,
    /// Reuse built graphs from `<out>/cache`.
    pub cache: bool,
}

impl Default for GraphCfg {
    fn default() -> Self {
        Self { n: 32, s: 3, cache: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrateCfg {
    pub x: V2,
    pub v: V2,
    pub t: f64,
    pub dt: f64,
    /// Record every this many steps.
    pub every: usize,
}

impl Default for IntegrateCfg {
    fn default() -> Self {
        Self { x: [0.1, 0.2], v: [0.8, 0.6], t: 100.0, dt: 1e-3, every: 100 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeCfg {
    pub classes: Vec<[i64; 2]>,
    /// Nodes per period of the class.
    pub nodes_per_period: usize,
}

impl Default for MinimizeCfg {
    fn default() -> Self {
        Self { classes: vec![[1, 0], [1, 1], [2, 1]], nodes_per_period: 64 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatherCfg {
    /// Largest component of the classes in the beta table.
    pub q: usize,
    /// Directions sampled for the alpha level set.
    pub directions: usize,
    /// Classes tested for a corner of beta.
    pub corner_classes: Vec<[i64; 2]>,
    /// Farey order used for corner slopes.
    pub corner_q: usize,
}

impl Default for MatherCfg {
    fn default() -> Self {
        Self { q: 4, directions: 64, corner_classes: vec![[1, 0]], corner_q: 8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapCfg {
    pub z: [i64; 2],
    pub resolution: usize,
    pub nodes_per_period: usize,
    pub fan: usize,
    pub window: usize,
    pub fan_tol: f64,
}

impl Default for GapCfg {
    fn default() -> Self {
        Self { z: [1, 0], resolution: 128, nodes_per_period: 32, fan: 4, window: 8, fan_tol: 1e-4 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeteroclinicCfg {
    pub z: [i64; 2],
    pub nodes_per_period: usize,
    /// Starting window in periods on each side; doubled until stable.
    pub window: usize,
}

impl Default for HeteroclinicCfg {
    fn default() -> Self {
        Self { z: [1, 0], nodes_per_period: 64, window: 8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultibumpCfg {
    /// Window shifts `w_i`; when empty the search picks two at minimal
    /// spacing.
    pub windows: Vec<i64>,
    pub switch: SwitchSpec,
    /// Largest `nu` tried by the parameter search.
    pub max_nu: usize,
    /// Extra spacings (in periods) for the traversal fit.
    pub spacings: Vec<i64>,
}

impl Default for MultibumpCfg {
    fn default() -> Self {
        Self { windows: vec![], switch: SwitchSpec::default(), max_nu: 64, spacings: vec![0, 2, 4, 6, 8] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyCfg {
    pub epsilons: Vec<f64>,
    pub t_max: f64,
    pub samples: usize,
    pub dt: f64,
    pub rungs: usize,
    pub bootstrap: usize,
}

impl Default for EntropyCfg {
    fn default() -> Self {
        Self { epsilons: vec![0.2, 0.1, 0.05], t_max: 200.0, samples: 2000, dt: 1e-2, rungs: 12, bootstrap: 100 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TorusCfg {
    /// Directions, listed counterclockwise.
    pub directions: Vec<V2>,
    pub q: usize,
    pub grid: usize,
    pub seeds: usize,
    pub nodes_per_period: usize,
    /// Random base points for the cyclic-order check.
    pub check_points: usize,
}

impl Default for TorusCfg {
    fn default() -> Self {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        Self { directions: vec![[1.0, 0.4 * 0.5f64.sqrt()], [1.0, g], [1.0, std::f64::consts::PI - 2.0]], q: 8, grid: 32, seeds: 32, nodes_per_period: 16, check_points: 100 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KatokCfg {
    pub samples: usize,
    /// Covectors for the plateau identities of `psi`.
    pub plateau_samples: usize,
}

impl Default for KatokCfg {
    fn default() -> Self {
        Self { samples: 100, plateau_samples: 1000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub metric: MetricSpec,
    /// Worker threads; 0 keeps the pool default.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub graph: GraphCfg,
    #[serde(default)]
    pub integrate: IntegrateCfg,
    #[serde(default)]
    pub minimize: MinimizeCfg,
    #[serde(default)]
    pub mather: MatherCfg,
    #[serde(default)]
    pub gap_scan: GapCfg,
    #[serde(default)]
    pub heteroclinic: HeteroclinicCfg,
    #[serde(default)]
    pub multibump: MultibumpCfg,
    #[serde(default)]
    pub entropy: EntropyCfg,
    #[serde(default)]
    pub torus: TorusCfg,
    #[serde(default)]
    pub katok: KatokCfg,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Invalid(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::Invalid(s.to_string()));
        if self.graph.n < 4 || self.graph.s < 1 {
            return bad("graph.n must be >= 4 and graph.s >= 1");
        }
        if !(self.integrate.dt > 0.0 && self.integrate.t > 0.0) || self.integrate.every == 0 {
            return bad("integrate needs t > 0, dt > 0, every >= 1");
        }
        if self.minimize.nodes_per_period < 8 {
            return bad("minimize.nodes_per_period must be >= 8");
        }
        if self.mather.directions < 16 || self.mather.q < 1 || self.mather.corner_q < 2 {
            return bad("mather needs directions >= 16, q >= 1, corner_q >= 2");
        }
        if self.gap_scan.resolution < 128 || self.gap_scan.fan == 0 {
            return bad("gap_scan needs resolution >= 128 and fan >= 1");
        }
        if self.entropy.epsilons.iter().any(|e| !(1e-3..=0.5).contains(e)) || self.entropy.samples < 1000 {
            return bad("entropy needs epsilons in [1e-3, 0.5] and samples >= 1000");
        }
        if self.torus.grid < 4 || self.torus.q < 4 {
            return bad("torus needs grid >= 4 and q >= 4");
        }
        if self.katok.samples < 100 {
            return bad("katok.samples must be >= 100");
        }
        self.metric.build().map(|_| ())
    }
}

/// Parameters of a Katok-Ziller spec, for reuse in reports.
pub fn kz_params(spec: &MetricSpec) -> Option<KzParams> {
    match spec {
        MetricSpec::KatokZiller { alpha, beta, a0, a1, b, band } => Some(KzParams { alpha: *alpha, beta: *beta, a0: *a0, a1: *a1, b: *b, profile: Profile::Sphere, band: *band }),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let ok = "seed = 1\n[metric]\nkind = \"flat\"\n";
        assert!(ExperimentConfig::from_toml(ok).is_ok());
        let bad = "seed = 1\nsede = 2\n[metric]\nkind = \"flat\"\n";
        assert!(ExperimentConfig::from_toml(bad).is_err());
        let bad2 = "seed = 1\n[metric]\nkind = \"randers\"\nb = [0.5, 0.0]\nc = 1\n";
        assert!(ExperimentConfig::from_toml(bad2).is_err());
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(ExperimentConfig::from_toml("[metric]\nkind = \"flat\"\n").is_err());
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::from_toml("seed = 3\n[metric]\nkind = \"bump\"\n").unwrap();
        let d = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c.metric, d.metric);
        assert_eq!(d.gap_scan.resolution, 128);
    }
}
