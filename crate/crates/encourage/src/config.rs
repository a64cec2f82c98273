//! Experiment configuration, read from TOML (or JSON) and validated before
//! any computation starts.

use std::path::{Path, PathBuf};

use encourage_core::model::presets;
use encourage_core::policy::reference::GridOptions;
use encourage_core::policy::{Backend, ClassKind};
use encourage_core::propensity::{LocalPolyOptions, SeriesBasis, DEFAULT_TRIM_EPS};
use encourage_core::stats::quantile;
use encourage_core::welfare::{CostKind, MteChoice, DEFAULT_FOLDS, DEFAULT_G_MAX};
use encourage_core::{CostSpec, FeatureSpec, Manipulation, ManipulationPair, StructuralDgp};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub source: Source,
    #[serde(default)]
    pub propensity: PropensityConfig,
    #[serde(default = "default_mte")]
    pub mte: MteChoice,
    pub policy: PolicyConfig,
    pub pairs: Vec<PairConfig>,
    #[serde(default)]
    pub cost: Option<CostSpec>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub montecarlo: Option<MonteCarloConfig>,
}

fn default_seed() -> u64 {
    1
}

fn default_mte() -> MteChoice {
    MteChoice::PartiallyLinear { bandwidth: 0.1, extra: Vec::new() }
}

/// Where the data come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    /// A built-in simulation design by name.
    Preset { name: String, #[serde(default)] n: Option<usize> },
    /// A fully specified simulation design.
    Dgp { dgp: StructuralDgp, #[serde(default)] n: Option<usize> },
    /// A CSV file with header `y,d,x1..,z1..[,u]`.
    Data { path: PathBuf },
}

impl Source {
    /// The simulation design, if the data are synthetic.
    pub fn dgp(&self) -> Result<Option<StructuralDgp>> {
        match self {
            Source::Preset { name, .. } => preset(name).map(Some),
            Source::Dgp { dgp, .. } => Ok(Some(dgp.clone())),
            Source::Data { .. } => Ok(None),
        }
    }

    pub fn sample_size(&self) -> Option<usize> {
        match self {
            Source::Preset { n, .. } | Source::Dgp { n, .. } => *n,
            Source::Data { .. } => None,
        }
    }
}

pub fn preset(name: &str) -> Result<StructuralDgp> {
    match name {
        "canonical" => Ok(presets::canonical()),
        "canonical_dr" => Ok(presets::canonical_dr()),
        "logit_matched" => Ok(presets::logit_matched()),
        "binary_iv" => Ok(presets::binary_iv()),
        other => Err(Error::Config(format!(
            "unknown preset {other:?} (expected canonical, canonical_dr, logit_matched or binary_iv)"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PropensityConfig {
    Logit {
        features: FeatureSpec,
        #[serde(default = "default_trim")]
        trim_eps: f64,
    },
    LocalPoly {
        #[serde(default)]
        options: LocalPolyOptions,
        /// Leave-one-out bandwidth grid; overrides `options.bandwidth`.
        #[serde(default)]
        cv_grid: Option<Vec<f64>>,
    },
    Series {
        basis: SeriesBasis,
        #[serde(default = "default_trim")]
        trim_eps: f64,
    },
}

fn default_trim() -> f64 {
    DEFAULT_TRIM_EPS
}

impl Default for PropensityConfig {
    /// Logit on every `x` and `z` column, filled in against the data.
    fn default() -> Self {
        PropensityConfig::Logit { features: FeatureSpec::default(), trim_eps: DEFAULT_TRIM_EPS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    #[serde(default = "default_class")]
    pub class: ClassKind,
    /// Features `v` the eligibility rule reads, e.g. `["x2", "z2"]`.
    pub features: FeatureSpec,
    #[serde(default)]
    pub backend: Backend,
}

fn default_class() -> ClassKind {
    ClassKind::Les
}

/// A subsidy amount given as a number or as a statistic of the observed
/// first instrument: `"min"`, `"median"`, `"mean"`, `"max"` or `"q0.9"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amount {
    Value(f64),
    Stat(String),
}

impl Amount {
    pub fn resolve(&self, z1: &[f64]) -> Result<f64> {
        let stat = match self {
            Amount::Value(v) => return Ok(*v),
            Amount::Stat(s) => s.as_str(),
        };
        if z1.is_empty() {
            return Err(Error::Config(format!("cannot resolve {stat:?} without data")));
        }
        let v = match stat {
            "min" => z1.iter().copied().fold(f64::INFINITY, f64::min),
            "max" => z1.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            "mean" => z1.iter().sum::<f64>() / z1.len() as f64,
            "median" => quantile(z1, 0.5),
            s if s.starts_with('q') => {
                let q: f64 = s[1..].parse().map_err(|_| Error::Config(format!("bad quantile {s:?}")))?;
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::Config(format!("quantile {s:?} outside [0, 1]")));
                }
                quantile(z1, q)
            }
            s => return Err(Error::Config(format!("unknown amount {s:?}"))),
        };
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManipulationConfig {
    #[default]
    Identity,
    CapSubsidy { a: Amount },
    Shift { c: f64 },
    SetTo { v: Amount },
}

impl ManipulationConfig {
    pub fn resolve(&self, z1: &[f64]) -> Result<Manipulation> {
        Ok(match self {
            ManipulationConfig::Identity => Manipulation::Identity,
            ManipulationConfig::CapSubsidy { a } => Manipulation::CapSubsidy { a: a.resolve(z1)? },
            ManipulationConfig::Shift { c } => Manipulation::Shift { c: *c },
            ManipulationConfig::SetTo { v } => Manipulation::SetTo { v: v.resolve(z1)? },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub name: String,
    #[serde(default)]
    pub alpha0: ManipulationConfig,
    pub alpha1: ManipulationConfig,
}

impl PairConfig {
    /// Resolves data-dependent amounts against the observed `z1` column.
    pub fn resolve(&self, z1: &[f64]) -> Result<ManipulationPair> {
        Ok(ManipulationPair::new(self.alpha0.resolve(z1)?, self.alpha1.resolve(z1)?))
    }
}

/// Contour and MTE grid resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Points per instrument axis.
    pub points: usize,
    /// Axis ranges run between these sample quantiles.
    pub lower_quantile: f64,
    pub upper_quantile: f64,
    /// Points on the `u` axis of the MTE grid.
    pub u_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { points: 41, lower_quantile: 0.01, upper_quantile: 0.99, u_points: 101 }
    }
}

/// Oracle evaluation of learned rules when the data are synthetic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub draws: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { draws: 200_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    Fewm,
    Bewm,
    DrEwm,
}

impl Learner {
    pub fn name(&self) -> &'static str {
        match self {
            Learner::Fewm => "fewm",
            Learner::Bewm => "bewm",
            Learner::DrEwm => "dr_ewm",
        }
    }
}

/// Nuisances handed to the plug-in learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuisanceMode {
    /// True propensity and MTE of the simulation design.
    Oracle,
    /// Fitted with the configured propensity and MTE estimators.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityRatio {
    Oracle,
    KernelRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrConfig {
    pub folds: usize,
    pub g: DensityRatio,
    pub g_max: f64,
    pub g_bandwidth: Option<f64>,
}

impl Default for DrConfig {
    fn default() -> Self {
        DrConfig { folds: DEFAULT_FOLDS, g: DensityRatio::Oracle, g_max: DEFAULT_G_MAX, g_bandwidth: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub sizes: Vec<usize>,
    pub replications: usize,
    pub learners: Vec<Learner>,
    #[serde(default = "default_nuisances")]
    pub nuisances: NuisanceMode,
    /// Size of the evaluation sample on which true welfare, budget and the
    /// class-best reference rule are computed.
    #[serde(default = "default_eval_draws")]
    pub eval_draws: usize,
    #[serde(default)]
    pub reference: GridOptions,
    #[serde(default)]
    pub dr: DrConfig,
    /// Name of the pair to study; the first configured pair by default.
    #[serde(default)]
    pub pair: Option<String>,
    /// Budget overshoot counted as a violation.
    #[serde(default = "default_tol")]
    pub violation_tol: f64,
    /// Welfare shortfall counted as near-optimal.
    #[serde(default = "default_tol")]
    pub welfare_tol: f64,
}

fn default_nuisances() -> NuisanceMode {
    NuisanceMode::Oracle
}

fn default_eval_draws() -> usize {
    1_000_000
}

fn default_tol() -> f64 {
    0.01
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        // Relative data paths are taken relative to the config file.
        if let Source::Data { path: data } = &mut cfg.source {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that can be checked without data.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Some(dgp) = self.source.dgp()? {
            dgp.validate()?;
            self.policy.features.check_dims(dgp.dx(), dgp.dz())?;
        }
        if let Some(0) = self.source.sample_size() {
            return bad("sample size must be at least 1".into());
        }
        if self.pairs.is_empty() {
            return bad("at least one manipulation pair is required".into());
        }
        let mut names: Vec<&str> = self.pairs.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("manipulation pair names must be unique".into());
        }
        if self.pairs.iter().any(|p| p.name.is_empty() || !p.name.chars().all(safe_char)) {
            return bad("pair names may only contain letters, digits, '-', '_', '.' and '='".into());
        }
        if let Some(cost) = &self.cost {
            cost.validate()?;
            if matches!(cost.kind, CostKind::Table { .. }) {
                return bad("per-row cost tables are only available through the library".into());
            }
        }
        if self.grid.points < 2 || self.grid.u_points < 2 {
            return bad("grids need at least two points per axis".into());
        }
        if !(0.0..self.grid.upper_quantile).contains(&self.grid.lower_quantile) || self.grid.upper_quantile > 1.0 {
            return bad("grid quantiles must satisfy 0 ≤ lower < upper ≤ 1".into());
        }
        if self.evaluation.draws == 0 {
            return bad("evaluation needs at least one draw".into());
        }
        match &self.propensity {
            PropensityConfig::LocalPoly { cv_grid: Some(g), .. } if g.is_empty() || g.iter().any(|h| !(*h > 0.0)) => {
                return bad("cross-validation grid must be nonempty and positive".into());
            }
            PropensityConfig::Logit { trim_eps, .. } | PropensityConfig::Series { trim_eps, .. }
                if !(0.0..0.5).contains(trim_eps) =>
            {
                return bad("trim_eps must lie in [0, 0.5)".into());
            }
            _ => {}
        }
        if let Some(mc) = &self.montecarlo {
            if self.source.dgp()?.is_none() {
                return bad("Monte Carlo runs need a simulation design, not a data file".into());
            }
            if mc.sizes.is_empty() || mc.sizes.contains(&0) {
                return bad("Monte Carlo sample sizes must be positive".into());
            }
            if mc.replications == 0 || mc.learners.is_empty() || mc.eval_draws == 0 {
                return bad("Monte Carlo runs need replications, learners and evaluation draws".into());
            }
            if mc.learners.contains(&Learner::Bewm) && self.cost.is_none() {
                return bad("the bewm learner needs a [cost] section".into());
            }
            if let Some(name) = &mc.pair {
                if !self.pairs.iter().any(|p| &p.name == name) {
                    return bad(format!("Monte Carlo pair {name:?} is not configured"));
                }
            }
            if mc.dr.folds < 2 || !(mc.dr.g_max > 0.0) {
                return bad("doubly robust scores need at least two folds and g_max > 0".into());
            }
        }
        Ok(())
    }

    /// One-line JSON echo written into every output artifact.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("configs always serialize")
    }
}

fn safe_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '=')
}
