//! Versioned JSON run configuration.

use std::path::{Path, PathBuf};

use fdrlab_core::distributions::{AlternativeFamily, EffectSpec};
use fdrlab_core::pi0::{EtaRule, Pi0Estimator};
use fdrlab_core::pvalues::{LabelMode, MixtureModel, Sidedness};
use fdrlab_core::simulation::{self, Procedure};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Crit,
    Dist,
    Simulate,
    Pi0,
    FdpLaw,
    Ttest,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Crit => "crit",
            CommandKind::Dist => "dist",
            CommandKind::Simulate => "simulate",
            CommandKind::Pi0 => "pi0",
            CommandKind::FdpLaw => "fdp-law",
            CommandKind::Ttest => "ttest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    Gaussian { theta: f64 },
    Laplace { theta: f64 },
    Subbotin { theta: f64, gamma: f64 },
    Student { df: u32, theta: f64 },
    /// Student law with `θ` and `df` derived from an effect size and group sizes.
    StudentEffect { delta: f64, n_x: usize, n_y: usize },
}

impl FamilyConfig {
    pub fn build(&self) -> fdrlab_core::Result<AlternativeFamily> {
        match *self {
            FamilyConfig::Gaussian { theta } => AlternativeFamily::gaussian(theta),
            FamilyConfig::Laplace { theta } => AlternativeFamily::laplace(theta),
            FamilyConfig::Subbotin { theta, gamma } => AlternativeFamily::subbotin(theta, gamma),
            FamilyConfig::Student { df, theta } => AlternativeFamily::student(df, theta),
            FamilyConfig::StudentEffect { delta, n_x, n_y } => EffectSpec::new(delta, n_x, n_y)?.family(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Sided {
    One,
    Two,
}

impl From<Sided> for Sidedness {
    fn from(s: Sided) -> Self {
        match s {
            Sided::One => Sidedness::OneSided,
            Sided::Two => Sidedness::TwoSided,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: FamilyConfig,
    pub pi0: f64,
    pub sided: Sided,
}

impl ModelConfig {
    pub fn build(&self) -> Result<MixtureModel, AppError> {
        let f = self.family.build().map_err(|e| AppError::Config(format!("model.family: {e}")))?;
        MixtureModel::new(self.pi0, f, self.sided.into()).map_err(|e| AppError::Config(format!("model: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaConfig {
    PowerLog { exponent: f64 },
    Explicit { eta: f64 },
}

impl Default for EtaConfig {
    fn default() -> Self {
        EtaConfig::PowerLog { exponent: 1.0 / 3.0 }
    }
}

impl From<EtaConfig> for EtaRule {
    fn from(e: EtaConfig) -> Self {
        match e {
            EtaConfig::PowerLog { exponent } => EtaRule::PowerLog { exponent },
            EtaConfig::Explicit { eta } => EtaRule::Explicit(eta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorConfig {
    StoreyFixed {
        lambda: f64,
    },
    StoreyBandwidth {
        k: u32,
        #[serde(default)]
        eta: EtaConfig,
    },
    Kernel {
        k: u32,
        #[serde(default)]
        eta: EtaConfig,
    },
}

impl EstimatorConfig {
    pub fn build(&self) -> Result<Pi0Estimator, AppError> {
        let e = match *self {
            EstimatorConfig::StoreyFixed { lambda } => {
                if !(lambda > 0.0 && lambda < 1.0) {
                    return Err(AppError::Config(format!("estimator.lambda = {lambda}: must lie in (0, 1)")));
                }
                Pi0Estimator::StoreyFixed { lambda }
            }
            EstimatorConfig::StoreyBandwidth { k, eta } => Pi0Estimator::StoreyBandwidth { k, eta: eta.into() },
            EstimatorConfig::Kernel { k, eta } => Pi0Estimator::KernelOrderK { k, eta: eta.into() },
        };
        match e {
            Pi0Estimator::StoreyBandwidth { k: 0, .. } | Pi0Estimator::KernelOrderK { k: 0, .. } => {
                Err(AppError::Config("estimator.k must be >= 1".into()))
            }
            e => Ok(e),
        }
    }
}

/// Either an explicit list or `n` equally spaced levels up to `max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaGrid {
    List(Vec<f64>),
    Even { n: usize, max: f64 },
}

impl AlphaGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            AlphaGrid::List(v) => v.clone(),
            AlphaGrid::Even { n, max } => simulation::alpha_grid(*n, *max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LabelConfig {
    #[default]
    Deterministic,
    Bernoulli,
}

impl From<LabelConfig> for LabelMode {
    fn from(l: LabelConfig) -> Self {
        match l {
            LabelConfig::Deterministic => LabelMode::Deterministic,
            LabelConfig::Bernoulli => LabelMode::Bernoulli,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistConfig {
    /// Points on each grid.
    pub points: usize,
    /// Statistic grid spans `[-t_max, t_max]`.
    pub t_max: f64,
}

impl Default for DistConfig {
    fn default() -> Self {
        DistConfig { points: 101, t_max: 6.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub m: usize,
    pub replicates: usize,
    pub alpha_grid: AlphaGrid,
    /// `None` runs BH95; otherwise the plug-in procedure with this estimator.
    #[serde(default)]
    pub plug_in: Option<EstimatorConfig>,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default)]
    pub labels: LabelConfig,
}

fn default_quantiles() -> Vec<f64> {
    simulation::DEFAULT_QUANTILES.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pi0Config {
    pub estimators: Vec<EstimatorConfig>,
    /// File of p-values (one per line); when absent, `m` p-values are drawn from the model.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub labels: LabelConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdpLawJson {
    pub alpha: f64,
    pub estimator: EstimatorConfig,
    pub m_list: Vec<usize>,
    pub replicates: usize,
    #[serde(default)]
    pub labels: LabelConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub m: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TtestConfig {
    /// Effect size and null proportion of the asymptote model (and of synthetic data).
    pub delta: f64,
    pub pi0: f64,
    pub alpha_grid: AlphaGrid,
    pub rates: Vec<f64>,
    pub replicates: usize,
    /// Expression matrix CSV: feature id, then one column per sample.
    #[serde(default)]
    pub matrix: Option<PathBuf>,
    /// `sample_id,group` CSV with group X or Y, in matrix column order.
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub command: CommandKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<DistConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi0: Option<Pi0Config>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fdp_law: Option<FdpLawJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ttest: Option<TtestConfig>,
}

impl RunConfig {
    pub fn new(command: CommandKind) -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            command,
            seed: 0,
            model: None,
            dist: None,
            simulate: None,
            pi0: None,
            fdp_law: None,
            ttest: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, AppError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            AppError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            AppError::Config(msg) => AppError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn model(&self) -> Result<MixtureModel, AppError> {
        self.model
            .as_ref()
            .ok_or_else(|| AppError::Config(format!("{}: missing field `model`", self.command.name())))?
            .build()
    }

    /// Checks the schema version and that the block for `command` is present.
    pub fn validate(&self) -> Result<(), AppError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(AppError::Config(format!(
                "schema_version: expected {SCHEMA_VERSION}, found {}",
                self.schema_version
            )));
        }
        let missing = |field: &str| AppError::Config(format!("{}: missing field `{field}`", self.command.name()));
        match self.command {
            CommandKind::Crit | CommandKind::Dist | CommandKind::Simulate | CommandKind::FdpLaw => {
                self.model()?;
            }
            CommandKind::Pi0 => {
                let p = self.pi0.as_ref().ok_or_else(|| missing("pi0"))?;
                if p.input.is_none() {
                    self.model()?;
                    if p.m.is_none() {
                        return Err(missing("pi0.m"));
                    }
                }
                if p.estimators.is_empty() {
                    return Err(AppError::Config("pi0.estimators: empty".into()));
                }
                for e in &p.estimators {
                    e.build()?;
                }
            }
            CommandKind::Ttest => {
                let t = self.ttest.as_ref().ok_or_else(|| missing("ttest"))?;
                match (&t.matrix, &t.labels, &t.synthetic) {
                    (Some(_), Some(_), None) | (None, None, Some(_)) => {}
                    _ => {
                        return Err(AppError::Config(
                            "ttest: give either `matrix` and `labels`, or `synthetic`".into(),
                        ))
                    }
                }
            }
        }
        match self.command {
            CommandKind::Simulate => {
                let s = self.simulate.as_ref().ok_or_else(|| missing("simulate"))?;
                if let Some(e) = &s.plug_in {
                    e.build()?;
                }
                self.simulation_config()?
                    .validate()
                    .map_err(|e| AppError::Config(format!("simulate: {e}")))?;
            }
            CommandKind::FdpLaw => {
                let f = self.fdp_law.as_ref().ok_or_else(|| missing("fdp_law"))?;
                f.estimator.build()?;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn simulation_config(&self) -> Result<simulation::SimulationConfig, AppError> {
        let s = self
            .simulate
            .as_ref()
            .ok_or_else(|| AppError::Config("simulate: missing field `simulate`".into()))?;
        let mut cfg = simulation::SimulationConfig::new(self.model()?, s.m, s.replicates, s.alpha_grid.values());
        cfg.seed = self.seed;
        cfg.quantiles = s.quantiles.clone();
        cfg.label_mode = s.labels.into();
        cfg.procedure = match &s.plug_in {
            None => Procedure::Standard,
            Some(e) => Procedure::PlugIn(e.build()?),
        };
        Ok(cfg)
    }

    pub fn fdp_law_config(&self) -> Result<simulation::FdpLawConfig, AppError> {
        let f = self
            .fdp_law
            .as_ref()
            .ok_or_else(|| AppError::Config("fdp-law: missing field `fdp_law`".into()))?;
        Ok(simulation::FdpLawConfig {
            model: self.model()?,
            alpha: f.alpha,
            estimator: f.estimator.build()?,
            m_list: f.m_list.clone(),
            replicates: f.replicates,
            seed: self.seed,
            label_mode: f.labels.into(),
        })
    }
}
