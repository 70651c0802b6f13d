//! Monte Carlo replicates of BH95 and plug-in procedures.
//!
//! Each replicate draws its p-values once and scans the whole `α` grid, so
//! per-replicate power curves are monotone. Replicate `b` uses substream
//! `stream_key(0, b)`; the FDP-law experiment uses `stream_key(row, b)`.
//! Drivers may evaluate replicates in any order and then call the
//! aggregation functions with results in replicate order.

use alloc::vec::Vec;
use libm::sqrt;

use crate::asymptotics::{
    fixed_lambda_fdp_variance, storey_variance, AsymptoticPrediction, BandwidthCheck, CrossingTable,
};
use crate::criticality::{critical_value_closed_form, pi0_bar};
use crate::pi0::Pi0Estimator;
use crate::procedures::{account, PlugInMode, SortedPValues};
use crate::pvalues::{LabelMode, MixtureModel};
use crate::rng::{stream_key, substream};
use crate::stats::{mean, quantile_sorted, variance};
use crate::{Error, Result};

pub const DEFAULT_QUANTILES: [f64; 3] = [0.05, 0.5, 0.95];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Procedure {
    Standard,
    PlugIn(Pi0Estimator),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub model: MixtureModel,
    pub m: usize,
    pub replicates: usize,
    pub alpha_grid: Vec<f64>,
    pub procedure: Procedure,
    pub seed: u64,
    pub quantiles: Vec<f64>,
    pub label_mode: LabelMode,
}

fn strictly_increasing_in_unit(name: &'static str, xs: &[f64], allow_one: bool) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidData {
            reason: alloc::format!("{name} is empty"),
        });
    }
    for (i, &x) in xs.iter().enumerate() {
        if !(x > 0.0 && (x < 1.0 || allow_one && x == 1.0)) {
            return Err(Error::InvalidParameter {
                name,
                value: x,
                reason: "entries out of range",
            });
        }
        if i > 0 && xs[i - 1] >= x {
            return Err(Error::InvalidParameter {
                name,
                value: x,
                reason: "must be strictly increasing",
            });
        }
    }
    Ok(())
}

impl SimulationConfig {
    pub fn new(model: MixtureModel, m: usize, replicates: usize, alpha_grid: Vec<f64>) -> Self {
        SimulationConfig {
            model,
            m,
            replicates,
            alpha_grid,
            procedure: Procedure::Standard,
            seed: 0,
            quantiles: DEFAULT_QUANTILES.to_vec(),
            label_mode: LabelMode::Deterministic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::EmptyInput);
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter {
                name: "replicates",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        strictly_increasing_in_unit("alpha_grid", &self.alpha_grid, true)?;
        strictly_increasing_in_unit("quantiles", &self.quantiles, false)
    }
}

/// `n` equally spaced levels `α_i = i·hi/n`, `i = 1..=n`.
pub fn alpha_grid(n: usize, hi: f64) -> Vec<f64> {
    (1..=n).map(|i| hi * i as f64 / n as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub fdp: Vec<f64>,
    /// `None` when the replicate has no alternatives.
    pub power: Vec<Option<f64>>,
    pub rho: Vec<f64>,
    pub pi0_hat: Option<f64>,
}

/// Runs replicate `b` of `cfg` over the whole `α` grid.
pub fn replicate(cfg: &SimulationConfig, b: usize) -> Result<ReplicateResult> {
    let mut rng = substream(cfg.seed, stream_key(0, b as u32));
    let data = cfg.model.sample_pvalues_with(cfg.m, cfg.label_mode, &mut rng);
    let sorted = SortedPValues::new(&data.pvalues)?;
    let pi0_hat = match cfg.procedure {
        Procedure::Standard => None,
        Procedure::PlugIn(est) => Some(est.estimate(&data.pvalues)?.value),
    };
    let n = cfg.alpha_grid.len();
    let mut out = ReplicateResult {
        fdp: Vec::with_capacity(n),
        power: Vec::with_capacity(n),
        rho: Vec::with_capacity(n),
        pi0_hat,
    };
    for &alpha in &cfg.alpha_grid {
        let o = match pi0_hat {
            None => sorted.bh95(alpha)?,
            Some(p) => sorted.plug_in(alpha, p, PlugInMode::Clamp)?,
        };
        let o = account(&o, &data.labels)?;
        out.fdp.push(o.fdp.unwrap_or(0.0));
        out.power.push(o.power);
        out.rho.push(o.rho);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaRecord {
    pub alpha: f64,
    pub power_quantiles: Option<Vec<f64>>,
    pub fdp_quantiles: Vec<f64>,
    pub rho_quantiles: Vec<f64>,
    pub mean_fdp: f64,
    /// Monte Carlo standard error of `mean_fdp`.
    pub fdp_se: f64,
    pub mean_power: Option<f64>,
    pub mean_rho: f64,
    pub asymptotic: AsymptoticPrediction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub config: SimulationConfig,
    pub seed_rule: &'static str,
    pub quantile_rule: &'static str,
    pub records: Vec<AlphaRecord>,
}

pub const QUANTILE_RULE: &str = "type 7: linear interpolation between order statistics";

fn sorted_quantiles(mut xs: Vec<f64>, qs: &[f64]) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    qs.iter().map(|&q| quantile_sorted(&xs, q)).collect()
}

fn mc_se(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    sqrt(variance(xs) / xs.len() as f64)
}

/// Asymptotic prediction for one level under the configured procedure.
pub fn asymptotic_for(table: &CrossingTable<'_>, procedure: Procedure, m: usize, alpha: f64) -> Result<AsymptoticPrediction> {
    match procedure {
        Procedure::Standard => table.predict(alpha),
        Procedure::PlugIn(est) => {
            let check = Some(BandwidthCheck::new(m, est.bandwidth(m)));
            match table.predict_plug_in(alpha, check, storey_variance) {
                Err(Error::CriticalRegime { .. }) => {
                    let model = table.model();
                    let bar = pi0_bar(model);
                    // The plug-in rule can cross even here when π0-bar = 1 and α = 1.
                    let t = table.t_star(alpha, bar)?;
                    Ok(AsymptoticPrediction {
                        alpha,
                        pi0_ref: bar,
                        t_star: t,
                        rho_inf: model.mixture_cdf(t),
                        pi_inf: if model.pi0() < 1.0 { model.g1_cdf(t) } else { 0.0 },
                        fdp_limit: None,
                        fdp_scaled_variance: None,
                        bandwidth: check,
                    })
                }
                other => other,
            }
        }
    }
}

/// Aggregates replicate results (in replicate order) into per-`α` records.
pub fn summarize(cfg: &SimulationConfig, reps: &[ReplicateResult]) -> Result<SimulationSummary> {
    cfg.validate()?;
    if reps.len() != cfg.replicates {
        return Err(Error::LengthMismatch {
            expected: cfg.replicates,
            found: reps.len(),
        });
    }
    let table = CrossingTable::new(&cfg.model);
    let mut records = Vec::with_capacity(cfg.alpha_grid.len());
    for (j, &alpha) in cfg.alpha_grid.iter().enumerate() {
        let fdp: Vec<f64> = reps.iter().map(|r| r.fdp[j]).collect();
        let rho: Vec<f64> = reps.iter().map(|r| r.rho[j]).collect();
        let power: Vec<f64> = reps.iter().filter_map(|r| r.power[j]).collect();
        let (power_quantiles, mean_power) = if power.is_empty() {
            (None, None)
        } else {
            (Some(sorted_quantiles(power.clone(), &cfg.quantiles)), Some(mean(&power)))
        };
        records.push(AlphaRecord {
            alpha,
            power_quantiles,
            mean_fdp: mean(&fdp),
            fdp_se: mc_se(&fdp),
            mean_power,
            mean_rho: mean(&rho),
            fdp_quantiles: sorted_quantiles(fdp, &cfg.quantiles),
            rho_quantiles: sorted_quantiles(rho, &cfg.quantiles),
            asymptotic: asymptotic_for(&table, cfg.procedure, cfg.m, alpha)?,
        });
    }
    Ok(SimulationSummary {
        config: cfg.clone(),
        seed_rule: crate::rng::SEED_RULE,
        quantile_rule: QUANTILE_RULE,
        records,
    })
}

/// Sequential driver.
pub fn run(cfg: &SimulationConfig) -> Result<SimulationSummary> {
    cfg.validate()?;
    let reps = (0..cfg.replicates)
        .map(|b| replicate(cfg, b))
        .collect::<Result<Vec<_>>>()?;
    summarize(cfg, &reps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdpLawConfig {
    pub model: MixtureModel,
    pub alpha: f64,
    pub estimator: Pi0Estimator,
    pub m_list: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub label_mode: LabelMode,
}

impl FdpLawConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_list.is_empty() || self.m_list.contains(&0) {
            return Err(Error::EmptyInput);
        }
        if self.replicates < 2 {
            return Err(Error::InvalidParameter {
                name: "replicates",
                value: self.replicates as f64,
                reason: "variance needs at least 2 replicates",
            });
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: self.alpha,
                reason: "must lie in (0, 1]",
            });
        }
        if self.model.pi0() < 1.0 {
            let bar = pi0_bar(&self.model);
            let bound = bar * critical_value_closed_form(&self.model);
            if self.alpha <= bound {
                return Err(Error::CriticalRegime {
                    alpha: self.alpha,
                    bound,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdpLawRow {
    pub m: usize,
    pub bandwidth: f64,
    pub mean_fdp: f64,
    pub var_fdp: f64,
    pub mc_se: f64,
    /// `√(m·h)`-scaled sample variance.
    pub empirical_scaled_variance: f64,
    pub mean_pi0_hat: f64,
    /// Predictions are skipped when `π0 = 1`.
    pub predicted_limit: Option<f64>,
    pub predicted_scaled_variance: Option<f64>,
    /// Exact fixed-`λ` limit of the same scaled variance (Storey fixed only).
    pub fixed_lambda_scaled_variance: Option<f64>,
    pub bandwidth_check: BandwidthCheck,
    /// `√(m·h)·(FDP_b - mean)` in replicate order.
    pub standardized: Vec<f64>,
}

/// FDP of replicate `b` in row `row` of the FDP-law experiment, with its `π0` estimate.
pub fn fdp_law_replicate(cfg: &FdpLawConfig, row: usize, b: usize) -> Result<(f64, f64)> {
    let m = cfg.m_list[row];
    let mut rng = substream(cfg.seed, stream_key(row as u32, b as u32));
    let data = cfg.model.sample_pvalues_with(m, cfg.label_mode, &mut rng);
    let est = cfg.estimator.estimate(&data.pvalues)?;
    let o = SortedPValues::new(&data.pvalues)?.plug_in(cfg.alpha, est.value, PlugInMode::Clamp)?;
    let o = account(&o, &data.labels)?;
    Ok((o.fdp.unwrap_or(0.0), est.value))
}

/// Builds one table row from replicate results in replicate order.
pub fn fdp_law_row(cfg: &FdpLawConfig, row: usize, reps: &[(f64, f64)]) -> Result<FdpLawRow> {
    let m = cfg.m_list[row];
    let h = cfg.estimator.bandwidth(m);
    let fdp: Vec<f64> = reps.iter().map(|r| r.0).collect();
    let pi0s: Vec<f64> = reps.iter().map(|r| r.1).collect();
    let mu = mean(&fdp);
    let var = variance(&fdp);
    let scale = sqrt(m as f64 * h);
    let (predicted_limit, predicted_scaled_variance, fixed_lambda_scaled_variance) = if cfg.model.pi0() < 1.0 {
        let table = CrossingTable::new(&cfg.model);
        let p = table.predict_plug_in(cfg.alpha, None, storey_variance)?;
        let fixed = match cfg.estimator {
            Pi0Estimator::StoreyFixed { lambda } => {
                Some(fixed_lambda_fdp_variance(&cfg.model, cfg.alpha, lambda, cfg.label_mode)? * h)
            }
            _ => None,
        };
        (p.fdp_limit, p.fdp_scaled_variance, fixed)
    } else {
        (None, None, None)
    };
    Ok(FdpLawRow {
        m,
        bandwidth: h,
        mean_fdp: mu,
        var_fdp: var,
        mc_se: mc_se(&fdp),
        empirical_scaled_variance: var * scale * scale,
        mean_pi0_hat: mean(&pi0s),
        predicted_limit,
        predicted_scaled_variance,
        fixed_lambda_scaled_variance,
        bandwidth_check: BandwidthCheck::new(m, h),
        standardized: fdp.iter().map(|f| scale * (f - mu)).collect(),
    })
}

/// Sequential driver for the FDP limit-law experiment.
pub fn fdp_law_experiment(cfg: &FdpLawConfig) -> Result<Vec<FdpLawRow>> {
    cfg.validate()?;
    (0..cfg.m_list.len())
        .map(|row| {
            let reps = (0..cfg.replicates)
                .map(|b| fdp_law_replicate(cfg, row, b))
                .collect::<Result<Vec<_>>>()?;
            fdp_law_row(cfg, row, &reps)
        })
        .collect()
}
