//! Experiment drivers: parallel replicate loops and output rendering.
//!
//! Replicates are computed on a rayon pool and collected in index order, so
//! the thread count changes wall time only.

use rayon::prelude::*;
use serde_json::{json, Value};

use fdrlab_core::asymptotics::AsymptoticPrediction;
use fdrlab_core::criticality::{critical_value_numeric, purity_report};
use fdrlab_core::distributions::Extended;
use fdrlab_core::pi0::{self, Pi0Estimate, Pi0Estimator};
use fdrlab_core::pvalues::MixtureModel;
use fdrlab_core::simulation::{
    fdp_law_replicate, fdp_law_row, replicate, summarize, FdpLawConfig, FdpLawRow, SimulationConfig,
    SimulationSummary,
};
use fdrlab_core::stats::{anderson_darling_normal, quantile_sorted};
use fdrlab_core::ttest::{
    assemble_curve, resample_rho, synthetic_dataset, AsymptoteSpec, RejectionCurve, ResamplingPlan, SyntheticSpec,
    TwoSampleDataset,
};

use crate::config::{CommandKind, RunConfig};
use crate::error::AppError;
use crate::io::{fmt_f64, fmt_opt, read_dataset, read_pvalues, Csv, Outputs};

pub struct Runner {
    pool: rayon::ThreadPool,
}

impl Runner {
    /// `None` uses rayon's default thread count.
    pub fn new(threads: Option<usize>) -> Result<Self, AppError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            b = b.num_threads(n.max(1));
        }
        Ok(Runner {
            pool: b.build().map_err(|e| AppError::Pool(e.to_string()))?,
        })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Maps `f` over `0..n` in parallel, keeping index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>, AppError>
    where
        T: Send,
        F: Fn(usize) -> fdrlab_core::Result<T> + Sync + Send,
    {
        self.pool
            .install(|| (0..n).into_par_iter().map(&f).collect::<fdrlab_core::Result<Vec<T>>>())
            .map_err(AppError::from)
    }
}

pub fn simulate(cfg: &SimulationConfig, runner: &Runner) -> Result<SimulationSummary, AppError> {
    cfg.validate()?;
    let reps = runner.map(cfg.replicates, |b| replicate(cfg, b))?;
    Ok(summarize(cfg, &reps)?)
}

pub fn fdp_law(cfg: &FdpLawConfig, runner: &Runner) -> Result<Vec<FdpLawRow>, AppError> {
    cfg.validate()?;
    (0..cfg.m_list.len())
        .map(|row| {
            let reps = runner.map(cfg.replicates, |b| fdp_law_replicate(cfg, row, b))?;
            Ok(fdp_law_row(cfg, row, &reps)?)
        })
        .collect()
}

pub fn rejection_curve(
    data: &TwoSampleDataset,
    alpha_grid: &[f64],
    plan: &ResamplingPlan,
    spec: AsymptoteSpec,
    runner: &Runner,
) -> Result<RejectionCurve, AppError> {
    plan.sizes(data.n_x(), data.n_y())?;
    let nr = plan.rates.len();
    let flat = runner.map(nr * plan.replicates, |i| {
        resample_rho(data, alpha_grid, plan, i / plan.replicates, i % plan.replicates)
    })?;
    let mut it = flat.into_iter();
    let rhos: Vec<Vec<Vec<f64>>> = (0..nr)
        .map(|_| it.by_ref().take(plan.replicates).collect())
        .collect();
    Ok(assemble_curve(data, alpha_grid, plan, spec, &rhos)?)
}

fn extended(x: Extended) -> Value {
    match x {
        Extended::Finite(v) => num(v),
        Extended::Infinite => json!("inf"),
    }
}

/// JSON number, or a string for non-finite values.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt_f64(x))
    }
}

fn opt(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json renders");
    s.push('\n');
    s
}

pub fn criticality_json(model: &MixtureModel) -> Value {
    let r = purity_report(model);
    json!({
        "alpha_star": num(r.alpha_star),
        "alpha_star_numeric": num(critical_value_numeric(model)),
        "alpha_star_intrinsic": num(r.alpha_star_intrinsic),
        "g1_at_0": extended(r.g1_at_0),
        "g1_at_1": num(r.g1_at_1),
        "pi0_bar": num(r.pi0_bar),
        "is_critical": r.is_critical,
        "is_pure": r.is_pure,
    })
}

fn prediction_json(p: &AsymptoticPrediction) -> Value {
    json!({
        "alpha": num(p.alpha),
        "pi0_ref": num(p.pi0_ref),
        "t_star": num(p.t_star),
        "rho_inf": num(p.rho_inf),
        "pi_inf": num(p.pi_inf),
        "fdp_limit": opt(p.fdp_limit),
        "fdp_scaled_variance": opt(p.fdp_scaled_variance),
        "bandwidth": p.bandwidth.map(|b| json!({
            "m": b.m, "h": num(b.h), "h_lnln_m": num(b.metric), "warning": b.warning,
        })),
    })
}

pub fn estimate_json(e: &Pi0Estimate) -> Value {
    let mut v = json!({
        "kind": e.estimator.kind(),
        "value_raw": num(e.value_raw),
        "value_clamped": num(e.value),
        "bandwidth": num(e.bandwidth),
        "asymptotic_se": num(e.asymptotic_se),
    });
    match e.estimator {
        Pi0Estimator::StoreyFixed { lambda } => v["lambda"] = num(lambda),
        Pi0Estimator::StoreyBandwidth { k, .. } | Pi0Estimator::KernelOrderK { k, .. } => v["k"] = json!(k),
    }
    v
}

/// Column label for a quantile level: `q05`, `q50`, `q2.5`.
pub fn quantile_label(q: f64) -> String {
    let pct = q * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("q{:02}", pct.round() as u32)
    } else {
        format!("q{pct}")
    }
}

/// Name, quantile cells, mean, asymptotic value.
type MetricRow<'a> = (&'a str, Vec<String>, Option<f64>, Option<f64>);

pub fn summary_csv(s: &SimulationSummary) -> String {
    let qs: Vec<String> = s.config.quantiles.iter().map(|&q| quantile_label(q)).collect();
    let mut header = vec!["alpha", "metric"];
    header.extend(qs.iter().map(String::as_str));
    header.extend(["mean", "asymptotic"]);
    let mut csv = Csv::new(&header);
    let blank = vec![String::new(); qs.len()];
    for r in &s.records {
        let a = &r.asymptotic;
        let metrics: [MetricRow; 3] = [
            (
                "power",
                r.power_quantiles
                    .as_ref()
                    .map(|q| q.iter().map(|&x| fmt_f64(x)).collect())
                    .unwrap_or_else(|| blank.clone()),
                r.mean_power,
                Some(a.pi_inf),
            ),
            ("fdp", r.fdp_quantiles.iter().map(|&x| fmt_f64(x)).collect(), Some(r.mean_fdp), a.fdp_limit),
            ("rho", r.rho_quantiles.iter().map(|&x| fmt_f64(x)).collect(), Some(r.mean_rho), Some(a.rho_inf)),
        ];
        for (name, q, mean, asym) in metrics {
            let mut row = vec![fmt_f64(r.alpha), name.to_string()];
            row.extend(q);
            row.push(fmt_opt(mean));
            row.push(fmt_opt(asym));
            csv.row(&row);
        }
    }
    csv.finish()
}

pub fn summary_json(cfg: &RunConfig, s: &SimulationSummary) -> Value {
    json!({
        "config": cfg,
        "seed_rule": s.seed_rule,
        "quantile_rule": s.quantile_rule,
        "criticality": criticality_json(&s.config.model),
        "records": s.records.iter().map(|r| json!({
            "alpha": num(r.alpha),
            "mean_fdp": num(r.mean_fdp),
            "fdp_se": num(r.fdp_se),
            "mean_power": opt(r.mean_power),
            "mean_rho": num(r.mean_rho),
            "asymptotic": prediction_json(&r.asymptotic),
        })).collect::<Vec<_>>(),
    })
}

fn fdp_law_outputs(cfg: &RunConfig, rows: &[FdpLawRow], out: &mut Outputs) {
    let mut csv = Csv::new(&[
        "m",
        "bandwidth",
        "mean_fdp",
        "var_fdp",
        "mc_se",
        "mean_pi0_hat",
        "empirical_scaled_variance",
        "predicted_limit",
        "predicted_scaled_variance",
        "fixed_lambda_scaled_variance",
        "h_lnln_m",
        "bandwidth_warning",
        "ad_a2_star",
        "ad_p_value",
    ]);
    let mut z = Csv::new(&["m", "replicate", "z"]);
    let mut meta = Vec::new();
    for r in rows {
        let ad = anderson_darling_normal(&r.standardized);
        csv.row(&[
            r.m.to_string(),
            fmt_f64(r.bandwidth),
            fmt_f64(r.mean_fdp),
            fmt_f64(r.var_fdp),
            fmt_f64(r.mc_se),
            fmt_f64(r.mean_pi0_hat),
            fmt_f64(r.empirical_scaled_variance),
            fmt_opt(r.predicted_limit),
            fmt_opt(r.predicted_scaled_variance),
            fmt_opt(r.fixed_lambda_scaled_variance),
            fmt_f64(r.bandwidth_check.metric),
            r.bandwidth_check.warning.to_string(),
            fmt_f64(ad.a2_star),
            fmt_f64(ad.p_value),
        ]);
        for (b, v) in r.standardized.iter().enumerate() {
            z.row(&[r.m.to_string(), b.to_string(), fmt_f64(*v)]);
        }
        meta.push(json!({
            "m": r.m,
            "bandwidth": num(r.bandwidth),
            "bandwidth_warning": r.bandwidth_check.warning,
            "anderson_darling": {"a2": num(ad.a2), "a2_star": num(ad.a2_star), "p_value": num(ad.p_value)},
        }));
    }
    out.add("fdp_law.csv", csv.finish());
    out.add("fdp_law_standardized.csv", z.finish());
    out.add(
        "fdp_law.json",
        pretty(&json!({"config": cfg, "seed_rule": fdrlab_core::rng::SEED_RULE, "rows": meta})),
    );
}

fn curve_outputs(cfg: &RunConfig, curve: &RejectionCurve, grid: &[f64], out: &mut Outputs) {
    let mut csv = Csv::new(&["rate", "replicate", "alpha", "rho"]);
    for r in &curve.rows {
        csv.row(&[fmt_f64(r.rate), r.replicate.to_string(), fmt_f64(r.alpha), fmt_f64(r.rho)]);
    }
    let mut asym = Csv::new(&["rate", "alpha", "rho_inf"]);
    for a in &curve.asymptote {
        asym.row(&[fmt_f64(a.rate), fmt_f64(a.alpha), fmt_f64(a.rho_inf)]);
    }
    let mut rates: Vec<Value> = Vec::new();
    for a in curve.asymptote.iter().filter(|a| a.alpha == grid[0]) {
        let medians: Vec<Value> = grid
            .iter()
            .map(|&alpha| {
                let mut v: Vec<f64> = curve
                    .rows
                    .iter()
                    .filter(|r| r.rate == a.rate && r.alpha == alpha)
                    .map(|r| r.rho)
                    .collect();
                v.sort_by(f64::total_cmp);
                num(quantile_sorted(&v, 0.5))
            })
            .collect();
        rates.push(json!({
            "rate": num(a.rate), "n_x": a.n_x, "n_y": a.n_y, "df": a.df, "theta": num(a.theta),
            "median_rho": medians,
        }));
    }
    out.add("rejection.csv", csv.finish());
    out.add("asymptote.csv", asym.finish());
    out.add(
        "ttest.json",
        pretty(&json!({
            "config": cfg,
            "seed_rule": fdrlab_core::rng::SEED_RULE,
            "alpha_grid": grid.iter().map(|&a| num(a)).collect::<Vec<_>>(),
            "rates": rates,
        })),
    );
}

fn dist_outputs(cfg: &RunConfig, model: &MixtureModel, out: &mut Outputs) {
    let d = cfg.dist.clone().unwrap_or_default();
    let n = d.points.max(2);
    let f = model.family();
    let mut stat = Csv::new(&["t", "f0_pdf", "f1_pdf", "f0_cdf", "f1_cdf", "likelihood_ratio"]);
    for i in 0..n {
        let t = -d.t_max + 2.0 * d.t_max * i as f64 / (n - 1) as f64;
        stat.row(&[
            fmt_f64(t),
            fmt_f64(f.f0_pdf(t)),
            fmt_f64(f.f1_pdf(t)),
            fmt_f64(f.f0_cdf(t)),
            fmt_f64(f.f1_cdf(t)),
            fmt_f64(f.likelihood_ratio(t)),
        ]);
    }
    let mut pv = Csv::new(&["u", "g1_cdf", "g1_pdf", "g_cdf", "g_pdf"]);
    for i in 0..n {
        let u = i as f64 / (n - 1) as f64;
        pv.row(&[
            fmt_f64(u),
            fmt_f64(model.g1_cdf(u)),
            fmt_f64(model.g1_pdf(u)),
            fmt_f64(model.mixture_cdf(u)),
            fmt_f64(model.mixture_pdf(u)),
        ]);
    }
    out.add("dist_statistic.csv", stat.finish());
    out.add("dist_pvalue.csv", pv.finish());
}

/// Runs a validated configuration and renders all of its outputs in memory.
pub fn execute(cfg: &RunConfig, runner: &Runner) -> Result<Outputs, AppError> {
    cfg.validate()?;
    let mut out = Outputs::default();
    out.add("config.json", cfg.to_json());
    match cfg.command {
        CommandKind::Crit => {
            let model = cfg.model()?;
            let mut v = criticality_json(&model);
            v["model"] = json!(cfg.model);
            out.add("crit.json", pretty(&v));
        }
        CommandKind::Dist => dist_outputs(cfg, &cfg.model()?, &mut out),
        CommandKind::Simulate => {
            let s = simulate(&cfg.simulation_config()?, runner)?;
            out.add("summary.csv", summary_csv(&s));
            out.add("summary.json", pretty(&summary_json(cfg, &s)));
        }
        CommandKind::Pi0 => {
            let p = cfg.pi0.as_ref().expect("validated");
            let pvalues = match (&p.input, p.m) {
                (Some(path), _) => read_pvalues(path)?,
                (None, Some(m)) => cfg.model()?.sample_pvalues(m, cfg.seed, p.labels.into())?.pvalues,
                (None, None) => unreachable!("validated"),
            };
            let model = cfg.model.as_ref().map(|m| m.build()).transpose()?;
            // Order of the first non-vanishing derivative of g1 at 1; the bias is O(h^order).
            let detected = model.as_ref().map(|m| pi0::leading_bias_order(m, pi0::MAX_DETECTED_ORDER));
            let estimates = p
                .estimators
                .iter()
                .map(|e| {
                    let est = e.build()?.estimate(&pvalues)?;
                    let mut j = estimate_json(&est);
                    j["bias_order_used"] = json!(match est.estimator {
                        Pi0Estimator::StoreyFixed { .. } => 1,
                        Pi0Estimator::StoreyBandwidth { k, .. } | Pi0Estimator::KernelOrderK { k, .. } => k,
                    });
                    if let (Some(m), Some(Ok(Some(l)))) = (&model, &detected) {
                        if est.estimator.kind() != "kernel" && est.bandwidth < 1.0 {
                            j["predicted_bias"] = num(pi0::predicted_bias(m, *l, est.bandwidth)?);
                        }
                    }
                    Ok(j)
                })
                .collect::<Result<Vec<_>, AppError>>()?;
            let mut v = json!({"m": pvalues.len(), "estimates": estimates});
            if let Some(m) = &model {
                v["pi0_bar"] = num(fdrlab_core::criticality::pi0_bar(m));
                v["detected_bias_order"] = match detected.expect("model given") {
                    Ok(Some(l)) => json!(l),
                    Ok(None) => json!(format!("none up to {}", pi0::MAX_DETECTED_ORDER)),
                    Err(fdrlab_core::Error::NonDifferentiable { .. }) => json!("non_differentiable"),
                    Err(e) => return Err(e.into()),
                };
            }
            out.add("pi0.json", pretty(&v));
        }
        CommandKind::FdpLaw => {
            let rows = fdp_law(&cfg.fdp_law_config()?, runner)?;
            fdp_law_outputs(cfg, &rows, &mut out);
        }
        CommandKind::Ttest => {
            let t = cfg.ttest.as_ref().expect("validated");
            let data = match (&t.matrix, &t.labels, &t.synthetic) {
                (Some(m), Some(l), _) => read_dataset(m, l)?,
                (_, _, Some(s)) => synthetic_dataset(SyntheticSpec {
                    m: s.m,
                    n_x: s.n_x,
                    n_y: s.n_y,
                    pi0: t.pi0,
                    delta: t.delta,
                    sigma: s.sigma,
                    seed: cfg.seed,
                })?,
                _ => unreachable!("validated"),
            };
            let plan = ResamplingPlan {
                rates: t.rates.clone(),
                replicates: t.replicates,
                seed: cfg.seed,
            };
            let grid = t.alpha_grid.values();
            let spec = AsymptoteSpec { delta: t.delta, pi0: t.pi0 };
            let curve = rejection_curve(&data, &grid, &plan, spec, runner)?;
            curve_outputs(cfg, &curve, &grid, &mut out);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(quantile_label(0.05), "q05");
        assert_eq!(quantile_label(0.5), "q50");
        assert_eq!(quantile_label(0.95), "q95");
        assert_eq!(quantile_label(0.025), "q2.5");
    }

    #[test]
    fn crit_json_reports_infinity() {
        let cfg = RunConfig::from_json(
            r#"{"schema_version": 1, "command": "crit",
                "model": {"family": {"kind": "gaussian", "theta": 3}, "pi0": 0.5, "sided": "one"}}"#,
        )
        .unwrap();
        let out = execute(&cfg, &Runner::new(Some(1)).unwrap()).unwrap();
        let v: Value = serde_json::from_slice(out.get("crit.json").unwrap()).unwrap();
        assert_eq!(v["g1_at_0"], "inf");
        assert_eq!(v["alpha_star"], 0.0);
        assert_eq!(v["is_critical"], false);
    }

    #[test]
    fn parallel_matches_sequential() {
        let cfg = RunConfig::from_json(
            r#"{"schema_version": 1, "command": "simulate", "seed": 4,
                "model": {"family": {"kind": "laplace", "theta": 2}, "pi0": 0.75, "sided": "one"},
                "simulate": {"m": 200, "replicates": 16, "alpha_grid": {"n": 5, "max": 0.5}}}"#,
        )
        .unwrap();
        let sc = cfg.simulation_config().unwrap();
        let seq = fdrlab_core::simulation::run(&sc).unwrap();
        let par = simulate(&sc, &Runner::new(Some(3)).unwrap()).unwrap();
        assert_eq!(seq, par);
    }
}
