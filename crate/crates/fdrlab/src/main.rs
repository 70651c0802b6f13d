use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fdrlab::config::{
    AlphaGrid, CommandKind, DistConfig, EstimatorConfig, EtaConfig, FamilyConfig, FdpLawJson, LabelConfig,
    ModelConfig, Pi0Config, Sided, SimulateConfig, SyntheticConfig, TtestConfig,
};
use fdrlab::{execute, AppError, RunConfig, Runner};

#[derive(Parser)]
#[command(name = "fdrlab", version, about = "Criticality, power and FDP experiments for BH95-type procedures")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Critical value, purity and pi0-bar of a model.
    Crit(CritArgs),
    /// Tabulate statistic and p-value laws on grids.
    Dist(DistArgs),
    /// Monte Carlo power / FDP / rejection-fraction curves.
    Simulate(SimulateArgs),
    /// Estimate the null proportion.
    Pi0(Pi0Args),
    /// FDP limit law of the plug-in procedure.
    FdpLaw(FdpLawArgs),
    /// Two-sample t-test rejection curves under column resampling.
    Ttest(TtestArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; inline experiment flags are then not allowed.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (affects wall time only).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Gaussian,
    Laplace,
    Subbotin,
    Student,
}

#[derive(Args, Clone, Default)]
struct ModelArgs {
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    df: Option<u32>,
    /// Effect size; with --nx/--ny derives the Student theta and df.
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    pi0: Option<f64>,
    #[arg(long, value_enum)]
    sided: Option<Sided>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    StoreyFixed,
    StoreyBandwidth,
    Kernel,
}

#[derive(Args, Clone, Default)]
struct EstimatorArgs {
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Kernel / bias order for bandwidth rules.
    #[arg(long)]
    k: Option<u32>,
    /// Explicit eta; default is (ln m)^(-1/3).
    #[arg(long)]
    eta: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct GridArgs {
    /// Explicit comma-separated levels.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long)]
    alpha_n: Option<usize>,
    #[arg(long)]
    alpha_max: Option<f64>,
}

#[derive(Args)]
struct CritArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct DistArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[command(flatten)]
    grid: GridArgs,
    /// Run the plug-in procedure with the given estimator.
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long, value_delimiter = ',')]
    quantiles: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    labels: Option<LabelConfig>,
}

#[derive(Args)]
struct Pi0Args {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// File with one p-value per line.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Args)]
struct FdpLawArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    #[arg(long)]
    replicates: Option<usize>,
}

#[derive(Args)]
struct TtestArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long)]
    pi0: Option<f64>,
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Number of synthetic features (when no matrix is given).
    #[arg(long)]
    synthetic_m: Option<usize>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long)]
    replicates: Option<usize>,
    #[command(flatten)]
    grid: GridArgs,
}

fn need<T>(x: Option<T>, flag: &str) -> Result<T, AppError> {
    x.ok_or_else(|| AppError::Config(format!("missing --{flag}")))
}

impl ModelArgs {
    fn any(&self) -> bool {
        self.family.is_some()
            || self.theta.is_some()
            || self.gamma.is_some()
            || self.df.is_some()
            || self.delta.is_some()
            || self.nx.is_some()
            || self.ny.is_some()
            || self.pi0.is_some()
            || self.sided.is_some()
    }

    fn build(&self) -> Result<ModelConfig, AppError> {
        let family = match need(self.family, "family")? {
            FamilyArg::Gaussian => FamilyConfig::Gaussian { theta: need(self.theta, "theta")? },
            FamilyArg::Laplace => FamilyConfig::Laplace { theta: need(self.theta, "theta")? },
            FamilyArg::Subbotin => FamilyConfig::Subbotin {
                theta: need(self.theta, "theta")?,
                gamma: need(self.gamma, "gamma")?,
            },
            FamilyArg::Student if self.delta.is_some() => FamilyConfig::StudentEffect {
                delta: need(self.delta, "delta")?,
                n_x: need(self.nx, "nx")?,
                n_y: need(self.ny, "ny")?,
            },
            FamilyArg::Student => FamilyConfig::Student {
                df: need(self.df, "df")?,
                theta: need(self.theta, "theta")?,
            },
        };
        Ok(ModelConfig {
            family,
            pi0: need(self.pi0, "pi0")?,
            sided: self.sided.unwrap_or(Sided::One),
        })
    }
}

impl EstimatorArgs {
    fn any(&self) -> bool {
        self.estimator.is_some() || self.lambda.is_some() || self.k.is_some() || self.eta.is_some()
    }

    fn build(&self) -> Result<EstimatorConfig, AppError> {
        let eta = self.eta.map(|eta| EtaConfig::Explicit { eta }).unwrap_or_default();
        Ok(match need(self.estimator, "estimator")? {
            EstimatorArg::StoreyFixed => EstimatorConfig::StoreyFixed {
                lambda: need(self.lambda, "lambda")?,
            },
            EstimatorArg::StoreyBandwidth => EstimatorConfig::StoreyBandwidth { k: need(self.k, "k")?, eta },
            EstimatorArg::Kernel => EstimatorConfig::Kernel { k: need(self.k, "k")?, eta },
        })
    }
}

impl GridArgs {
    fn any(&self) -> bool {
        self.alphas.is_some() || self.alpha_n.is_some() || self.alpha_max.is_some()
    }

    fn build(&self) -> Result<AlphaGrid, AppError> {
        match (&self.alphas, self.alpha_n, self.alpha_max) {
            (Some(v), None, None) => Ok(AlphaGrid::List(v.clone())),
            (None, Some(n), max) => Ok(AlphaGrid::Even { n, max: max.unwrap_or(0.5) }),
            _ => Err(AppError::Config("give either --alphas or --alpha-n [--alpha-max]".into())),
        }
    }
}

/// Loads `--config` (rejecting inline flags) or builds a config from inline flags.
fn resolve(
    kind: CommandKind,
    common: &Common,
    inline_given: bool,
    inline: impl FnOnce(&mut RunConfig) -> Result<(), AppError>,
) -> Result<RunConfig, AppError> {
    let mut cfg = match &common.config {
        Some(path) => {
            if inline_given {
                return Err(AppError::Config("inline experiment flags cannot be combined with --config".into()));
            }
            let cfg = RunConfig::load(path)?;
            if cfg.command != kind {
                return Err(AppError::Config(format!(
                    "{}: command is `{}` but `{}` was invoked",
                    path.display(),
                    cfg.command.name(),
                    kind.name()
                )));
            }
            cfg
        }
        None => {
            let mut cfg = RunConfig::new(kind);
            inline(&mut cfg)?;
            cfg
        }
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build(cmd: &Cmd) -> Result<(RunConfig, Common), AppError> {
    match cmd {
        Cmd::Crit(a) => {
            let cfg = resolve(CommandKind::Crit, &a.common, a.model.any(), |c| {
                c.model = Some(a.model.build()?);
                Ok(())
            })?;
            Ok((cfg, a.common.clone()))
        }
        Cmd::Dist(a) => {
            let given = a.model.any() || a.points.is_some() || a.t_max.is_some();
            let cfg = resolve(CommandKind::Dist, &a.common, given, |c| {
                c.model = Some(a.model.build()?);
                let d = DistConfig::default();
                c.dist = Some(DistConfig {
                    points: a.points.unwrap_or(d.points),
                    t_max: a.t_max.unwrap_or(d.t_max),
                });
                Ok(())
            })?;
            Ok((cfg, a.common.clone()))
        }
        Cmd::Simulate(a) => {
            let given = a.model.any()
                || a.m.is_some()
                || a.replicates.is_some()
                || a.grid.any()
                || a.estimator.any()
                || a.quantiles.is_some()
                || a.labels.is_some();
            let cfg = resolve(CommandKind::Simulate, &a.common, given, |c| {
                c.model = Some(a.model.build()?);
                c.simulate = Some(SimulateConfig {
                    m: need(a.m, "m")?,
                    replicates: need(a.replicates, "replicates")?,
                    alpha_grid: a.grid.build()?,
                    plug_in: if a.estimator.any() { Some(a.estimator.build()?) } else { None },
                    quantiles: a
                        .quantiles
                        .clone()
                        .unwrap_or_else(|| fdrlab_core::simulation::DEFAULT_QUANTILES.to_vec()),
                    labels: a.labels.unwrap_or_default(),
                });
                Ok(())
            })?;
            Ok((cfg, a.common.clone()))
        }
        Cmd::Pi0(a) => {
            let given = a.model.any() || a.estimator.any() || a.input.is_some() || a.m.is_some();
            let cfg = resolve(CommandKind::Pi0, &a.common, given, |c| {
                if a.model.any() {
                    c.model = Some(a.model.build()?);
                }
                c.pi0 = Some(Pi0Config {
                    estimators: vec![a.estimator.build()?],
                    input: a.input.clone(),
                    m: a.m,
                    labels: LabelConfig::default(),
                });
                Ok(())
            })?;
            Ok((cfg, a.common.clone()))
        }
        Cmd::FdpLaw(a) => {
            let given = a.model.any()
                || a.estimator.any()
                || a.alpha.is_some()
                || a.m_list.is_some()
                || a.replicates.is_some();
            let cfg = resolve(CommandKind::FdpLaw, &a.common, given, |c| {
                c.model = Some(a.model.build()?);
                c.fdp_law = Some(FdpLawJson {
                    alpha: need(a.alpha, "alpha")?,
                    estimator: a.estimator.build()?,
                    m_list: need(a.m_list.clone(), "m-list")?,
                    replicates: need(a.replicates, "replicates")?,
                    labels: LabelConfig::default(),
                });
                Ok(())
            })?;
            Ok((cfg, a.common.clone()))
        }
        Cmd::Ttest(a) => {
            let given = a.delta.is_some()
                || a.pi0.is_some()
                || a.matrix.is_some()
                || a.labels.is_some()
                || a.synthetic_m.is_some()
                || a.nx.is_some()
                || a.ny.is_some()
                || a.sigma.is_some()
                || a.rates.is_some()
                || a.replicates.is_some()
                || a.grid.any();
            let cfg = resolve(CommandKind::Ttest, &a.common, given, |c| {
                let synthetic = match a.synthetic_m {
                    Some(m) => Some(SyntheticConfig {
                        m,
                        n_x: need(a.nx, "nx")?,
                        n_y: need(a.ny, "ny")?,
                        sigma: a.sigma.unwrap_or(1.0),
                    }),
                    None => None,
                };
                c.ttest = Some(TtestConfig {
                    delta: need(a.delta, "delta")?,
                    pi0: need(a.pi0, "pi0")?,
                    alpha_grid: a.grid.build()?,
                    rates: need(a.rates.clone(), "rates")?,
                    replicates: need(a.replicates, "replicates")?,
                    matrix: a.matrix.clone(),
                    labels: a.labels.clone(),
                    synthetic,
                });
                Ok(())
            })?;
            Ok((cfg, a.common.clone()))
        }
    }
}

fn real_main() -> Result<(), AppError> {
    let cli = Cli::parse();
    let (cfg, common) = build(&cli.command)?;
    let runner = Runner::new(common.threads)?;
    let outputs = execute(&cfg, &runner)?;
    if cfg.command == CommandKind::Crit {
        if let Some(text) = outputs.get("crit.json") {
            print!("{}", String::from_utf8_lossy(text));
        }
    }
    let dir = match (&common.out, cfg.command) {
        (Some(d), _) => Some(d.clone()),
        (None, CommandKind::Crit) => None,
        (None, _) => Some(PathBuf::from(".")),
    };
    if let Some(dir) = dir {
        for p in outputs.write_to(&dir)? {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fdrlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
