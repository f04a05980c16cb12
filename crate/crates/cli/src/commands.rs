use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Config, EnsembleFile, EnsembleSpec};
use crate::error::{CliError, CliResult};
use crate::ingest::{ingest_crawl_log_path, DEFAULT_XI_MAX, DEFAULT_XI_MIN};
use freshcrawl::allocation::{solve_allocation, ObjectiveKind};
use freshcrawl::estimation::{
    full_obs_estimate, mle_estimate, moment_match_estimate, read_logs_csv, write_logs_csv,
    EstimatorConfig, EstimatorKind, RateBounds, ScheduleFamily, Width, XiTilde,
};
use freshcrawl::experiments::{
    coverage_experiment, estimator_comparison, median, scaling_experiment,
    sweep_exploration_horizon, write_csv_atomic, write_json_atomic, CoverageConfig,
    EstimatorComparisonConfig, ScalingConfig, SweepConfig, SyntheticEnsemble, TauSearch,
    WindowKind,
};
use freshcrawl::policies::{
    run_etc, run_phased_eps_greedy, uniform_interval_policy, uniform_rate_policy, EpsGreedyConfig,
    EtcConfig, EtcEstimator, TauChoice,
};
use freshcrawl::process_sim::{
    empirical_utility, expected_utility_interval_policy, expected_utility_rate_policy,
    simulate_crawl, Horizon, Policy, PolicyKind, RefreshSchedule,
};
use freshcrawl::rng::trial_seed;
use freshcrawl::PageEnsembleF64;

#[derive(Debug, Parser)]
#[command(
    name = "freshcrawl",
    version,
    about = "Crawl scheduling with unknown change rates"
)]
pub struct Cli {
    /// TOML file with defaults for the flags below.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed of all randomness.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for experiments.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a crawl under a baseline or optimal policy.
    Simulate(SimulateArgs),
    /// Estimate change rates from an observation CSV.
    Estimate(EstimateArgs),
    /// Solve a bandwidth allocation problem.
    Allocate(AllocateArgs),
    /// Run explore-then-commit once.
    Etc(EtcArgs),
    /// Mean ETC regret across exploration horizons.
    SweepTau(SweepArgs),
    /// Optimal exploration horizon and regret across horizons and bandwidths.
    Scaling(ScalingArgs),
    /// Confidence-width coverage of the moment-matching estimator.
    Coverage(CoverageArgs),
    /// Error quantiles of moment matching versus maximum likelihood.
    CompareEstimators(CompareArgs),
    /// Run phased epsilon-greedy.
    Phased(PhasedArgs),
    /// Fit a page ensemble to a crawl log.
    Ingest(IngestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EnsembleArgs {
    /// Ensemble JSON (as written by `ingest`).
    #[arg(long, conflicts_with = "synthetic")]
    pub ensemble: Option<PathBuf>,
    /// Built-in synthetic recipe.
    #[arg(long, value_enum)]
    pub synthetic: Option<Preset>,
    /// Page count of a synthetic ensemble.
    #[arg(long)]
    pub pages: Option<usize>,
    /// Seed for drawing a synthetic ensemble.
    #[arg(long)]
    pub ensemble_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Default,
    HeavyTailed,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Total refresh bandwidth R.
    #[arg(long, visible_alias = "R")]
    pub bandwidth: Option<f64>,
    /// Horizon T.
    #[arg(long, visible_alias = "T")]
    pub horizon: Option<f64>,
    /// Confidence level delta.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyChoice {
    UniformRate,
    UniformInterval,
    Optimal,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value = "optimal")]
    pub policy: PolicyChoice,
    /// Write the event trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    #[value(alias = "moment-match")]
    Mm,
    Mle,
    /// Count logs only.
    Full,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV with header page_id,y_time,bit (or count).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "mm")]
    pub method: Method,
    #[arg(long)]
    pub xi_min: f64,
    #[arg(long)]
    pub xi_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Write the estimates as JSON instead of printing them.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Objective {
    Freshness,
    Harmonic,
    Delay,
    IntervalFreshness,
}

impl From<Objective> for ObjectiveKind {
    fn from(o: Objective) -> Self {
        match o {
            Objective::Freshness => ObjectiveKind::Freshness,
            Objective::Harmonic => ObjectiveKind::Harmonic,
            Objective::Delay => ObjectiveKind::Delay,
            Objective::IntervalFreshness => ObjectiveKind::IntervalFreshness,
        }
    }
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    #[arg(long, value_enum, default_value = "freshness")]
    pub objective: Objective,
    /// Request rates, comma separated.
    #[arg(long, value_delimiter = ',', requires = "xi")]
    pub zeta: Option<Vec<f64>>,
    /// Change rates, comma separated.
    #[arg(long, value_delimiter = ',', requires = "zeta")]
    pub xi: Option<Vec<f64>>,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, visible_alias = "R")]
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorChoice {
    Mm,
    Mle,
}

impl From<EstimatorChoice> for EtcEstimator {
    fn from(e: EstimatorChoice) -> Self {
        match e {
            EstimatorChoice::Mm => EtcEstimator::MomentMatch,
            EstimatorChoice::Mle => EtcEstimator::Mle,
        }
    }
}

#[derive(Debug, Args)]
pub struct EtcArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Explicit exploration horizon.
    #[arg(long, conflicts_with = "auto_tau")]
    pub tau: Option<f64>,
    /// Use the bound-minimizing horizon (the default).
    #[arg(long)]
    pub auto_tau: bool,
    #[arg(long, value_enum, default_value = "mm")]
    pub estimator: EstimatorChoice,
    /// Also simulate both phases.
    #[arg(long)]
    pub simulate: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Explicit horizons to evaluate.
    #[arg(long, value_delimiter = ',', conflicts_with = "log_grid")]
    pub grid: Option<Vec<f64>>,
    /// Number of geometrically spaced horizons; ternary search when neither is given.
    #[arg(long)]
    pub log_grid: Option<usize>,
    #[arg(long, value_enum, default_value = "mm")]
    pub estimator: EstimatorChoice,
    /// CSV of per-horizon rows.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub bandwidths: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub horizons: Vec<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long, value_enum, default_value = "mm")]
    pub estimator: EstimatorChoice,
    /// CSV of per-(R, T) rows.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// JSON summary with fits and checks.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.15,0.5,0.95")]
    pub xis: Vec<f64>,
    /// Refresh rates; windows are `1/rho`.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.75")]
    pub rhos: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "100,400")]
    pub observations: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub xi_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub xi_max: f64,
    #[arg(long, value_enum, default_value = "mm")]
    pub estimator: EstimatorChoice,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowChoice {
    Fixed,
    Poisson,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.15,0.5,0.95")]
    pub xis: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.75")]
    pub rhos: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "100,400")]
    pub observations: Vec<usize>,
    #[arg(long, value_enum, default_value = "poisson")]
    pub windows: WindowChoice,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub xi_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub xi_max: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhasedArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long, default_value_t = 9)]
    pub phases: usize,
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Also run a ternary sweep and report ETC's median regret at its best horizon.
    #[arg(long)]
    pub compare_etc: bool,
    /// CSV of per-seed, per-phase rows.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// CSV with header page_id,crawl_time,changed,importance.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_XI_MIN)]
    pub xi_min: f64,
    #[arg(long, default_value_t = DEFAULT_XI_MAX)]
    pub xi_max: f64,
    /// Ensemble JSON; printed when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the surviving pages' observation logs as CSV.
    #[arg(long)]
    pub logs: Option<PathBuf>,
}

/// Settings shared by all subcommands after merging flags over the config.
pub struct Context {
    pub config: Config,
    pub seed: u64,
}

impl Context {
    pub fn from_cli(cli: &Cli) -> CliResult<Self> {
        let config = match &cli.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let seed = cli.seed.or(config.seed).unwrap_or(0);
        Ok(Self { config, seed })
    }

    pub fn jobs(&self, cli: &Cli) -> usize {
        cli.jobs.or(self.config.jobs).unwrap_or(1)
    }

    fn ensemble(&self, args: &EnsembleArgs) -> CliResult<(PageEnsembleF64, Vec<String>)> {
        let ensemble_seed = args
            .ensemble_seed
            .or(self.config.ensemble_seed)
            .unwrap_or(self.seed);
        let spec = match (&args.ensemble, args.synthetic) {
            (Some(path), _) => EnsembleSpec::File { path: path.clone() },
            (None, Some(Preset::Default)) => {
                EnsembleSpec::Synthetic(SyntheticEnsemble::desk_default())
            }
            (None, Some(Preset::HeavyTailed)) => {
                EnsembleSpec::Synthetic(SyntheticEnsemble::desk_heavy_tailed())
            }
            (None, None) => self
                .config
                .ensemble
                .clone()
                .unwrap_or(EnsembleSpec::Synthetic(SyntheticEnsemble::desk_default())),
        };
        match spec {
            EnsembleSpec::File { path } => {
                if args.pages.is_some() {
                    return Err(CliError::usage(
                        "--pages only applies to synthetic ensembles",
                    ));
                }
                let file = EnsembleFile::load(&path)?;
                let ids = file.page_ids.clone();
                Ok((file.into_ensemble()?, ids))
            }
            EnsembleSpec::Synthetic(mut recipe) => {
                if let Some(n) = args.pages {
                    match &mut recipe {
                        SyntheticEnsemble::Uniform { pages, .. }
                        | SyntheticEnsemble::LogNormal { pages, .. } => *pages = n,
                    }
                }
                Ok((recipe.sample(ensemble_seed)?, Vec::new()))
            }
        }
    }

    fn bandwidth(&self, flag: Option<f64>) -> CliResult<f64> {
        flag.or(self.config.bandwidth)
            .ok_or_else(|| CliError::usage("missing --bandwidth (or `bandwidth` in the config)"))
    }

    fn horizon(&self, flag: Option<f64>) -> CliResult<f64> {
        flag.or(self.config.horizon)
            .ok_or_else(|| CliError::usage("missing --horizon (or `horizon` in the config)"))
    }

    fn delta(&self, flag: Option<f64>) -> f64 {
        flag.or(self.config.delta).unwrap_or(0.1)
    }

    fn seeds(&self, flag: Option<usize>) -> usize {
        flag.or(self.config.seeds).unwrap_or(50)
    }
}

/// Runs one subcommand and returns what should be printed.
pub fn run(cli: &Cli, ctx: &Context) -> CliResult<Value> {
    match &cli.command {
        Command::Simulate(a) => simulate(ctx, a),
        Command::Estimate(a) => estimate(a),
        Command::Allocate(a) => allocate(ctx, a),
        Command::Etc(a) => etc(ctx, a),
        Command::SweepTau(a) => sweep(ctx, a),
        Command::Scaling(a) => scaling(ctx, a),
        Command::Coverage(a) => coverage(ctx, a),
        Command::CompareEstimators(a) => compare(ctx, a),
        Command::Phased(a) => phased(ctx, a),
        Command::Ingest(a) => ingest(a),
    }
}

fn to_value<S: Serialize>(v: &S) -> CliResult<Value> {
    Ok(serde_json::to_value(v).map_err(freshcrawl::Error::from)?)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failure never leaves a partial file behind.
fn write_atomic(
    path: &Path,
    fill: impl FnOnce(&mut BufWriter<&File>) -> freshcrawl::Result<()>,
) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(freshcrawl::Error::from)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush().map_err(freshcrawl::Error::from)?;
    }
    tmp.persist(path)
        .map_err(|e| freshcrawl::Error::from(e.error))?;
    Ok(())
}

fn simulate(ctx: &Context, a: &SimulateArgs) -> CliResult<Value> {
    let (ensemble, _) = ctx.ensemble(&a.ensemble)?;
    let bandwidth = ctx.bandwidth(a.run.bandwidth)?;
    let horizon = ctx.horizon(a.run.horizon)?;
    let m = ensemble.len();
    let policy = match a.policy {
        PolicyChoice::UniformRate => uniform_rate_policy(m, bandwidth)?,
        PolicyChoice::UniformInterval => uniform_interval_policy(m, bandwidth)?,
        PolicyChoice::Optimal => {
            let res = solve_allocation(
                ObjectiveKind::Freshness,
                ensemble.request_rates(),
                ensemble.change_rates(),
                bandwidth,
            )?;
            Policy::rates(res.rates, bandwidth)?
        }
    };
    let trace = simulate_crawl(
        &ensemble,
        &RefreshSchedule::from(&policy),
        Horizon::from_zero(horizon)?,
        ctx.seed,
    )?;
    let expected = match policy.kind() {
        PolicyKind::Rates => expected_utility_rate_policy(policy.values(), &ensemble, horizon)?,
        PolicyKind::Intervals => {
            expected_utility_interval_policy(policy.values(), &ensemble, horizon)?
        }
    };
    if let Some(path) = &a.trace {
        write_atomic(path, |w| trace.write_csv(w))?;
    }
    let count = |f: fn(&freshcrawl::process_sim::PageTrace<f64>) -> usize| {
        trace.pages.iter().map(f).sum::<usize>()
    };
    Ok(json!({
        "pages": m,
        "horizon": horizon,
        "seed": ctx.seed,
        "policy": policy.values(),
        "empirical_utility": empirical_utility(&trace),
        "expected_utility": expected,
        "changes": count(|p| p.changes.len()),
        "requests": count(|p| p.requests.len()),
        "refreshes": count(|p| p.refreshes.len()),
    }))
}

fn estimate(a: &EstimateArgs) -> CliResult<Value> {
    let bounds = RateBounds::new(a.xi_min, a.xi_max)?;
    let config = EstimatorConfig {
        delta: a.delta,
        ..EstimatorConfig::default()
    };
    let logs = read_logs_csv::<f64, _>(File::open(&a.input).map_err(freshcrawl::Error::from)?)?;
    let mut out = Vec::with_capacity(logs.len());
    for (id, log) in &logs {
        let est = match a.method {
            Method::Mm => moment_match_estimate(log, bounds, &config)?,
            Method::Mle => mle_estimate(log, bounds, &config)?,
            Method::Full => full_obs_estimate(log, bounds, &config)?,
        };
        let xi_tilde = match est.xi_tilde {
            XiTilde::Infinite => None,
            other => Some(other.as_float()),
        };
        let width = match est.confidence_width {
            Width::Finite(w) => Some(w),
            Width::Unbounded => None,
        };
        out.push(json!({
            "page_id": id,
            "xi_hat": est.xi_hat,
            "xi_tilde": xi_tilde,
            "confidence_width": width,
            "delta": est.delta,
            "method": est.method,
            "observations": log.len(),
        }));
    }
    let value = Value::Array(out);
    if let Some(path) = &a.output {
        write_json_atomic(path, &value)?;
    }
    Ok(value)
}

fn allocate(ctx: &Context, a: &AllocateArgs) -> CliResult<Value> {
    let (zeta, xi) = match (&a.zeta, &a.xi) {
        (Some(z), Some(x)) => (z.clone(), x.clone()),
        _ => {
            let (e, _) = ctx.ensemble(&a.ensemble)?;
            (e.request_rates().to_vec(), e.change_rates().to_vec())
        }
    };
    let bandwidth = ctx.bandwidth(a.bandwidth)?;
    let kind = ObjectiveKind::from(a.objective);
    let res = solve_allocation(kind, &zeta, &xi, bandwidth)?;
    Ok(json!({
        "objective": kind,
        "rates": res.rates,
        "objective_value": res.objective_value,
        "kkt_residual": res.kkt_residual,
        "multiplier": res.multiplier,
    }))
}

fn etc_config(
    ctx: &Context,
    ensemble: &PageEnsembleF64,
    run: &RunArgs,
) -> CliResult<EtcConfig<f64>> {
    Ok(EtcConfig::for_ensemble(
        ensemble,
        ctx.bandwidth(run.bandwidth)?,
        ctx.horizon(run.horizon)?,
        ctx.delta(run.delta),
    )?)
}

fn etc(ctx: &Context, a: &EtcArgs) -> CliResult<Value> {
    let (ensemble, _) = ctx.ensemble(&a.ensemble)?;
    let mut config = etc_config(ctx, &ensemble, &a.run)?;
    config.tau = match a.tau {
        Some(t) => TauChoice::Explicit(t),
        None => TauChoice::Auto,
    };
    config.estimator = a.estimator.into();
    config.simulate_utilities = a.simulate;
    to_value(&run_etc(&config, &ensemble, ctx.seed)?)
}

fn sweep(ctx: &Context, a: &SweepArgs) -> CliResult<Value> {
    let (ensemble, _) = ctx.ensemble(&a.ensemble)?;
    let search = match (&a.grid, a.log_grid) {
        (Some(g), _) => TauSearch::Grid(g.clone()),
        (None, Some(points)) => TauSearch::LogGrid { points },
        (None, None) => TauSearch::Ternary,
    };
    let res = sweep_exploration_horizon(
        &SweepConfig {
            bandwidth: ctx.bandwidth(a.run.bandwidth)?,
            horizon: ctx.horizon(a.run.horizon)?,
            delta: ctx.delta(a.run.delta),
            seeds: ctx.seeds(a.seeds),
            root_seed: ctx.seed,
            search,
            estimator: a.estimator.into(),
        },
        &ensemble,
    )?;
    if let Some(path) = &a.output {
        write_csv_atomic(path, &res.rows)?;
    }
    let best = res.best();
    Ok(json!({
        "tau_star": res.tau_star,
        "mean_regret": best.mean_regret,
        "std_regret": best.std_regret,
        "median_regret": median(&res.regrets_at_tau_star),
        "bound": res.bound,
        "rows": res.rows,
    }))
}

/// Slope windows the scaling summary checks against.
const TAU_SLOPE: (f64, f64) = (0.4, 0.6);
const REGRET_SLOPE: (f64, f64) = (-0.65, -0.35);

fn scaling(ctx: &Context, a: &ScalingArgs) -> CliResult<Value> {
    let (ensemble, _) = ctx.ensemble(&a.ensemble)?;
    let report = scaling_experiment(
        &ScalingConfig {
            bandwidths: a.bandwidths.clone(),
            horizons: a.horizons.clone(),
            delta: ctx.delta(a.delta),
            seeds: ctx.seeds(a.seeds),
            root_seed: ctx.seed,
            estimator: a.estimator.into(),
        },
        &ensemble,
    )?;
    if let Some(path) = &a.output {
        write_csv_atomic(path, &report.rows)?;
    }
    let within = |s: f64, (lo, hi): (f64, f64)| s >= lo && s <= hi;
    let fits: Vec<Value> = report
        .tau_fits
        .iter()
        .zip(&report.regret_fits)
        .map(|((r, tau_fit), (_, regret_fit))| {
            json!({
                "bandwidth": r,
                "tau_fit": tau_fit,
                "regret_fit": regret_fit,
                "tau_slope_ok": within(tau_fit.slope, TAU_SLOPE),
                "regret_slope_ok": regret_fit.as_ref().is_some_and(|f| within(f.slope, REGRET_SLOPE)),
            })
        })
        .collect();
    let summary = json!({
        "fits": fits,
        "tau_slope_window": TAU_SLOPE,
        "regret_slope_window": REGRET_SLOPE,
        "rows": report.rows,
    });
    if let Some(path) = &a.summary {
        write_json_atomic(path, &summary)?;
    }
    Ok(summary)
}

#[derive(Serialize)]
struct CoverageRow {
    xi: f64,
    rho: f64,
    observations: usize,
    trials: usize,
    misses: usize,
    miss_rate: f64,
    width: Option<f64>,
}

fn coverage(ctx: &Context, a: &CoverageArgs) -> CliResult<Value> {
    let bounds = RateBounds::new(a.xi_min, a.xi_max)?;
    let estimator = match a.estimator {
        EstimatorChoice::Mm => EstimatorKind::MomentMatch,
        EstimatorChoice::Mle => EstimatorKind::Mle,
    };
    let mut rows = Vec::new();
    for &xi in &a.xis {
        for &rho in &a.rhos {
            if !(rho > 0.0) {
                return Err(CliError::usage(format!(
                    "refresh rate {rho} must be positive"
                )));
            }
            for &n in &a.observations {
                let res = coverage_experiment(&CoverageConfig {
                    estimator,
                    schedule: ScheduleFamily::Constant(1.0 / rho),
                    observations: n,
                    xi,
                    bounds,
                    delta: a.delta,
                    trials: a.trials,
                    root_seed: ctx.seed,
                })?;
                rows.push(CoverageRow {
                    xi,
                    rho,
                    observations: n,
                    trials: res.trials,
                    misses: res.misses,
                    miss_rate: res.miss_rate,
                    width: match res.width {
                        Width::Finite(w) => Some(w),
                        Width::Unbounded => None,
                    },
                });
            }
        }
    }
    if let Some(path) = &a.output {
        write_csv_atomic(path, &rows)?;
    }
    let max_miss = rows.iter().map(|r| r.miss_rate).fold(0.0, f64::max);
    let slack = 3.0 * (a.delta * (1.0 - a.delta) / a.trials as f64).sqrt();
    Ok(json!({
        "max_miss_rate": max_miss,
        "allowed": a.delta + slack,
        "ok": max_miss <= a.delta + slack,
        "rows": rows,
    }))
}

fn compare(ctx: &Context, a: &CompareArgs) -> CliResult<Value> {
    let rows = estimator_comparison(&EstimatorComparisonConfig {
        xis: a.xis.clone(),
        rhos: a.rhos.clone(),
        observations: a.observations.clone(),
        windows: match a.windows {
            WindowChoice::Fixed => WindowKind::Fixed,
            WindowChoice::Poisson => WindowKind::Poisson,
        },
        bounds: RateBounds::new(a.xi_min, a.xi_max)?,
        delta: a.delta,
        seeds: ctx.seeds(a.seeds),
        root_seed: ctx.seed,
    })?;
    if let Some(path) = &a.output {
        write_csv_atomic(path, &rows)?;
    }
    to_value(&rows)
}

#[derive(Serialize)]
struct PhaseRow {
    seed: u64,
    phase: usize,
    start: f64,
    end: f64,
    utility: f64,
    regret: f64,
    cumulative_regret: f64,
}

fn phased(ctx: &Context, a: &PhasedArgs) -> CliResult<Value> {
    let (ensemble, _) = ctx.ensemble(&a.ensemble)?;
    let config = etc_config(ctx, &ensemble, &a.run)?;
    let eps = EpsGreedyConfig {
        eps: a.eps,
        phases: a.phases,
        burn_in_tolerance: None,
    };
    let seeds = ctx.seeds(a.seeds);
    let mut rows = Vec::new();
    let mut finals = Vec::with_capacity(seeds);
    for k in 0..seeds as u64 {
        let seed = trial_seed(ctx.seed, k);
        let records = run_phased_eps_greedy(&config, &ensemble, &eps, seed)?;
        finals.push(records.last().map_or(0.0, |r| r.cumulative_regret));
        rows.extend(records.into_iter().map(|r| PhaseRow {
            seed,
            phase: r.phase,
            start: r.start,
            end: r.end,
            utility: r.utility,
            regret: r.regret,
            cumulative_regret: r.cumulative_regret,
        }));
    }
    if let Some(path) = &a.output {
        write_csv_atomic(path, &rows)?;
    }
    let mut summary = json!({
        "phases": a.phases,
        "eps": a.eps,
        "seeds": seeds,
        "median_regret": median(&finals),
        "mean_regret": finals.iter().sum::<f64>() / seeds as f64,
    });
    if a.compare_etc {
        let res = sweep_exploration_horizon(
            &SweepConfig {
                bandwidth: config.bandwidth,
                horizon: config.horizon,
                delta: config.delta,
                seeds,
                root_seed: ctx.seed,
                search: TauSearch::Ternary,
                estimator: EtcEstimator::MomentMatch,
            },
            &ensemble,
        )?;
        let etc_median = median(&res.regrets_at_tau_star);
        summary["etc_tau_star"] = json!(res.tau_star);
        summary["etc_median_regret"] = json!(etc_median);
        summary["beats_etc"] = json!(median(&finals) <= etc_median);
    }
    Ok(summary)
}

fn ingest(a: &IngestArgs) -> CliResult<Value> {
    let report = ingest_crawl_log_path(&a.input, a.xi_min, a.xi_max)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let file = EnsembleFile::from_ensemble(&report.ensemble, report.page_ids.clone());
    if let Some(path) = &a.logs {
        let logs: Vec<_> = report
            .page_ids
            .iter()
            .cloned()
            .zip(report.logs.iter().cloned())
            .collect();
        write_atomic(path, |w| write_logs_csv(&logs, w))?;
    }
    match &a.output {
        Some(path) => {
            write_json_atomic(path, &file)?;
            let mut summary = to_value(&report.summary())?;
            summary["excluded_all_unchanged_ids"] = json!(report.excluded_all_unchanged);
            summary["excluded_all_changed_ids"] = json!(report.excluded_all_changed);
            summary["excluded_zero_importance_ids"] = json!(report.excluded_zero_importance);
            Ok(summary)
        }
        None => {
            eprintln!("ingest: {}", to_value(&report.summary())?);
            to_value(&file)
        }
    }
}
