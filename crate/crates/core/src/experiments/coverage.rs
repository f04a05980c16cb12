use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_std, median, quantile};
use crate::error::{Error, Result};
use crate::estimation::{
    confidence_width_partial, mle_estimate, moment_match_estimate, EstimatorConfig, EstimatorKind,
    ObservationLog, RateBounds, ScheduleFamily, Width,
};
use crate::policies::burn_in_duration;
use crate::process_sim::{
    empirical_utility_between, expected_utility_interval_policy, expected_utility_rate_policy,
    observe_windows, simulate_crawl_with, Horizon, PageEnsemble, RefreshSchedule, SimOptions,
};
use crate::rng::{stream_rng, trial_seed, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig<T> {
    pub estimator: EstimatorKind,
    pub schedule: ScheduleFamily<T>,
    /// Number of refreshes `N`.
    pub observations: usize,
    pub xi: T,
    pub bounds: RateBounds<T>,
    pub delta: T,
    pub trials: usize,
    pub root_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult<T> {
    pub trials: usize,
    pub misses: usize,
    pub miss_rate: T,
    pub width: Width<T>,
}

/// Fraction of trials whose estimate misses the true rate by more than the
/// confidence width. Estimators without a width never miss.
pub fn coverage_experiment<T: Scalar>(config: &CoverageConfig<T>) -> Result<CoverageResult<T>> {
    if config.trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let windows = config.schedule.prefix(config.observations);
    if windows.len() != config.observations || windows.is_empty() {
        return Err(Error::invalid(format!(
            "schedule provides {} of {} windows",
            windows.len(),
            config.observations
        )));
    }
    let est_config = EstimatorConfig {
        delta: config.delta,
        ..EstimatorConfig::default()
    };
    let width = match config.estimator {
        EstimatorKind::MomentMatch => Width::Finite(confidence_width_partial(
            &windows,
            config.bounds.xi_max,
            config.delta,
        )?),
        EstimatorKind::Mle => Width::Unbounded,
        other => {
            return Err(Error::invalid(format!(
                "coverage is not defined for {other:?} on bit logs"
            )))
        }
    };
    let misses = (0..config.trials as u64)
        .into_par_iter()
        .map(|k| {
            let bits = observe_windows(config.xi, &windows, trial_seed(config.root_seed, k))?;
            let log = ObservationLog::partial(windows.clone(), bits)?;
            let est = match config.estimator {
                EstimatorKind::Mle => mle_estimate(&log, config.bounds, &est_config)?,
                _ => moment_match_estimate(&log, config.bounds, &est_config)?,
            };
            Ok(!width.covers(est.xi_hat - config.xi))
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&m| m)
        .count();
    Ok(CoverageResult {
        trials: config.trials,
        misses,
        miss_rate: T::from_count(misses) / T::from_count(config.trials),
        width,
    })
}

/// Expected utility of uniform-interval versus uniform-rate refreshing over
/// `[0, tau]`, in closed form and, with `seeds > 0`, by simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UiUrComparison<T> {
    pub tau: T,
    pub closed_ui: T,
    pub closed_ur: T,
    pub simulated_ui: Option<T>,
    pub simulated_ui_se: Option<T>,
    pub simulated_ur: Option<T>,
    pub simulated_ur_se: Option<T>,
}

/// Simulations start stale well before time 0 (a whole number of refresh
/// intervals covering a burn-in) so that the uniform-interval grid refreshes
/// at 0 and the uniform-rate cache is stationary by then.
pub fn compare_ui_ur<T: Scalar>(
    ensemble: &PageEnsemble<T>,
    bandwidth: T,
    tau: T,
    seeds: usize,
    root_seed: u64,
) -> Result<UiUrComparison<T>> {
    let m = ensemble.len();
    let kappa = T::from_count(m) / bandwidth;
    if !(tau > T::zero()) {
        return Err(Error::invalid(format!("horizon {tau} must be positive")));
    }
    let tau = (tau / kappa - T::lit(1e-9)).ceil().max(T::one()) * kappa;
    let closed_ui = expected_utility_interval_policy(&vec![kappa; m], ensemble, tau)?;
    let closed_ur =
        expected_utility_rate_policy(&vec![bandwidth / T::from_count(m); m], ensemble, tau)?;
    let mut out = UiUrComparison {
        tau,
        closed_ui,
        closed_ur,
        simulated_ui: None,
        simulated_ui_se: None,
        simulated_ur: None,
        simulated_ur_se: None,
    };
    if seeds == 0 {
        return Ok(out);
    }
    let total = ensemble.total_request_rate();
    let burn = burn_in_duration(
        ensemble.xi_min(),
        ensemble.request_rates(),
        T::lit(1e-6) * total,
    )?;
    let warmup = (burn / kappa).ceil() * kappa;
    let horizon = Horizon::new(-warmup, tau)?;
    let opts = SimOptions::default();
    let ui = RefreshSchedule::Grid(vec![kappa; m]);
    let ur = RefreshSchedule::Poisson(vec![bandwidth / T::from_count(m); m]);
    let samples = (0..seeds as u64)
        .into_par_iter()
        .map(|k| {
            let s = trial_seed(root_seed, k);
            let a = simulate_crawl_with(ensemble, &ui, horizon, s, &opts)?;
            let b = simulate_crawl_with(ensemble, &ur, horizon, s, &opts)?;
            Ok((
                empirical_utility_between(&a, T::zero(), tau),
                empirical_utility_between(&b, T::zero(), tau),
            ))
        })
        .collect::<Result<Vec<(T, T)>>>()?;
    let (ui_vals, ur_vals): (Vec<T>, Vec<T>) = samples.into_iter().unzip();
    let root_n = T::from_count(seeds).sqrt();
    let (mu, su) = mean_std(&ui_vals);
    let (mr, sr) = mean_std(&ur_vals);
    out.simulated_ui = Some(mu);
    out.simulated_ui_se = Some(su / root_n);
    out.simulated_ur = Some(mr);
    out.simulated_ur_se = Some(sr / root_n);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// Refresh every `1/rho`.
    Fixed,
    /// Poisson refreshes at rate `rho`.
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorComparisonConfig<T> {
    pub xis: Vec<T>,
    pub rhos: Vec<T>,
    pub observations: Vec<usize>,
    pub windows: WindowKind,
    pub bounds: RateBounds<T>,
    pub delta: T,
    pub seeds: usize,
    pub root_seed: u64,
}

/// Error quantiles of both bit-log estimators at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorComparisonRow<T> {
    pub xi: T,
    pub rho: T,
    pub observations: usize,
    pub mm_q25: T,
    pub mm_q50: T,
    pub mm_q75: T,
    pub mle_q25: T,
    pub mle_q50: T,
    pub mle_q75: T,
    /// Median over seeds of `|mm - mle|`.
    pub median_gap: T,
    /// Median over seeds of the moment-matching confidence width.
    pub bound: T,
}

/// Absolute estimation errors of moment matching and maximum likelihood over
/// a grid of change rates, refresh rates and log lengths. Rows are sorted by
/// `(xi, rho, observations)`.
pub fn estimator_comparison<T: Scalar>(
    config: &EstimatorComparisonConfig<T>,
) -> Result<Vec<EstimatorComparisonRow<T>>> {
    if config.seeds == 0 {
        return Err(Error::invalid("need at least one seed"));
    }
    let mut grid = Vec::new();
    for &xi in &config.xis {
        for &rho in &config.rhos {
            for &n in &config.observations {
                if !(rho > T::zero()) || n == 0 {
                    return Err(Error::invalid(
                        "refresh rates and log lengths must be positive",
                    ));
                }
                grid.push((xi, rho, n));
            }
        }
    }
    grid.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite")
            .then(a.1.partial_cmp(&b.1).expect("finite"))
            .then(a.2.cmp(&b.2))
    });
    let est_config = EstimatorConfig {
        delta: config.delta,
        ..EstimatorConfig::default()
    };
    grid.into_iter()
        .map(|(xi, rho, n)| {
            let per_seed = (0..config.seeds as u64)
                .into_par_iter()
                .map(|k| {
                    let seed = trial_seed(config.root_seed, k);
                    let windows = match config.windows {
                        WindowKind::Fixed => vec![T::one() / rho; n],
                        WindowKind::Poisson => {
                            let mut rng = stream_rng(seed, 0, Stream::Refresh);
                            (0..n)
                                .map(|_| {
                                    T::lit(rng.sample::<f64, _>(Exp1).max(f64::MIN_POSITIVE)) / rho
                                })
                                .collect()
                        }
                    };
                    let bits = observe_windows(xi, &windows, seed)?;
                    let log = ObservationLog::partial(windows, bits)?;
                    let mm = moment_match_estimate(&log, config.bounds, &est_config)?;
                    let mle = mle_estimate(&log, config.bounds, &est_config)?;
                    Ok((mm.xi_hat, mle.xi_hat, mm.confidence_width.as_float()))
                })
                .collect::<Result<Vec<(T, T, T)>>>()?;
            let mm_err: Vec<T> = per_seed.iter().map(|p| (p.0 - xi).abs()).collect();
            let mle_err: Vec<T> = per_seed.iter().map(|p| (p.1 - xi).abs()).collect();
            let gaps: Vec<T> = per_seed.iter().map(|p| (p.0 - p.1).abs()).collect();
            let bounds: Vec<T> = per_seed.iter().map(|p| p.2).collect();
            Ok(EstimatorComparisonRow {
                xi,
                rho,
                observations: n,
                mm_q25: quantile(&mm_err, 0.25),
                mm_q50: median(&mm_err),
                mm_q75: quantile(&mm_err, 0.75),
                mle_q25: quantile(&mle_err, 0.25),
                mle_q50: median(&mle_err),
                mle_q75: quantile(&mle_err, 0.75),
                median_gap: median(&gaps),
                bound: median(&bounds),
            })
        })
        .collect()
}
