//! Explore-then-commit: refresh every page once per `m/R` until `tau`,
//! estimate change rates, then follow the freshness-optimal rates for the
//! estimates until `T`.

use serde::{Deserialize, Serialize};

use crate::allocation::{
    evaluate_objective, solve_freshness_allocation, suboptimality_bound, BoundContext,
    ObjectiveKind,
};
use crate::error::{Error, Result};
use crate::estimation::{
    mle_estimate_summary, moment_match_estimate_summary, EstimatorConfig, RateBounds, WindowSummary,
};
use crate::process_sim::{
    empirical_utility, expected_utility_interval_policy, expected_utility_rate_policy,
    simulate_crawl_with, ChangeProbe, Horizon, PageEnsemble, PoissonStream, RefreshSchedule,
    SimOptions,
};
use crate::rng::{stream_rng, trial_seed, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauChoice<T> {
    /// The minimizer of the worst-case bound, rounded up to a multiple of `m/R`.
    Auto,
    Explicit(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtcEstimator {
    MomentMatch,
    Mle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtcConfig<T> {
    pub request_rates: Vec<T>,
    pub bounds: RateBounds<T>,
    pub bandwidth: T,
    /// Total horizon `T`.
    pub horizon: T,
    pub delta: T,
    pub tau: TauChoice<T>,
    pub estimator: EtcEstimator,
    pub tolerance: T,
    /// Also measure both phases by simulation (slow; for validation).
    pub simulate_utilities: bool,
}

impl<T: Scalar> EtcConfig<T> {
    /// Config matching `ensemble`'s request rates and rate bounds.
    pub fn for_ensemble(
        ensemble: &PageEnsemble<T>,
        bandwidth: T,
        horizon: T,
        delta: T,
    ) -> Result<Self> {
        let config = Self {
            request_rates: ensemble.request_rates().to_vec(),
            bounds: RateBounds::new(ensemble.xi_min(), ensemble.xi_max())?,
            bandwidth,
            horizon,
            delta,
            tau: TauChoice::Auto,
            estimator: EtcEstimator::MomentMatch,
            tolerance: T::lit(crate::estimation::DEFAULT_TOLERANCE),
            simulate_utilities: false,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_tau(mut self, tau: TauChoice<T>) -> Self {
        self.tau = tau;
        self
    }

    pub fn pages(&self) -> usize {
        self.request_rates.len()
    }

    /// `m/R`, the exploration refresh interval.
    pub fn step(&self) -> T {
        T::from_count(self.pages()) / self.bandwidth
    }

    pub fn validate(&self) -> Result<()> {
        if self.request_rates.is_empty() {
            return Err(Error::invalid("no pages"));
        }
        if let Some(z) = self.request_rates.iter().find(|z| !(**z > T::zero())) {
            return Err(Error::invalid(format!("request rate {z} must be positive")));
        }
        RateBounds::new(self.bounds.xi_min, self.bounds.xi_max)?;
        if !(self.bandwidth > T::zero() && self.bandwidth.is_finite()) {
            return Err(Error::invalid(format!(
                "bandwidth {} must be positive",
                self.bandwidth
            )));
        }
        if !(self.horizon >= self.step() && self.horizon.is_finite()) {
            return Err(Error::invalid(format!(
                "horizon {} shorter than one exploration round m/R = {}",
                self.horizon,
                self.step()
            )));
        }
        if !(self.delta > T::zero() && self.delta < T::one()) {
            return Err(Error::invalid(format!(
                "delta {} must lie in (0, 1)",
                self.delta
            )));
        }
        if !(self.tolerance > T::zero()) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        Ok(())
    }

    /// Exploration length actually used: a positive multiple of `m/R`, at most `T`.
    pub fn resolve_tau(&self) -> Result<T> {
        self.validate()?;
        let step = self.step();
        let slack = T::lit(1e-9);
        let rounds_up = |t: T| (t / step - slack).ceil().max(T::one());
        let max_rounds = (self.horizon / step + slack).floor();
        let rounds = match self.tau {
            TauChoice::Auto => {
                let raw = regret_bound_etc(self)?.tau_star_raw;
                rounds_up(raw).min(max_rounds)
            }
            TauChoice::Explicit(tau) => {
                if !(tau > T::zero()) {
                    return Err(Error::invalid(format!(
                        "exploration horizon {tau} must be positive"
                    )));
                }
                let r = rounds_up(tau);
                if r > max_rounds {
                    return Err(Error::invalid(format!(
                        "exploration horizon {tau} (rounded to {}) exceeds the horizon {}",
                        r * step,
                        self.horizon
                    )));
                }
                r
            }
        };
        Ok(rounds * step)
    }
}

/// Worst-case regret bound `A tau + B T / tau - B` and its minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtcBound<T> {
    /// `sum(zeta) / m`.
    pub a: T,
    /// `sum(zeta) / (2 m^2 xi_min^2) * e^{2 xi_max m / R} * R ln(2m/delta)`.
    pub b: T,
    /// `sqrt(B T / A)` before rounding.
    pub tau_star_raw: T,
    /// `tau_star_raw` rounded up to a multiple of `m/R`.
    pub tau_star: T,
    /// `2 sqrt(A B T) - B`, the bound at `tau_star_raw`.
    pub envelope: T,
    /// `2 sqrt(A B T)`.
    pub envelope_loose: T,
    pub horizon: T,
}

impl<T: Scalar> EtcBound<T> {
    pub fn at(&self, tau: T) -> T {
        self.a * tau + self.b * self.horizon / tau - self.b
    }
}

pub fn regret_bound_etc<T: Scalar>(config: &EtcConfig<T>) -> Result<EtcBound<T>> {
    config.validate()?;
    let m = T::from_count(config.pages());
    let r = config.bandwidth;
    let total: T = config.request_rates.iter().copied().sum();
    let (lo, hi) = (config.bounds.xi_min, config.bounds.xi_max);
    let a = total / m;
    let b = total / (T::lit(2.0) * m * m * lo * lo)
        * (T::lit(2.0) * hi * m / r).exp()
        * r
        * (T::lit(2.0) * m / config.delta).ln();
    let t = config.horizon;
    let tau_star_raw = (b / a).sqrt() * t.sqrt();
    let step = config.step();
    let tau_star = (tau_star_raw / step - T::lit(1e-9)).ceil().max(T::one()) * step;
    let root = (a * b * t).sqrt();
    Ok(EtcBound {
        a,
        b,
        tau_star_raw,
        tau_star,
        envelope: T::lit(2.0) * root - b,
        envelope_loose: T::lit(2.0) * root,
        horizon: t,
    })
}

/// Utilities measured by simulating both phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatedUtilities<T> {
    pub exploration: T,
    pub commit: T,
}

/// Outcome of one explore-then-commit run. Utilities are per page
/// (divided by `m`), as is regret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRecord<T> {
    pub seed: u64,
    pub tau: T,
    pub horizon: T,
    pub xi_hat: Vec<T>,
    pub committed_rates: Vec<T>,
    /// Expected utility of the uniform-interval policy over `[0, tau]`.
    pub exploration_utility: T,
    /// Expected utility of the committed rates over `[tau, T]`.
    pub commit_utility: T,
    /// Expected utility of the optimal rates over `[0, T]`.
    pub optimal_utility: T,
    pub exploration_regret: T,
    pub commit_regret: T,
    pub regret: T,
    /// Worst-case bound evaluated at `tau`.
    pub theoretical_bound: T,
    /// `(T - tau)/m` times the sensitivity bound at the realized estimates.
    pub commit_regret_bound: T,
    pub simulated: Option<SimulatedUtilities<T>>,
}

/// Runs explore-then-commit on `ensemble`.
///
/// Exploration bits come from each page's seeded change stream, counted per
/// refresh window without materializing the refresh grid.
pub fn run_etc<T: Scalar>(
    config: &EtcConfig<T>,
    ensemble: &PageEnsemble<T>,
    seed: u64,
) -> Result<RegretRecord<T>> {
    check_match(config, ensemble)?;
    let tau = config.resolve_tau()?;
    let step = config.step();
    let rounds = (tau / step).round().to_f64_lossy() as u64;
    let est_config = EstimatorConfig {
        tolerance: config.tolerance,
        delta: config.delta,
    };
    let mut xi_hat = Vec::with_capacity(ensemble.len());
    for (i, &xi) in ensemble.change_rates().iter().enumerate() {
        let changes = PoissonStream::new(stream_rng(seed, i, Stream::Change), xi, T::zero(), tau)?;
        let changed = ChangeProbe::new(changes).changed_grid_windows(T::zero(), step, rounds);
        let mut summary = WindowSummary::new();
        summary.push(step, rounds, rounds - changed);
        let est = match config.estimator {
            EtcEstimator::MomentMatch => {
                moment_match_estimate_summary(&summary, config.bounds, &est_config)?
            }
            EtcEstimator::Mle => mle_estimate_summary(&summary, config.bounds, &est_config)?,
        };
        xi_hat.push(est.xi_hat);
    }
    etc_regret_from_estimates(config, ensemble, tau, xi_hat, seed)
}

/// Regret accounting of explore-then-commit for given estimates; `tau` must
/// already be a multiple of `m/R`.
pub fn etc_regret_from_estimates<T: Scalar>(
    config: &EtcConfig<T>,
    ensemble: &PageEnsemble<T>,
    tau: T,
    xi_hat: Vec<T>,
    seed: u64,
) -> Result<RegretRecord<T>> {
    check_match(config, ensemble)?;
    if xi_hat.len() != ensemble.len() {
        return Err(Error::invalid("one estimate per page required"));
    }
    let horizon = config.horizon;
    if !(tau > T::zero() && tau <= horizon * (T::one() + T::lit(1e-12))) {
        return Err(Error::invalid(format!(
            "exploration horizon {tau} outside (0, {horizon}]"
        )));
    }
    let m = T::from_count(ensemble.len());
    let zeta = ensemble.request_rates();
    let xi = ensemble.change_rates();
    let r = config.bandwidth;

    let optimal = solve_freshness_allocation(zeta, xi, r)?;
    let committed = solve_freshness_allocation(zeta, &xi_hat, r)?;
    let f_star = optimal.objective_value;
    let f_hat = evaluate_objective(ObjectiveKind::Freshness, &committed.rates, zeta, xi)?
        .expect_finite("freshness")?;

    let kappa = vec![config.step(); ensemble.len()];
    let exploration_utility = expected_utility_interval_policy(&kappa, ensemble, tau)?;
    let commit_len = (horizon - tau).max(T::zero());
    let commit_utility = if commit_len > T::zero() {
        expected_utility_rate_policy(&committed.rates, ensemble, commit_len)?
    } else {
        T::zero()
    };
    let optimal_utility = horizon / m * f_star;
    let exploration_regret = tau / m * f_star - exploration_utility;
    let commit_regret = commit_len / m * (f_star - f_hat);

    let bound = regret_bound_etc(config)?;
    let ctx = BoundContext::from_rates(r, config.bounds.xi_min, config.bounds.xi_max, zeta);
    let sensitivity = suboptimality_bound(ObjectiveKind::Freshness, &xi_hat, xi, zeta, &ctx)?;

    let simulated = if config.simulate_utilities {
        Some(simulate_phases(
            ensemble,
            config.step(),
            tau,
            horizon,
            &committed.rates,
            seed,
        )?)
    } else {
        None
    };

    Ok(RegretRecord {
        seed,
        tau,
        horizon,
        xi_hat,
        committed_rates: committed.rates,
        exploration_utility,
        commit_utility,
        optimal_utility,
        exploration_regret,
        commit_regret,
        regret: exploration_regret + commit_regret,
        theoretical_bound: bound.at(tau),
        commit_regret_bound: commit_len / m * sensitivity,
        simulated,
    })
}

fn simulate_phases<T: Scalar>(
    ensemble: &PageEnsemble<T>,
    step: T,
    tau: T,
    horizon: T,
    rates: &[T],
    seed: u64,
) -> Result<SimulatedUtilities<T>> {
    let m = ensemble.len();
    // a grid refresh at time 0 is the same as starting fresh
    let fresh = SimOptions {
        initial_fresh: Some(vec![true; m]),
        simulate_requests: true,
    };
    let explore = simulate_crawl_with(
        ensemble,
        &RefreshSchedule::Grid(vec![step; m]),
        Horizon::new(T::zero(), tau)?,
        seed,
        &fresh,
    )?;
    // the last exploration refresh lands on tau, so every page starts the commit phase fresh
    let commit = if horizon > tau {
        let trace = simulate_crawl_with(
            ensemble,
            &RefreshSchedule::Poisson(rates.to_vec()),
            Horizon::new(tau, horizon)?,
            trial_seed(seed, 1),
            &fresh,
        )?;
        empirical_utility(&trace)
    } else {
        T::zero()
    };
    Ok(SimulatedUtilities {
        exploration: empirical_utility(&explore),
        commit,
    })
}

fn check_match<T: Scalar>(config: &EtcConfig<T>, ensemble: &PageEnsemble<T>) -> Result<()> {
    config.validate()?;
    if config.request_rates.as_slice() != ensemble.request_rates() {
        return Err(Error::invalid(
            "config request rates differ from the ensemble's",
        ));
    }
    Ok(())
}
