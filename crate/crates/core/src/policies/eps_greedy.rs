//! Phased epsilon-greedy: re-estimate after every phase and mix the
//! estimated optimum with uniform rates.

use serde::{Deserialize, Serialize};

use super::etc::{EtcConfig, EtcEstimator};
use crate::allocation::{evaluate_objective, solve_freshness_allocation, ObjectiveKind};
use crate::error::{Error, Result};
use crate::estimation::{
    mle_estimate_summary, moment_match_estimate_summary, EstimatorConfig, WindowSummary,
};
use crate::process_sim::{ChangeProbe, PageEnsemble, PoissonStream};
use crate::rng::{stream_rng, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsGreedyConfig<T> {
    /// Weight of the uniform-rate policy in every phase after the first.
    pub eps: T,
    pub phases: usize,
    /// Tolerance of the burn-in that sets the phase length; `0.01 sum(zeta)`
    /// when absent.
    pub burn_in_tolerance: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord<T> {
    /// 1-based.
    pub phase: usize,
    pub start: T,
    pub end: T,
    /// Estimates the phase's rates were built from; empty for phase 1.
    pub xi_hat: Vec<T>,
    pub rates: Vec<T>,
    /// Expected per-page utility over the phase.
    pub utility: T,
    pub regret: T,
    pub cumulative_regret: T,
    pub seed: u64,
}

/// Runs `phases` phases over `[0, T]`. All but the last phase last one
/// burn-in period; the last runs to `T`. Phase 1 refreshes uniformly; later
/// phases use `(1 - eps) rho_hat + eps R/m`, with `rho_hat` optimal for the
/// rates estimated from every window observed so far. Pages never observed
/// are assumed to change at `xi_max`.
pub fn run_phased_eps_greedy<T: Scalar>(
    config: &EtcConfig<T>,
    ensemble: &PageEnsemble<T>,
    eps_config: &EpsGreedyConfig<T>,
    seed: u64,
) -> Result<Vec<PhaseRecord<T>>> {
    config.validate()?;
    if config.request_rates.as_slice() != ensemble.request_rates() {
        return Err(Error::invalid(
            "config request rates differ from the ensemble's",
        ));
    }
    let EpsGreedyConfig {
        eps,
        phases,
        burn_in_tolerance,
    } = *eps_config;
    if !(eps > T::zero() && eps <= T::one()) {
        return Err(Error::invalid(format!("eps {eps} must lie in (0, 1]")));
    }
    if phases == 0 {
        return Err(Error::invalid("need at least one phase"));
    }
    let zeta = ensemble.request_rates();
    let xi = ensemble.change_rates();
    let m = ensemble.len();
    let mf = T::from_count(m);
    let r = config.bandwidth;
    let horizon = config.horizon;
    let tolerance = burn_in_tolerance.unwrap_or(T::lit(0.01) * ensemble.total_request_rate());
    let phase_len = super::burn_in_duration(config.bounds.xi_min, zeta, tolerance)?;
    let last_start = phase_len * T::from_count(phases - 1);
    if !(last_start < horizon) {
        return Err(Error::invalid(format!(
            "{phases} phases of length {phase_len} do not fit in the horizon {horizon}"
        )));
    }

    let f_star = solve_freshness_allocation(zeta, xi, r)?.objective_value;
    let uniform = vec![r / mf; m];
    let est_config = EstimatorConfig {
        tolerance: config.tolerance,
        delta: config.delta,
    };

    let mut probes: Vec<_> = (0..m)
        .map(|i| {
            PoissonStream::new(
                stream_rng(seed, i, Stream::Change),
                xi[i],
                T::zero(),
                last_start,
            )
            .map(ChangeProbe::new)
        })
        .collect::<Result<_>>()?;
    let mut last_refresh = vec![T::zero(); m];
    let mut summaries = vec![WindowSummary::new(); m];

    let mut records = Vec::with_capacity(phases);
    let mut rates = uniform.clone();
    let mut xi_hat = Vec::new();
    let mut cumulative = T::zero();
    for p in 0..phases {
        let start = phase_len * T::from_count(p);
        let end = if p + 1 == phases {
            horizon
        } else {
            start + phase_len
        };
        let f = evaluate_objective(ObjectiveKind::Freshness, &rates, zeta, xi)?
            .expect_finite("freshness")?;
        let len = end - start;
        let regret = len / mf * (f_star - f);
        cumulative += regret;
        records.push(PhaseRecord {
            phase: p + 1,
            start,
            end,
            xi_hat: xi_hat.clone(),
            rates: rates.clone(),
            utility: len / mf * f,
            regret,
            cumulative_regret: cumulative,
            seed,
        });
        if p + 1 == phases {
            break;
        }

        // observe this phase, then re-plan for the next one
        for i in 0..m {
            let refreshes = PoissonStream::new(
                stream_rng(seed, i, Stream::Aux(p as u32)),
                rates[i],
                start,
                end,
            )?;
            for y in refreshes {
                let changed = probes[i].changed_until(y);
                summaries[i].push(y - last_refresh[i], 1, u64::from(!changed));
                last_refresh[i] = y;
            }
        }
        xi_hat = summaries
            .iter()
            .map(|s| {
                if s.is_empty() {
                    return Ok(config.bounds.xi_max);
                }
                let est = match config.estimator {
                    EtcEstimator::MomentMatch => {
                        moment_match_estimate_summary(s, config.bounds, &est_config)?
                    }
                    EtcEstimator::Mle => mle_estimate_summary(s, config.bounds, &est_config)?,
                };
                Ok(est.xi_hat)
            })
            .collect::<Result<_>>()?;
        let planned = solve_freshness_allocation(zeta, &xi_hat, r)?.rates;
        rates = planned
            .iter()
            .zip(&uniform)
            .map(|(&a, &u)| (T::one() - eps) * a + eps * u)
            .collect();
    }
    Ok(records)
}
