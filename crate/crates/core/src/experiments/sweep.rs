use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mean_std;
use crate::error::{Error, Result};
use crate::estimation::RateBounds;
use crate::policies::{regret_bound_etc, run_etc, EtcBound, EtcConfig, EtcEstimator, TauChoice};
use crate::process_sim::PageEnsemble;
use crate::rng::trial_seed;
use crate::scalar::Scalar;

/// How exploration horizons are chosen. All candidates are rounded up to
/// multiples of `m/R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauSearch<T> {
    Grid(Vec<T>),
    /// `points` values spaced geometrically from `m/R` to `T`.
    LogGrid {
        points: usize,
    },
    /// Ternary search on mean regret over multiples of `m/R` in `[m/R, T)`,
    /// finished by scanning the last few candidates.
    Ternary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig<T> {
    pub bandwidth: T,
    pub horizon: T,
    pub delta: T,
    pub seeds: usize,
    pub root_seed: u64,
    pub search: TauSearch<T>,
    pub estimator: EtcEstimator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub tau: T,
    pub mean_regret: T,
    pub std_regret: T,
    pub mean_exploration_regret: T,
    pub mean_commit_regret: T,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult<T> {
    /// Every evaluated horizon, sorted by `tau`.
    pub rows: Vec<SweepRow<T>>,
    /// Evaluated horizon with the smallest mean regret.
    pub tau_star: T,
    /// Per-seed regret at `tau_star`, in seed order.
    pub regrets_at_tau_star: Vec<T>,
    pub bound: EtcBound<T>,
}

impl<T: Scalar> SweepResult<T> {
    pub fn best(&self) -> &SweepRow<T> {
        self.rows
            .iter()
            .find(|r| r.tau == self.tau_star)
            .expect("tau_star is one of the rows")
    }
}

struct Evaluator<'a, T: Scalar> {
    base: EtcConfig<T>,
    ensemble: &'a PageEnsemble<T>,
    seeds: Vec<u64>,
    cache: BTreeMap<u64, (SweepRow<T>, Vec<T>)>,
}

impl<T: Scalar> Evaluator<'_, T> {
    fn step(&self) -> T {
        self.base.step()
    }

    fn eval(&mut self, rounds: u64) -> Result<T> {
        if let Some((row, _)) = self.cache.get(&rounds) {
            return Ok(row.mean_regret);
        }
        let tau = self.step() * T::lit(rounds as f64);
        let config = self.base.clone().with_tau(TauChoice::Explicit(tau));
        let records = self
            .seeds
            .par_iter()
            .map(|&s| run_etc(&config, self.ensemble, s))
            .collect::<Result<Vec<_>>>()?;
        let regrets: Vec<T> = records.iter().map(|r| r.regret).collect();
        let (mean, std) = mean_std(&regrets);
        let n = T::from_count(records.len());
        let row = SweepRow {
            tau: records[0].tau,
            mean_regret: mean,
            std_regret: std,
            mean_exploration_regret: records.iter().map(|r| r.exploration_regret).sum::<T>() / n,
            mean_commit_regret: records.iter().map(|r| r.commit_regret).sum::<T>() / n,
            seeds: records.len(),
        };
        self.cache.insert(rounds, (row, regrets));
        Ok(mean)
    }

    fn rounds_for(&self, tau: T) -> u64 {
        (tau / self.step() - T::lit(1e-9))
            .ceil()
            .max(T::one())
            .to_f64_lossy() as u64
    }
}

/// Mean ETC regret over seeds as a function of the exploration horizon.
///
/// The ensemble is fixed; only event randomness varies with the seed, and a
/// seed's change streams are shared by every horizon.
pub fn sweep_exploration_horizon<T: Scalar>(
    config: &SweepConfig<T>,
    ensemble: &PageEnsemble<T>,
) -> Result<SweepResult<T>> {
    if config.seeds == 0 {
        return Err(Error::invalid("need at least one seed"));
    }
    let mut base =
        EtcConfig::for_ensemble(ensemble, config.bandwidth, config.horizon, config.delta)?;
    base.bounds = RateBounds::new(ensemble.xi_min(), ensemble.xi_max())?;
    base.estimator = config.estimator;
    let bound = regret_bound_etc(&base)?;
    let mut ev = Evaluator {
        seeds: (0..config.seeds as u64)
            .map(|k| trial_seed(config.root_seed, k))
            .collect(),
        base,
        ensemble,
        cache: BTreeMap::new(),
    };
    let step = ev.step();
    let max_rounds = (config.horizon / step + T::lit(1e-9))
        .floor()
        .to_f64_lossy() as u64;

    match &config.search {
        TauSearch::Grid(taus) => {
            if taus.is_empty() {
                return Err(Error::invalid("empty tau grid"));
            }
            for &tau in taus {
                if !(tau > T::zero()) {
                    return Err(Error::invalid(format!(
                        "exploration horizon {tau} must be positive"
                    )));
                }
                let r = ev.rounds_for(tau);
                if r > max_rounds {
                    return Err(Error::invalid(format!(
                        "exploration horizon {tau} exceeds the horizon"
                    )));
                }
                ev.eval(r)?;
            }
        }
        TauSearch::LogGrid { points } => {
            if *points < 2 {
                return Err(Error::invalid("log grid needs at least two points"));
            }
            let ratio = T::lit(max_rounds as f64).ln();
            for j in 0..*points {
                let frac = T::lit(j as f64 / (*points - 1) as f64);
                let r = ((ratio * frac).exp() - T::lit(1e-9)).ceil().to_f64_lossy() as u64;
                ev.eval(r.clamp(1, max_rounds))?;
            }
        }
        TauSearch::Ternary => {
            // candidates tau = k m/R with tau < T
            let top = ((config.horizon / step - T::lit(1e-9)).ceil().to_f64_lossy() as u64)
                .saturating_sub(1)
                .max(1);
            let (mut lo, mut hi) = (1u64, top);
            while hi - lo > 2 {
                let m1 = lo + (hi - lo) / 3;
                let m2 = hi - (hi - lo) / 3;
                if ev.eval(m1)? < ev.eval(m2)? {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            for k in lo..=hi {
                ev.eval(k)?;
            }
        }
    }

    let (best_rounds, _) = ev
        .cache
        .iter()
        .min_by(|a, b| {
            a.1 .0
                .mean_regret
                .partial_cmp(&b.1 .0.mean_regret)
                .expect("finite regret")
        })
        .map(|(k, v)| (*k, v.0.mean_regret))
        .expect("at least one evaluation");
    let (best_row, regrets_at_tau_star) = ev.cache[&best_rounds].clone();
    let rows = ev.cache.into_values().map(|(row, _)| row).collect();
    Ok(SweepResult {
        rows,
        tau_star: best_row.tau,
        regrets_at_tau_star,
        bound,
    })
}
