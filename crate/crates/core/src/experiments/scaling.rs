use serde::{Deserialize, Serialize};

use super::sweep::{sweep_exploration_horizon, SweepConfig, TauSearch};
use crate::error::{Error, Result};
use crate::policies::EtcEstimator;
use crate::process_sim::PageEnsemble;
use crate::scalar::Scalar;

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
    pub points: usize,
}

pub fn fit_scaling<T: Scalar>(xs: &[T], ys: &[T]) -> Result<ScalingFit<T>> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("xs and ys differ in length"));
    }
    if xs.len() < 3 {
        return Err(Error::invalid("a scaling fit needs at least 3 points"));
    }
    if let Some(v) = xs
        .iter()
        .chain(ys)
        .find(|v| !(**v > T::zero() && v.is_finite()))
    {
        return Err(Error::invalid(format!(
            "log-log fit needs positive values, got {v}"
        )));
    }
    let lx: Vec<T> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<T> = ys.iter().map(|y| y.ln()).collect();
    let n = T::from_count(lx.len());
    let mx = lx.iter().copied().sum::<T>() / n;
    let my = ly.iter().copied().sum::<T>() / n;
    let sxx: T = lx.iter().map(|&x| (x - mx) * (x - mx)).sum();
    let sxy: T = lx.iter().zip(&ly).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let syy: T = ly.iter().map(|&y| (y - my) * (y - my)).sum();
    if sxx == T::zero() {
        return Err(Error::invalid("all x values coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: T = lx
        .iter()
        .zip(&ly)
        .map(|(&x, &y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == T::zero() {
        T::one()
    } else {
        T::one() - ss_res / syy
    };
    Ok(ScalingFit {
        slope,
        intercept,
        r_squared,
        points: lx.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig<T> {
    pub bandwidths: Vec<T>,
    /// Strictly increasing.
    pub horizons: Vec<T>,
    pub delta: T,
    pub seeds: usize,
    pub root_seed: u64,
    pub estimator: EtcEstimator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow<T> {
    pub bandwidth: T,
    pub horizon: T,
    pub tau_star: T,
    pub mean_regret: T,
    pub std_regret: T,
    /// Mean regret at `tau_star` divided by the horizon.
    pub normalized_regret: T,
    /// Minimizer of the worst-case bound, for reference.
    pub bound_tau_star: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport<T> {
    pub rows: Vec<ScalingRow<T>>,
    /// Per bandwidth: fit of `tau_star` against `T`.
    pub tau_fits: Vec<(T, ScalingFit<T>)>,
    /// Per bandwidth: fit of `regret / T` against `T`; `None` when some
    /// mean regret is not positive.
    pub regret_fits: Vec<(T, Option<ScalingFit<T>>)>,
}

/// Empirical optimal exploration horizon (ternary search) and its regret for
/// every `(R, T)` pair, with log-log fits per `R`.
pub fn scaling_experiment<T: Scalar>(
    config: &ScalingConfig<T>,
    ensemble: &PageEnsemble<T>,
) -> Result<ScalingReport<T>> {
    if config.horizons.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("horizons must be strictly increasing"));
    }
    if config.bandwidths.is_empty() || config.horizons.is_empty() {
        return Err(Error::invalid(
            "need at least one bandwidth and one horizon",
        ));
    }
    let mut rows = Vec::new();
    let mut tau_fits = Vec::new();
    let mut regret_fits = Vec::new();
    for &r in &config.bandwidths {
        let start = rows.len();
        for &t in &config.horizons {
            let sweep = sweep_exploration_horizon(
                &SweepConfig {
                    bandwidth: r,
                    horizon: t,
                    delta: config.delta,
                    seeds: config.seeds,
                    root_seed: config.root_seed,
                    search: TauSearch::Ternary,
                    estimator: config.estimator,
                },
                ensemble,
            )?;
            let best = sweep.best();
            rows.push(ScalingRow {
                bandwidth: r,
                horizon: t,
                tau_star: sweep.tau_star,
                mean_regret: best.mean_regret,
                std_regret: best.std_regret,
                normalized_regret: best.mean_regret / t,
                bound_tau_star: sweep.bound.tau_star_raw,
            });
        }
        let block = &rows[start..];
        let ts: Vec<T> = block.iter().map(|r| r.horizon).collect();
        let taus: Vec<T> = block.iter().map(|r| r.tau_star).collect();
        let norm: Vec<T> = block.iter().map(|r| r.normalized_regret).collect();
        tau_fits.push((r, fit_scaling(&ts, &taus)?));
        regret_fits.push((r, fit_scaling(&ts, &norm).ok()));
    }
    Ok(ScalingReport {
        rows,
        tau_fits,
        regret_fits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::{regret_bound_etc, EtcConfig};
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_power_law() {
        let xs = [1.0, 4.0, 9.0, 100.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.sqrt()).collect();
        let fit = fit_scaling(&xs, &ys).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 3f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_has_zero_slope() {
        let fit = fit_scaling(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_scaling(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_scaling(&[1.0, 2.0, 3.0], &[1.0, -2.0, 3.0]).is_err());
    }

    #[test]
    fn bound_minimizer_scales_as_root_t() {
        let e = PageEnsemble::new(vec![0.3, 0.8], vec![1.0, 2.0], 0.1, 1.0).unwrap();
        let ts: Vec<f64> = (0..9).map(|k| 10f64.powf(2.0 + 0.5 * k as f64)).collect();
        let taus: Vec<f64> = ts
            .iter()
            .map(|&t| {
                regret_bound_etc(&EtcConfig::for_ensemble(&e, 2.0, t, 0.1).unwrap())
                    .unwrap()
                    .tau_star_raw
            })
            .collect();
        assert_abs_diff_eq!(fit_scaling(&ts, &taus).unwrap().slope, 0.5, epsilon = 1e-10);
    }
}
