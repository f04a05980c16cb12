use super::bounds::width_from_summary;
use super::{
    bisect_decreasing, EstimatorConfig, EstimatorKind, ObservationLog, RateBounds, RateEstimate,
    Root, Width, WindowSummary, XiTilde,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Moment matching on a partial log: solves
/// `p_hat = (1/N) sum(exp(-xi w_n))` where `p_hat` is the fraction of
/// unchanged windows, then clips to the bounds.
pub fn moment_match_estimate<T: Scalar>(
    log: &ObservationLog<T>,
    bounds: RateBounds<T>,
    config: &EstimatorConfig<T>,
) -> Result<RateEstimate<T>> {
    moment_match_estimate_summary(&WindowSummary::from_log(log)?, bounds, config)
}

pub fn moment_match_estimate_summary<T: Scalar>(
    summary: &WindowSummary<T>,
    bounds: RateBounds<T>,
    config: &EstimatorConfig<T>,
) -> Result<RateEstimate<T>> {
    config.validate()?;
    let (n, unchanged) = counts(summary)?;
    let xi_tilde = if unchanged == n {
        XiTilde::Zero
    } else if unchanged == 0 {
        XiTilde::Infinite
    } else {
        let nf = T::lit(n as f64);
        let p_hat = T::lit(unchanged as f64) / nf;
        let f = |xi: T| {
            let mean: T = summary
                .buckets()
                .iter()
                .map(|b| T::lit(b.total as f64) * (-xi * b.width).exp())
                .sum::<T>()
                / nf;
            mean - p_hat
        };
        solve(f, bounds, config.tolerance)
    };
    Ok(RateEstimate {
        xi_hat: xi_tilde.clip(&bounds),
        xi_tilde,
        confidence_width: Width::Finite(width_from_summary(summary, bounds.xi_max, config.delta)?),
        delta: config.delta,
        method: EstimatorKind::MomentMatch,
    })
}

/// Maximum likelihood on a partial log. The log-likelihood
/// `sum_{o=1} ln(1 - e^{-xi w}) - sum_{o=0} xi w` is concave, so its
/// derivative is bisected. No confidence width is attached.
pub fn mle_estimate<T: Scalar>(
    log: &ObservationLog<T>,
    bounds: RateBounds<T>,
    config: &EstimatorConfig<T>,
) -> Result<RateEstimate<T>> {
    mle_estimate_summary(&WindowSummary::from_log(log)?, bounds, config)
}

pub fn mle_estimate_summary<T: Scalar>(
    summary: &WindowSummary<T>,
    bounds: RateBounds<T>,
    config: &EstimatorConfig<T>,
) -> Result<RateEstimate<T>> {
    config.validate()?;
    let (n, unchanged) = counts(summary)?;
    let xi_tilde = if unchanged == n {
        XiTilde::Zero
    } else if unchanged == 0 {
        XiTilde::Infinite
    } else {
        let unchanged_time: T = summary
            .buckets()
            .iter()
            .map(|b| T::lit(b.unchanged as f64) * b.width)
            .sum();
        let score = |xi: T| {
            let changed: T = summary
                .buckets()
                .iter()
                .filter(|b| b.total > b.unchanged)
                .map(|b| T::lit((b.total - b.unchanged) as f64) * b.width / (xi * b.width).exp_m1())
                .sum();
            changed - unchanged_time
        };
        solve(score, bounds, config.tolerance)
    };
    Ok(RateEstimate {
        xi_hat: xi_tilde.clip(&bounds),
        xi_tilde,
        confidence_width: Width::Unbounded,
        delta: config.delta,
        method: EstimatorKind::Mle,
    })
}

/// Changes per unit time on a full (count) log, clipped to the bounds.
pub fn full_obs_estimate<T: Scalar>(
    log: &ObservationLog<T>,
    bounds: RateBounds<T>,
    config: &EstimatorConfig<T>,
) -> Result<RateEstimate<T>> {
    config.validate()?;
    let counts = log
        .counts()
        .ok_or_else(|| Error::invalid("full-observation estimator needs a count log"))?;
    let elapsed = log.elapsed();
    let total: u64 = counts.iter().sum();
    let xi_tilde = XiTilde::Finite(T::lit(total as f64) / elapsed);
    Ok(RateEstimate {
        xi_hat: xi_tilde.clip(&bounds),
        xi_tilde,
        confidence_width: Width::Finite(super::confidence_width_full(
            elapsed,
            bounds.xi_min,
            bounds.xi_max,
            config.delta,
        )?),
        delta: config.delta,
        method: EstimatorKind::FullObs,
    })
}

fn counts<T: Scalar>(summary: &WindowSummary<T>) -> Result<(u64, u64)> {
    let n = summary.total();
    if n == 0 {
        return Err(Error::invalid("observation log is empty"));
    }
    Ok((n, summary.unchanged()))
}

/// Bisects on `[xi_min/2, 2 xi_max]`; a root outside saturates at the edge.
pub(crate) fn solve<T: Scalar>(f: impl FnMut(T) -> T, bounds: RateBounds<T>, tol: T) -> XiTilde<T> {
    let lo = bounds.xi_min * T::lit(0.5);
    let hi = bounds.xi_max * T::lit(2.0);
    match bisect_decreasing(f, lo, hi, tol) {
        Root::Inside(x) => XiTilde::Finite(x),
        Root::BelowBracket => XiTilde::Finite(lo),
        Root::AboveBracket => XiTilde::Finite(hi),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bounds() -> RateBounds<f64> {
        RateBounds::new(0.1, 1.0).unwrap()
    }

    fn cfg() -> EstimatorConfig<f64> {
        EstimatorConfig::default()
    }

    fn finite(x: XiTilde<f64>) -> f64 {
        match x {
            XiTilde::Finite(v) => v,
            other => panic!("expected a finite root, got {other:?}"),
        }
    }

    #[test]
    fn moment_match_unit_windows() {
        let log = ObservationLog::partial(vec![1.0; 4], vec![false, true, false, true]).unwrap();
        let est = moment_match_estimate(&log, bounds(), &cfg()).unwrap();
        assert_abs_diff_eq!(finite(est.xi_tilde), 2f64.ln(), epsilon = 1e-9);
        assert_eq!(est.method, EstimatorKind::MomentMatch);
    }

    #[test]
    fn moment_match_mixed_windows() {
        // e^{-x} + e^{-2x} = 1  =>  e^{-x} = (sqrt5 - 1)/2
        let log = ObservationLog::partial(vec![1.0, 2.0], vec![false, true]).unwrap();
        let est = moment_match_estimate(&log, bounds(), &cfg()).unwrap();
        let expected = -((5f64.sqrt() - 1.0) / 2.0).ln();
        assert_abs_diff_eq!(finite(est.xi_tilde), expected, epsilon = 1e-9);
        assert_abs_diff_eq!(expected, 0.48121, epsilon = 1e-5);
    }

    #[test]
    fn extreme_bit_patterns_hit_the_bounds() {
        let none = ObservationLog::partial(vec![1.0; 5], vec![false; 5]).unwrap();
        let all = ObservationLog::partial(vec![1.0; 5], vec![true; 5]).unwrap();
        for f in [moment_match_estimate::<f64>, mle_estimate::<f64>] {
            let lo = f(&none, bounds(), &cfg()).unwrap();
            assert_eq!(lo.xi_tilde, XiTilde::Zero);
            assert_eq!(lo.xi_hat, 0.1);
            let hi = f(&all, bounds(), &cfg()).unwrap();
            assert_eq!(hi.xi_tilde, XiTilde::Infinite);
            assert_eq!(hi.xi_hat, 1.0);
        }
    }

    #[test]
    fn mle_matches_grid_search() {
        let log = ObservationLog::partial(vec![1.0, 2.0], vec![false, true]).unwrap();
        let wide = RateBounds::new(0.01, 5.0).unwrap();
        let est = mle_estimate(&log, wide, &cfg()).unwrap();
        // oracle: maximize ln(1 - e^{-2x}) - x on a fine grid
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0.0);
        for k in 1..=2_000_000 {
            let x = 0.01 + (5.0 - 0.01) * k as f64 / 2_000_000.0;
            let l = (1.0 - (-2.0 * x).exp()).ln() - x;
            if l > best {
                best = l;
                arg = x;
            }
        }
        // stationary point is x = ln(3)/2
        assert_abs_diff_eq!(est.xi_hat, arg, epsilon = 5e-6);
        assert_abs_diff_eq!(est.xi_hat, 3f64.ln() / 2.0, epsilon = 1e-9);
        assert_eq!(est.confidence_width, Width::Unbounded);
    }

    #[test]
    fn mle_equals_moment_match_for_equal_windows() {
        let bits = vec![true, false, false, true, true, false, true];
        let log = ObservationLog::partial(vec![0.7; bits.len()], bits).unwrap();
        let a = moment_match_estimate(&log, bounds(), &cfg()).unwrap();
        let b = mle_estimate(&log, bounds(), &cfg()).unwrap();
        assert!((a.xi_hat - b.xi_hat).abs() <= 2e-10);
    }

    #[test]
    fn full_observation_examples() {
        let log = ObservationLog::full(vec![2.5; 4], vec![1, 3, 0, 3]).unwrap();
        let est = full_obs_estimate(&log, bounds(), &cfg()).unwrap();
        assert_eq!(est.xi_tilde, XiTilde::Finite(0.7));
        let zero = ObservationLog::full(vec![10.0], vec![0]).unwrap();
        assert_eq!(
            full_obs_estimate(&zero, bounds(), &cfg()).unwrap().xi_hat,
            0.1
        );
        let partial = ObservationLog::partial(vec![1.0], vec![true]).unwrap();
        assert!(full_obs_estimate(&partial, bounds(), &cfg()).is_err());
    }

    #[test]
    fn root_outside_bracket_saturates() {
        // p_hat = 0.99 with unit windows wants xi ~ 0.01, below xi_min/2
        let mut bits = vec![false; 99];
        bits.push(true);
        let log = ObservationLog::partial(vec![1.0; 100], bits).unwrap();
        let est = moment_match_estimate(&log, bounds(), &cfg()).unwrap();
        assert_eq!(est.xi_tilde, XiTilde::Finite(0.05));
        assert_eq!(est.xi_hat, 0.1);
    }

    #[test]
    fn works_in_single_precision() {
        let log = ObservationLog::partial(vec![1.0f32; 4], vec![false, true, false, true]).unwrap();
        let b = RateBounds::new(0.1f32, 1.0).unwrap();
        let est = moment_match_estimate(&log, b, &EstimatorConfig::default()).unwrap();
        assert!((est.xi_hat - 2f32.ln()).abs() < 1e-5);
    }
}
