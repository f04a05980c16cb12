//! Which window schedules admit a consistent estimator, and the grouped
//! estimators used when they do.

use serde::{Deserialize, Serialize};

use super::estimators::solve;
use super::{
    EstimatorConfig, EstimatorKind, ObservationLog, RateBounds, RateEstimate, Width, WindowSummary,
    XiTilde,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Infinite window sequences with a closed-form divergence test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScheduleFamily<T> {
    /// `w_n = c`.
    Constant(T),
    /// `w_n = ln n` for `n >= 2`.
    LogGrowth,
    /// `w_n = n^p`.
    PowerGrowth(T),
    /// A finite prefix; cannot be classified.
    Explicit(Vec<T>),
}

impl<T: Scalar> ScheduleFamily<T> {
    /// The `k`-th window (`k` starting at 0).
    pub fn window(&self, k: usize) -> Option<T> {
        match self {
            ScheduleFamily::Constant(c) => Some(*c),
            ScheduleFamily::LogGrowth => Some(T::from_count(k + 2).ln()),
            ScheduleFamily::PowerGrowth(p) => Some(T::from_count(k + 1).powf(*p)),
            ScheduleFamily::Explicit(w) => w.get(k).copied(),
        }
    }

    pub fn prefix(&self, n: usize) -> Vec<T> {
        (0..n).map_while(|k| self.window(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Learnability {
    Learnable,
    NonVanishingBias,
}

/// A schedule has non-vanishing estimation bias exactly when both the total
/// length of its short windows (`w < 1`) and `sum_{w >= 1} e^{-xi w}` are
/// finite; otherwise the rate can be learned.
pub fn classify_schedule<T: Scalar>(family: &ScheduleFamily<T>, xi: T) -> Result<Learnability> {
    if !(xi > T::zero()) {
        return Err(Error::invalid(format!("change rate {xi} must be positive")));
    }
    let (short_sum_finite, long_sum_finite) = match family {
        ScheduleFamily::Constant(c) => {
            if !(*c > T::zero()) {
                return Err(Error::invalid(format!("window {c} must be positive")));
            }
            // infinitely many identical terms: one of the two series diverges
            (*c >= T::one(), *c < T::one())
        }
        // w_2 = ln 2 is the only short window; sum n^{-xi} converges iff xi > 1
        ScheduleFamily::LogGrowth => (true, xi > T::one()),
        ScheduleFamily::PowerGrowth(p) => {
            let p = *p;
            if p > T::zero() {
                (true, true)
            } else if p == T::zero() {
                (true, false)
            } else {
                // n^p < 1 for n >= 2; sum n^p converges iff p < -1
                (p < -T::one(), true)
            }
        }
        ScheduleFamily::Explicit(_) => {
            return Err(Error::UnsupportedAnalysis(
                "series divergence cannot be decided from a finite window prefix".into(),
            ))
        }
    };
    Ok(if short_sum_finite && long_sum_finite {
        Learnability::NonVanishingBias
    } else {
        Learnability::Learnable
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GroupingMode<T> {
    /// Pack windows `w < 1` into groups with total length in `(1, 2)`.
    SmallWindows,
    /// Pack windows `w >= 1` into groups with `sum e^{-xi w}` in `[1/e, 2/e)`.
    LargeWindows { xi: T },
}

/// Greedy left-to-right packing of eligible windows into disjoint groups.
/// A trailing group that never reaches the lower bound is dropped.
///
/// For large windows a single term can exceed `1/e` when `xi w < 1`. Terms of
/// at least `2/e` are skipped, and a partial group that would overshoot
/// `2/e` is abandoned and restarted from the current term.
pub fn group_intervals<T: Scalar>(windows: &[T], mode: GroupingMode<T>) -> Vec<Vec<usize>> {
    let mut groups = Vec::new();
    let mut current = Vec::new();
    let mut sum = T::zero();
    match mode {
        GroupingMode::SmallWindows => {
            for (i, &w) in windows.iter().enumerate() {
                if !(w < T::one()) {
                    continue;
                }
                current.push(i);
                sum += w;
                if sum > T::one() {
                    groups.push(std::mem::take(&mut current));
                    sum = T::zero();
                }
            }
        }
        GroupingMode::LargeWindows { xi } => {
            let lower = (-T::one()).exp();
            let upper = lower * T::lit(2.0);
            for (i, &w) in windows.iter().enumerate() {
                if !(w >= T::one()) {
                    continue;
                }
                let term = (-xi * w).exp();
                if term >= upper {
                    continue;
                }
                if sum + term >= upper {
                    current.clear();
                    sum = T::zero();
                }
                current.push(i);
                sum += term;
                if sum >= lower {
                    groups.push(std::mem::take(&mut current));
                    sum = T::zero();
                }
            }
        }
    }
    groups
}

/// Moment matching on groups: the fraction of groups without any change
/// estimates `(1/K) sum e^{-xi W_k}`, where `W_k` is the group's total length.
pub fn grouped_statistic_estimate<T: Scalar>(
    log: &ObservationLog<T>,
    groups: &[Vec<usize>],
    bounds: RateBounds<T>,
    config: &EstimatorConfig<T>,
) -> Result<RateEstimate<T>> {
    config.validate()?;
    let bits = group_bits(log, groups)?;
    let mut pairs: Vec<(T, bool)> = groups
        .iter()
        .map(|g| {
            let width: T = g.iter().map(|&i| log.windows()[i]).sum();
            (width, g.iter().any(|&i| bits[i]))
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite windows"));
    let mut summary = WindowSummary::new();
    for (w, changed) in pairs {
        summary.push(w, 1, u64::from(!changed));
    }
    let mut est = super::moment_match_estimate_summary(&summary, bounds, config)?;
    est.method = EstimatorKind::Grouped;
    est.confidence_width = Width::Unbounded;
    Ok(est)
}

/// Estimator from the fraction of groups in which every window changed,
/// `(1/K) sum (1 - e^{-xi c})^{|J_k|}`. Only defined when all grouped
/// windows share one width `c`.
pub fn grouped_all_changed_estimate<T: Scalar>(
    log: &ObservationLog<T>,
    groups: &[Vec<usize>],
    bounds: RateBounds<T>,
    config: &EstimatorConfig<T>,
) -> Result<RateEstimate<T>> {
    config.validate()?;
    let bits = group_bits(log, groups)?;
    let c = log.windows()[groups[0][0]];
    let uniform = groups
        .iter()
        .flatten()
        .all(|&i| (log.windows()[i] - c).abs() <= c * T::lit(1e-12));
    if !uniform {
        return Err(Error::UnsupportedAnalysis(
            "all-changed group estimator is only available for uniform windows".into(),
        ));
    }
    let k = T::from_count(groups.len());
    let full = groups.iter().filter(|g| g.iter().all(|&i| bits[i])).count();
    let q = T::from_count(full) / k;
    let xi_tilde = if full == 0 {
        XiTilde::Zero
    } else if full == groups.len() {
        XiTilde::Infinite
    } else {
        let sizes: Vec<T> = groups.iter().map(|g| T::from_count(g.len())).collect();
        // q minus an increasing function of xi, so decreasing
        let f = |xi: T| {
            let p = -(-xi * c).exp_m1();
            q - sizes.iter().map(|&s| p.powf(s)).sum::<T>() / k
        };
        solve(f, bounds, config.tolerance)
    };
    Ok(RateEstimate {
        xi_hat: xi_tilde.clip(&bounds),
        xi_tilde,
        confidence_width: Width::Unbounded,
        delta: config.delta,
        method: EstimatorKind::Grouped,
    })
}

fn group_bits<'a, T: Scalar>(
    log: &'a ObservationLog<T>,
    groups: &[Vec<usize>],
) -> Result<&'a [bool]> {
    if groups.is_empty() || groups.iter().any(|g| g.is_empty()) {
        return Err(Error::InsufficientData(
            "no complete groups to estimate from".into(),
        ));
    }
    let bits = log
        .bits()
        .ok_or_else(|| Error::invalid("grouped estimators need a partial (bit) log"))?;
    if groups.iter().flatten().any(|&i| i >= bits.len()) {
        return Err(Error::invalid("group index beyond the end of the log"));
    }
    Ok(bits)
}
