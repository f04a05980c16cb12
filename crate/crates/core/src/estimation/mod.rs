//! Change-rate estimation from crawl observations.
//!
//! Partial observability sees one bit per refresh window ("did the page
//! change since the last visit?"); full observability sees the number of
//! changes. Estimators return the raw root `xi_tilde` together with its
//! clipped value `xi_hat`.

mod bounds;
mod estimators;
mod io;
mod learnability;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use bounds::{confidence_width_full, confidence_width_partial, confidence_width_ui, psi};
pub use estimators::{
    full_obs_estimate, mle_estimate, mle_estimate_summary, moment_match_estimate,
    moment_match_estimate_summary,
};
pub use io::{read_logs_csv, write_logs_csv};
pub use learnability::{
    classify_schedule, group_intervals, grouped_all_changed_estimate, grouped_statistic_estimate,
    GroupingMode, Learnability, ScheduleFamily,
};

/// Default absolute tolerance on the rate for the bisection solvers.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// What was seen at each refresh.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcomes {
    /// `o_n`: whether the page changed during window `n`.
    Bits(Vec<bool>),
    /// `x_n`: number of changes during window `n`.
    Counts(Vec<u64>),
}

/// Refresh windows of one page and what each refresh observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationLog<T> {
    windows: Vec<T>,
    outcomes: Outcomes,
}

impl<T: Scalar> ObservationLog<T> {
    pub fn partial(windows: Vec<T>, bits: Vec<bool>) -> Result<Self> {
        Self::validate(&windows, bits.len())?;
        Ok(Self {
            windows,
            outcomes: Outcomes::Bits(bits),
        })
    }

    pub fn full(windows: Vec<T>, counts: Vec<u64>) -> Result<Self> {
        Self::validate(&windows, counts.len())?;
        Ok(Self {
            windows,
            outcomes: Outcomes::Counts(counts),
        })
    }

    /// Partial log from refresh times `y_1 < y_2 < ...`, with `y_0 = origin`.
    pub fn from_refresh_times(origin: T, times: &[T], bits: Vec<bool>) -> Result<Self> {
        let mut prev = origin;
        let mut windows = Vec::with_capacity(times.len());
        for &y in times {
            windows.push(y - prev);
            prev = y;
        }
        Self::partial(windows, bits)
    }

    fn validate(windows: &[T], outcomes: usize) -> Result<()> {
        if windows.is_empty() {
            return Err(Error::invalid("observation log is empty"));
        }
        if windows.len() != outcomes {
            return Err(Error::invalid(format!(
                "{} windows but {outcomes} outcomes",
                windows.len()
            )));
        }
        if let Some(w) = windows.iter().find(|w| !(**w > T::zero() && w.is_finite())) {
            return Err(Error::invalid(format!("window {w} must be positive")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn windows(&self) -> &[T] {
        &self.windows
    }

    pub fn outcomes(&self) -> &Outcomes {
        &self.outcomes
    }

    pub fn bits(&self) -> Option<&[bool]> {
        match &self.outcomes {
            Outcomes::Bits(b) => Some(b),
            Outcomes::Counts(_) => None,
        }
    }

    pub fn counts(&self) -> Option<&[u64]> {
        match &self.outcomes {
            Outcomes::Counts(c) => Some(c),
            Outcomes::Bits(_) => None,
        }
    }

    pub fn is_partial(&self) -> bool {
        matches!(self.outcomes, Outcomes::Bits(_))
    }

    /// `y_N`, the total observed time.
    pub fn elapsed(&self) -> T {
        self.windows.iter().copied().sum()
    }

    /// Refresh times `y_n` measured from the log origin.
    pub fn refresh_times(&self) -> Vec<T> {
        let mut acc = T::zero();
        self.windows
            .iter()
            .map(|&w| {
                acc += w;
                acc
            })
            .collect()
    }
}

/// Bit observations bucketed by window width. Equivalent to a partial
/// [`ObservationLog`] for every estimator here, and much smaller when
/// windows repeat (as under interval policies).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowSummary<T> {
    buckets: Vec<WindowBucket<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowBucket<T> {
    pub width: T,
    pub total: u64,
    /// Windows in which no change was seen.
    pub unchanged: u64,
}

impl<T: Scalar> WindowSummary<T> {
    pub fn new() -> Self {
        Self {
            buckets: Vec::new(),
        }
    }

    pub fn from_log(log: &ObservationLog<T>) -> Result<Self> {
        let bits = log
            .bits()
            .ok_or_else(|| Error::invalid("estimator needs a partial (bit) log"))?;
        let mut pairs: Vec<(T, bool)> = log
            .windows()
            .iter()
            .copied()
            .zip(bits.iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite windows"));
        let mut summary = Self::new();
        for (w, changed) in pairs {
            summary.push(w, 1, u64::from(!changed));
        }
        Ok(summary)
    }

    /// Adds `total` windows of width `width`, `unchanged` of which saw no change.
    /// Merges into the last bucket when the width matches it exactly.
    pub fn push(&mut self, width: T, total: u64, unchanged: u64) {
        debug_assert!(unchanged <= total);
        if total == 0 {
            return;
        }
        match self.buckets.last_mut() {
            Some(b) if b.width == width => {
                b.total += total;
                b.unchanged += unchanged;
            }
            _ => self.buckets.push(WindowBucket {
                width,
                total,
                unchanged,
            }),
        }
    }

    pub fn buckets(&self) -> &[WindowBucket<T>] {
        &self.buckets
    }

    pub fn total(&self) -> u64 {
        self.buckets.iter().map(|b| b.total).sum()
    }

    pub fn unchanged(&self) -> u64 {
        self.buckets.iter().map(|b| b.unchanged).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }
}

/// Known range of change rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBounds<T> {
    pub xi_min: T,
    pub xi_max: T,
}

impl<T: Scalar> RateBounds<T> {
    pub fn new(xi_min: T, xi_max: T) -> Result<Self> {
        if !(xi_min > T::zero() && xi_min <= xi_max && xi_max.is_finite()) {
            return Err(Error::invalid(format!(
                "bad rate bounds [{xi_min}, {xi_max}]"
            )));
        }
        Ok(Self { xi_min, xi_max })
    }

    pub fn clamp(&self, xi: T) -> T {
        xi.max(self.xi_min).min(self.xi_max)
    }
}

/// Solver settings shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig<T> {
    /// Absolute bracket width at which bisection stops.
    pub tolerance: T,
    /// Confidence parameter of the reported width.
    pub delta: T,
}

impl<T: Scalar> Default for EstimatorConfig<T> {
    fn default() -> Self {
        Self {
            tolerance: T::lit(DEFAULT_TOLERANCE),
            delta: T::lit(0.05),
        }
    }
}

impl<T: Scalar> EstimatorConfig<T> {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > T::zero()) {
            return Err(Error::invalid(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        if !(self.delta > T::zero() && self.delta < T::one()) {
            return Err(Error::invalid(format!(
                "delta {} must lie in (0, 1)",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Pre-clipping solution of an estimating equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum XiTilde<T> {
    Finite(T),
    /// Every window was unchanged; the equation's root is at zero.
    Zero,
    /// Every window changed; the root is at infinity.
    Infinite,
}

impl<T: Scalar> XiTilde<T> {
    pub fn clip(self, bounds: &RateBounds<T>) -> T {
        match self {
            XiTilde::Finite(x) => bounds.clamp(x),
            XiTilde::Zero => bounds.xi_min,
            XiTilde::Infinite => bounds.xi_max,
        }
    }

    pub fn as_float(self) -> T {
        match self {
            XiTilde::Finite(x) => x,
            XiTilde::Zero => T::zero(),
            XiTilde::Infinite => T::infinity(),
        }
    }
}

/// A confidence half-width, possibly unavailable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Width<T> {
    Finite(T),
    Unbounded,
}

impl<T: Scalar> Width<T> {
    pub fn as_float(self) -> T {
        match self {
            Width::Finite(w) => w,
            Width::Unbounded => T::infinity(),
        }
    }

    /// Whether `error` lies within the width.
    pub fn covers(self, error: T) -> bool {
        match self {
            Width::Finite(w) => error.abs() <= w,
            Width::Unbounded => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    MomentMatch,
    Mle,
    FullObs,
    Grouped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate<T> {
    pub xi_hat: T,
    pub xi_tilde: XiTilde<T>,
    pub confidence_width: Width<T>,
    pub delta: T,
    pub method: EstimatorKind,
}

/// Where the root of a decreasing function lies relative to a bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Root<T> {
    Inside(T),
    BelowBracket,
    AboveBracket,
}

/// Bisection for the root of a strictly decreasing `f` on `[lo, hi]`, stopping
/// when the bracket is narrower than `tol` (or cannot shrink in `T`).
pub(crate) fn bisect_decreasing<T: Scalar>(
    mut f: impl FnMut(T) -> T,
    mut lo: T,
    mut hi: T,
    tol: T,
) -> Root<T> {
    if f(lo) <= T::zero() {
        return Root::BelowBracket;
    }
    if f(hi) >= T::zero() {
        return Root::AboveBracket;
    }
    let half = T::lit(0.5);
    while hi - lo > tol {
        let mid = lo + (hi - lo) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Root::Inside(lo + (hi - lo) * half)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_rejects_bad_windows() {
        assert!(ObservationLog::<f64>::partial(vec![], vec![]).is_err());
        assert!(ObservationLog::partial(vec![1.0, 0.0], vec![true, false]).is_err());
        assert!(ObservationLog::partial(vec![1.0], vec![true, false]).is_err());
        assert!(ObservationLog::full(vec![1.0, 2.0], vec![0, 3]).is_ok());
    }

    #[test]
    fn refresh_times_round_trip() {
        let log =
            ObservationLog::from_refresh_times(0.0, &[1.0, 3.0, 3.5], vec![true, false, true])
                .unwrap();
        assert_eq!(log.windows(), &[1.0, 2.0, 0.5]);
        assert_eq!(log.refresh_times(), vec![1.0, 3.0, 3.5]);
        assert_eq!(log.elapsed(), 3.5);
    }

    #[test]
    fn summary_merges_equal_widths() {
        let log = ObservationLog::partial(vec![1.0, 2.0, 1.0, 1.0], vec![true, false, false, true])
            .unwrap();
        let s = WindowSummary::from_log(&log).unwrap();
        assert_eq!(
            s.buckets(),
            &[
                WindowBucket {
                    width: 1.0,
                    total: 3,
                    unchanged: 1
                },
                WindowBucket {
                    width: 2.0,
                    total: 1,
                    unchanged: 1
                }
            ]
        );
    }

    #[test]
    fn bisection_reports_side_of_bracket() {
        assert_eq!(
            bisect_decreasing(|x: f64| 1.0 - x, 2.0, 3.0, 1e-9),
            Root::BelowBracket
        );
        assert_eq!(
            bisect_decreasing(|x: f64| 5.0 - x, 2.0, 3.0, 1e-9),
            Root::AboveBracket
        );
        match bisect_decreasing(|x: f64| 2.5 - x, 2.0, 3.0, 1e-12) {
            Root::Inside(r) => assert!((r - 2.5).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
