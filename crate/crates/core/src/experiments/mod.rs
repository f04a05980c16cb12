//! Seeded experiment drivers producing plot-ready tables.
//!
//! Every driver takes a root seed; trial `k` uses [`crate::rng::trial_seed`]
//! of it, so results are reproducible and independent of thread count.
//! Trials run on the current rayon pool.

mod coverage;
mod ensembles;
mod output;
mod scaling;
mod sweep;

pub use coverage::{
    compare_ui_ur, coverage_experiment, estimator_comparison, CoverageConfig, CoverageResult,
    EstimatorComparisonConfig, EstimatorComparisonRow, UiUrComparison, WindowKind,
};
pub use ensembles::SyntheticEnsemble;
pub use output::{write_csv_atomic, write_json_atomic};
pub use scaling::{
    fit_scaling, scaling_experiment, ScalingConfig, ScalingFit, ScalingReport, ScalingRow,
};
pub use sweep::{sweep_exploration_horizon, SweepConfig, SweepResult, SweepRow, TauSearch};

use crate::scalar::Scalar;

/// Mean and sample standard deviation.
pub(crate) fn mean_std<T: Scalar>(values: &[T]) -> (T, T) {
    if values.is_empty() {
        return (T::nan(), T::nan());
    }
    let n = T::from_count(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    if values.len() < 2 {
        return (mean, T::zero());
    }
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (n - T::one());
    (mean, var.sqrt())
}

/// Linear-interpolated quantile of unsorted data, `q` in `[0, 1]`.
pub fn quantile<T: Scalar>(values: &[T], q: f64) -> T {
    if values.is_empty() {
        return T::nan();
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in quantile input"));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    v[lo] + (v[hi] - v[lo]) * frac
}

pub fn median<T: Scalar>(values: &[T]) -> T {
    quantile(values, 0.5)
}
