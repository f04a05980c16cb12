//! Poisson change/request/refresh simulation and utility evaluation.

mod poisson;
mod trace;
mod utility;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{approx_eq_rel, Scalar};

pub use poisson::{freshness_probability_exact, sample_poisson_events, ChangeProbe, PoissonStream};
pub use trace::{
    observe_counts, observe_windows, simulate_crawl, simulate_crawl_with, PageTrace,
    RefreshSchedule, SimOptions, SimulationTrace,
};
pub use utility::{
    empirical_utility, empirical_utility_between, expected_utility_interval_policy,
    expected_utility_rate_policy,
};

/// Relative tolerance for the bandwidth constraint of a [`Policy`].
pub const BANDWIDTH_REL_TOL: f64 = 1e-9;

/// Pages with their true change rates and known request rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageEnsemble<T> {
    change_rates: Vec<T>,
    request_rates: Vec<T>,
    xi_min: T,
    xi_max: T,
}

impl<T: Scalar> PageEnsemble<T> {
    pub fn new(change_rates: Vec<T>, request_rates: Vec<T>, xi_min: T, xi_max: T) -> Result<Self> {
        if change_rates.is_empty() {
            return Err(Error::invalid("ensemble needs at least one page"));
        }
        if change_rates.len() != request_rates.len() {
            return Err(Error::invalid(format!(
                "{} change rates but {} request rates",
                change_rates.len(),
                request_rates.len()
            )));
        }
        if !(xi_min > T::zero() && xi_min <= xi_max && xi_max.is_finite()) {
            return Err(Error::invalid(format!(
                "bad rate bounds [{xi_min}, {xi_max}]"
            )));
        }
        for (i, &xi) in change_rates.iter().enumerate() {
            if !(xi >= xi_min && xi <= xi_max) {
                return Err(Error::invalid(format!(
                    "change rate {xi} of page {i} outside [{xi_min}, {xi_max}]"
                )));
            }
        }
        for (i, &zeta) in request_rates.iter().enumerate() {
            if !(zeta > T::zero() && zeta.is_finite()) {
                return Err(Error::invalid(format!(
                    "request rate {zeta} of page {i} must be positive"
                )));
            }
        }
        Ok(Self {
            change_rates,
            request_rates,
            xi_min,
            xi_max,
        })
    }

    /// Ensemble whose bounds are the tightest interval around `change_rates`.
    pub fn with_tight_bounds(change_rates: Vec<T>, request_rates: Vec<T>) -> Result<Self> {
        let lo = change_rates.iter().copied().fold(T::infinity(), T::min);
        let hi = change_rates.iter().copied().fold(T::neg_infinity(), T::max);
        Self::new(change_rates, request_rates, lo, hi)
    }

    pub fn len(&self) -> usize {
        self.change_rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.change_rates.is_empty()
    }

    pub fn change_rates(&self) -> &[T] {
        &self.change_rates
    }

    pub fn request_rates(&self) -> &[T] {
        &self.request_rates
    }

    pub fn xi_min(&self) -> T {
        self.xi_min
    }

    pub fn xi_max(&self) -> T {
        self.xi_max
    }

    pub fn total_request_rate(&self) -> T {
        self.request_rates.iter().copied().sum()
    }

    /// Copy of the ensemble with different bounds (rates must still fit).
    pub fn with_bounds(&self, xi_min: T, xi_max: T) -> Result<Self> {
        Self::new(
            self.change_rates.clone(),
            self.request_rates.clone(),
            xi_min,
            xi_max,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyKind {
    /// Poisson refreshes with rate `values[i]`.
    Rates,
    /// Deterministic refreshes every `values[i]` time units.
    Intervals,
}

/// A stationary refresh policy under bandwidth `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy<T> {
    kind: PolicyKind,
    values: Vec<T>,
    bandwidth: T,
}

impl<T: Scalar> Policy<T> {
    /// Rate policy; requires `rho_i >= 0` and `sum(rho) == R`.
    pub fn rates(values: Vec<T>, bandwidth: T) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        if values.is_empty() {
            return Err(Error::invalid("policy needs at least one page"));
        }
        if let Some(bad) = values.iter().find(|v| !(**v >= T::zero() && v.is_finite())) {
            return Err(Error::invalid(format!(
                "refresh rate {bad} must be finite and non-negative"
            )));
        }
        let total: T = values.iter().copied().sum();
        if !approx_eq_rel(total, bandwidth, T::lit(BANDWIDTH_REL_TOL)) {
            return Err(Error::invalid(format!(
                "refresh rates sum to {total}, bandwidth is {bandwidth}"
            )));
        }
        Ok(Self {
            kind: PolicyKind::Rates,
            values,
            bandwidth,
        })
    }

    /// Interval policy; requires `kappa_i > 0` and `sum(1/kappa) == R`.
    pub fn intervals(values: Vec<T>, bandwidth: T) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        if values.is_empty() {
            return Err(Error::invalid("policy needs at least one page"));
        }
        if let Some(bad) = values.iter().find(|v| !(**v > T::zero() && v.is_finite())) {
            return Err(Error::invalid(format!(
                "refresh interval {bad} must be positive"
            )));
        }
        let total: T = values.iter().map(|k| k.recip()).sum();
        if !approx_eq_rel(total, bandwidth, T::lit(BANDWIDTH_REL_TOL)) {
            return Err(Error::invalid(format!(
                "refresh intervals give total rate {total}, bandwidth is {bandwidth}"
            )));
        }
        Ok(Self {
            kind: PolicyKind::Intervals,
            values,
            bandwidth,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Long-run refresh rate of each page.
    pub fn refresh_rates(&self) -> Vec<T> {
        match self.kind {
            PolicyKind::Rates => self.values.clone(),
            PolicyKind::Intervals => self.values.iter().map(|k| k.recip()).collect(),
        }
    }
}

fn check_bandwidth<T: Scalar>(bandwidth: T) -> Result<()> {
    if bandwidth > T::zero() && bandwidth.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "bandwidth {bandwidth} must be positive"
        )))
    }
}

/// Closed time interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon<T> {
    pub start: T,
    pub end: T,
}

impl<T: Scalar> Horizon<T> {
    pub fn new(start: T, end: T) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(Error::invalid(format!(
                "degenerate horizon [{start}, {end}]"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn from_zero(end: T) -> Result<Self> {
        Self::new(T::zero(), end)
    }

    pub fn duration(&self) -> T {
        self.end - self.start
    }
}
