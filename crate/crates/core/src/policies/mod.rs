//! Baseline policies, burn-in, and the learning controllers.

mod eps_greedy;
mod etc;

use crate::error::{Error, Result};
use crate::process_sim::{freshness_probability_exact, Policy};
use crate::scalar::Scalar;

pub use eps_greedy::{run_phased_eps_greedy, EpsGreedyConfig, PhaseRecord};
pub use etc::{
    etc_regret_from_estimates, regret_bound_etc, run_etc, EtcBound, EtcConfig, EtcEstimator,
    RegretRecord, SimulatedUtilities, TauChoice,
};

/// Time after a policy change until the expected differential utility is
/// within `eps` of its stationary value: `ln(2 sum zeta / eps) / xi_min`.
/// Zero when `eps >= 2 sum zeta`.
pub fn burn_in_duration<T: Scalar>(xi_min: T, zeta: &[T], eps: T) -> Result<T> {
    if !(xi_min > T::zero()) || !(eps > T::zero()) {
        return Err(Error::invalid("burn-in needs positive xi_min and eps"));
    }
    let total: T = zeta.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::invalid("request rates must have a positive sum"));
    }
    Ok(((T::lit(2.0) * total / eps).ln() / xi_min).max(T::zero()))
}

/// Refresh every page once per `m/R`.
pub fn uniform_interval_policy<T: Scalar>(m: usize, bandwidth: T) -> Result<Policy<T>> {
    if m == 0 {
        return Err(Error::invalid("need at least one page"));
    }
    Policy::intervals(vec![T::from_count(m) / bandwidth; m], bandwidth)
}

/// Refresh every page at rate `R/m`.
pub fn uniform_rate_policy<T: Scalar>(m: usize, bandwidth: T) -> Result<Policy<T>> {
    if m == 0 {
        return Err(Error::invalid("need at least one page"));
    }
    Policy::rates(vec![bandwidth / T::from_count(m); m], bandwidth)
}

/// `sum zeta_i P(fresh at delta)` for pages starting in cache states `fresh`
/// and refreshed at rates `rho` from then on.
pub fn exact_differential_utility<T: Scalar>(
    rho: &[T],
    xi: &[T],
    zeta: &[T],
    fresh: &[bool],
    delta: T,
) -> Result<T> {
    if rho.len() != xi.len() || xi.len() != zeta.len() || zeta.len() != fresh.len() {
        return Err(Error::invalid("length mismatch"));
    }
    let mut total = T::zero();
    for i in 0..rho.len() {
        total += zeta[i] * freshness_probability_exact(rho[i], xi[i], fresh[i], delta)?;
    }
    Ok(total)
}

/// `sum zeta rho / (rho + xi)`, the stationary value of
/// [`exact_differential_utility`].
pub fn stationary_differential_utility<T: Scalar>(rho: &[T], xi: &[T], zeta: &[T]) -> T {
    rho.iter()
        .zip(xi)
        .zip(zeta)
        .map(|((&r, &x), &z)| {
            if r == T::zero() {
                T::zero()
            } else {
                z * r / (r + x)
            }
        })
        .sum()
}
