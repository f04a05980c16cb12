//! Splitting a refresh bandwidth `R` across pages.
//!
//! Three objectives are supported, all concave in the rates `rho`:
//! freshness `F = sum zeta rho/(rho+xi)`, harmonic staleness
//! `H = sum zeta ln(rho/(rho+xi))` and accumulated delay
//! `J = -sum zeta xi/rho`. A fourth, the fixed-interval freshness `G`, can
//! only be evaluated.

mod sensitivity;
mod solvers;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{one_minus_exp_over, Scalar};

pub use sensitivity::{suboptimality_bound, BoundContext};
pub use solvers::{
    solve_allocation, solve_delay_allocation, solve_freshness_allocation, solve_harmonic_allocation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Freshness,
    Harmonic,
    Delay,
    /// Freshness of deterministic refreshing every `1/rho`; evaluation only.
    IntervalFreshness,
}

/// Objective value where a zero rate can send harmonic and delay to minus
/// infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ObjectiveValue<T> {
    Finite(T),
    NegInfinite,
}

impl<T: Scalar> ObjectiveValue<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            ObjectiveValue::Finite(v) => Some(v),
            ObjectiveValue::NegInfinite => None,
        }
    }

    pub fn expect_finite(self, what: &str) -> Result<T> {
        self.finite()
            .ok_or_else(|| Error::Numerical(format!("{what}: objective is unbounded below")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult<T> {
    pub rates: Vec<T>,
    pub objective_value: T,
    /// Largest relative violation of the optimality conditions.
    pub kkt_residual: T,
    /// Lagrange multiplier of the bandwidth constraint.
    pub multiplier: T,
}

/// Evaluates `kind` at rates `rho`.
pub fn evaluate_objective<T: Scalar>(
    kind: ObjectiveKind,
    rho: &[T],
    zeta: &[T],
    xi: &[T],
) -> Result<ObjectiveValue<T>> {
    check_lengths(rho.len(), zeta, xi)?;
    if let Some(r) = rho.iter().find(|r| !(**r >= T::zero() && r.is_finite())) {
        return Err(Error::invalid(format!(
            "refresh rate {r} must be finite and non-negative"
        )));
    }
    let terms = rho.iter().zip(zeta).zip(xi).map(|((&r, &z), &x)| (r, z, x));
    let value = match kind {
        ObjectiveKind::Freshness => terms
            .map(|(r, z, x)| {
                if r == T::zero() {
                    T::zero()
                } else {
                    z * r / (r + x)
                }
            })
            .sum(),
        ObjectiveKind::IntervalFreshness => terms
            .map(|(r, z, x)| {
                if r == T::zero() {
                    T::zero()
                } else {
                    z * one_minus_exp_over(x / r)
                }
            })
            .sum(),
        ObjectiveKind::Harmonic => {
            if rho.iter().any(|&r| r == T::zero()) {
                return Ok(ObjectiveValue::NegInfinite);
            }
            terms.map(|(r, z, x)| -z * (x / r).ln_1p()).sum()
        }
        ObjectiveKind::Delay => {
            if rho.iter().any(|&r| r == T::zero()) {
                return Ok(ObjectiveValue::NegInfinite);
            }
            terms.map(|(r, z, x)| -z * x / r).sum()
        }
    };
    Ok(ObjectiveValue::Finite(value))
}

pub(crate) fn check_lengths<T: Scalar>(m: usize, zeta: &[T], xi: &[T]) -> Result<()> {
    if m == 0 || zeta.len() != m || xi.len() != m {
        return Err(Error::invalid(format!(
            "length mismatch: {m} rates, {} request rates, {} change rates",
            zeta.len(),
            xi.len()
        )));
    }
    Ok(())
}

pub(crate) fn check_positive<T: Scalar>(name: &str, values: &[T]) -> Result<()> {
    match values.iter().find(|v| !(**v > T::zero() && v.is_finite())) {
        Some(v) => Err(Error::invalid(format!("{name} {v} must be positive"))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn objective_examples() {
        let z = [1.0, 2.0];
        let x = [0.5, 1.5];
        let f = evaluate_objective(ObjectiveKind::Freshness, &[0.0, 0.0], &z, &x).unwrap();
        assert_eq!(f, ObjectiveValue::Finite(0.0));
        let h = evaluate_objective(ObjectiveKind::Harmonic, &x, &z, &x).unwrap();
        assert_abs_diff_eq!(h.finite().unwrap(), -2f64.ln() * 3.0, epsilon = 1e-12);
        assert_eq!(
            evaluate_objective(ObjectiveKind::Delay, &[0.0, 1.0], &z, &x).unwrap(),
            ObjectiveValue::NegInfinite
        );
        assert_eq!(
            evaluate_objective(ObjectiveKind::Harmonic, &[1.0, 0.0], &z, &x).unwrap(),
            ObjectiveValue::NegInfinite
        );
    }

    #[test]
    fn interval_freshness_dominates_freshness() {
        let z = [1.0, 0.3, 2.0];
        let x = [0.2, 1.0, 5.0];
        let rho = [0.7, 2.0, 0.1];
        let f = evaluate_objective(ObjectiveKind::Freshness, &rho, &z, &x)
            .unwrap()
            .finite()
            .unwrap();
        let g = evaluate_objective(ObjectiveKind::IntervalFreshness, &rho, &z, &x)
            .unwrap()
            .finite()
            .unwrap();
        assert!(g >= f);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        assert!(evaluate_objective(ObjectiveKind::Freshness, &[1.0], &[1.0, 1.0], &[1.0]).is_err());
        assert!(evaluate_objective(ObjectiveKind::Freshness, &[-1.0], &[1.0], &[1.0]).is_err());
    }
}
