use serde::{Deserialize, Serialize};

use super::{check_lengths, check_positive, ObjectiveKind};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Problem constants some of the bounds depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundContext<T> {
    pub bandwidth: T,
    pub xi_min: T,
    pub xi_max: T,
    pub zeta_min: T,
}

impl<T: Scalar> BoundContext<T> {
    pub fn from_rates(bandwidth: T, xi_min: T, xi_max: T, zeta: &[T]) -> Self {
        let zeta_min = zeta.iter().copied().fold(T::infinity(), T::min);
        Self {
            bandwidth,
            xi_min,
            xi_max,
            zeta_min,
        }
    }
}

/// Upper bound on `obj(rho*(xi); xi) - obj(rho*(xi_hat); xi)`, the loss from
/// allocating with estimated rates.
///
/// * freshness: `sum zeta (xi_hat - xi)^2 / (xi_hat min(xi_hat, xi))`
/// * harmonic: `(xi_min + R) R^2 / xi_min^5 * sum zeta (xi - xi_hat)^2`
/// * delay: `xi_max^2 (sum sqrt zeta)^4 / (R zeta_min xi_min^3) * sum (xi - xi_hat)^2`
pub fn suboptimality_bound<T: Scalar>(
    kind: ObjectiveKind,
    xi_hat: &[T],
    xi: &[T],
    zeta: &[T],
    context: &BoundContext<T>,
) -> Result<T> {
    check_lengths(xi_hat.len(), zeta, xi)?;
    check_positive("estimated change rate", xi_hat)?;
    check_positive("change rate", xi)?;
    check_positive("request rate", zeta)?;
    let sq = |a: T, b: T| (a - b) * (a - b);
    let pairs = xi_hat
        .iter()
        .zip(xi)
        .zip(zeta)
        .map(|((&h, &x), &z)| (h, x, z));
    match kind {
        ObjectiveKind::Freshness => Ok(pairs.map(|(h, x, z)| z * sq(h, x) / (h * h.min(x))).sum()),
        ObjectiveKind::Harmonic => {
            let (r, lo) = (context.bandwidth, context.xi_min);
            check_context(&[r, lo])?;
            let scale = (lo + r) * r * r / lo.powi(5);
            Ok(scale * pairs.map(|(h, x, z)| z * sq(h, x)).sum::<T>())
        }
        ObjectiveKind::Delay => {
            let c = context;
            check_context(&[c.bandwidth, c.xi_min, c.xi_max, c.zeta_min])?;
            let sum_sqrt_zeta: T = zeta.iter().map(|z| z.sqrt()).sum();
            let scale = c.xi_max.powi(2) * sum_sqrt_zeta.powi(4)
                / (c.bandwidth * c.zeta_min * c.xi_min.powi(3));
            Ok(scale * pairs.map(|(h, x, _)| sq(h, x)).sum::<T>())
        }
        ObjectiveKind::IntervalFreshness => Err(Error::UnsupportedAnalysis(
            "no sensitivity bound exists for the fixed-interval objective".into(),
        )),
    }
}

fn check_context<T: Scalar>(values: &[T]) -> Result<()> {
    check_positive("bound context entry", values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{evaluate_objective, solve_freshness_allocation};

    fn ctx() -> BoundContext<f64> {
        BoundContext {
            bandwidth: 2.0,
            xi_min: 0.1,
            xi_max: 1.0,
            zeta_min: 0.5,
        }
    }

    #[test]
    fn exact_estimates_give_zero() {
        let xi = [0.2, 0.7, 1.0];
        let zeta = [0.5, 1.0, 2.0];
        for kind in [
            ObjectiveKind::Freshness,
            ObjectiveKind::Harmonic,
            ObjectiveKind::Delay,
        ] {
            assert_eq!(
                suboptimality_bound(kind, &xi, &xi, &zeta, &ctx()).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn harmonic_and_delay_scale_quadratically() {
        let xi = [0.2, 0.7, 1.0];
        let zeta = [0.5, 1.0, 2.0];
        let hat = [0.25, 0.6, 0.9];
        let half: Vec<f64> = xi
            .iter()
            .zip(&hat)
            .map(|(x, h)| x + (h - x) / 2.0)
            .collect();
        for kind in [ObjectiveKind::Harmonic, ObjectiveKind::Delay] {
            let full = suboptimality_bound(kind, &hat, &xi, &zeta, &ctx()).unwrap();
            let quarter = suboptimality_bound(kind, &half, &xi, &zeta, &ctx()).unwrap();
            assert!((full / 4.0 - quarter).abs() <= 1e-12 * full);
        }
    }

    #[test]
    fn single_page_realized_error_is_zero() {
        let sol = solve_freshness_allocation(&[1.0], &[0.5], 1.0).unwrap();
        let est = solve_freshness_allocation(&[1.0], &[0.9], 1.0).unwrap();
        let a = evaluate_objective(ObjectiveKind::Freshness, &sol.rates, &[1.0], &[0.5]).unwrap();
        let b = evaluate_objective(ObjectiveKind::Freshness, &est.rates, &[1.0], &[0.5]).unwrap();
        assert_eq!(a, b);
        assert!(
            suboptimality_bound(ObjectiveKind::Freshness, &[0.9], &[0.5], &[1.0], &ctx()).unwrap()
                > 0.0
        );
    }

    #[test]
    fn interval_objective_has_no_bound() {
        assert!(suboptimality_bound(
            ObjectiveKind::IntervalFreshness,
            &[1.0],
            &[1.0],
            &[1.0],
            &ctx()
        )
        .is_err());
    }
}
