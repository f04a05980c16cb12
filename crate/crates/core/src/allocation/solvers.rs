use super::{check_lengths, check_positive, evaluate_objective, AllocationResult, ObjectiveKind};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn validate<T: Scalar>(zeta: &[T], xi: &[T], bandwidth: T) -> Result<()> {
    check_lengths(zeta.len(), zeta, xi)?;
    check_positive("request rate", zeta)?;
    check_positive("change rate", xi)?;
    if !(bandwidth > T::zero() && bandwidth.is_finite()) {
        return Err(Error::invalid(format!(
            "bandwidth {bandwidth} must be positive"
        )));
    }
    Ok(())
}

/// Dispatches to the solver for `kind`.
pub fn solve_allocation<T: Scalar>(
    kind: ObjectiveKind,
    zeta: &[T],
    xi: &[T],
    bandwidth: T,
) -> Result<AllocationResult<T>> {
    match kind {
        ObjectiveKind::Freshness => solve_freshness_allocation(zeta, xi, bandwidth),
        ObjectiveKind::Harmonic => solve_harmonic_allocation(zeta, xi, bandwidth),
        ObjectiveKind::Delay => solve_delay_allocation(zeta, xi, bandwidth),
        ObjectiveKind::IntervalFreshness => Err(Error::UnsupportedAnalysis(
            "no allocation solver for the fixed-interval objective".into(),
        )),
    }
}

/// Maximizes `sum zeta rho/(rho+xi)` subject to `sum rho = R`, `rho >= 0`.
///
/// Stationarity gives `rho_i = max(0, sqrt(zeta_i xi_i / lambda) - xi_i)`;
/// page `i` is active iff `zeta_i/xi_i > lambda`. Pages are sorted by that
/// threshold and the active prefix is grown while its closed-form `lambda`
/// stays below the next threshold.
pub fn solve_freshness_allocation<T: Scalar>(
    zeta: &[T],
    xi: &[T],
    bandwidth: T,
) -> Result<AllocationResult<T>> {
    validate(zeta, xi, bandwidth)?;
    let m = zeta.len();
    let mut order: Vec<usize> = (0..m).collect();
    let threshold = |i: usize| zeta[i] / xi[i];
    order.sort_by(|&a, &b| {
        threshold(b)
            .partial_cmp(&threshold(a))
            .expect("finite thresholds")
    });

    let (mut sum_root, mut sum_xi) = (T::zero(), T::zero());
    let mut inv_sqrt_lambda = T::zero();
    for &i in &order {
        let root = (zeta[i] * xi[i]).sqrt();
        let candidate = (bandwidth + sum_xi + xi[i]) / (sum_root + root);
        let lambda = (T::one() / candidate).powi(2);
        if inv_sqrt_lambda > T::zero() && !(threshold(i) > lambda) {
            break;
        }
        sum_root += root;
        sum_xi += xi[i];
        inv_sqrt_lambda = candidate;
    }

    let mut rates: Vec<T> = (0..m)
        .map(|i| ((zeta[i] * xi[i]).sqrt() * inv_sqrt_lambda - xi[i]).max(T::zero()))
        .collect();
    normalize(&mut rates, bandwidth);
    let lambda = (T::one() / inv_sqrt_lambda).powi(2);
    let kkt_residual = kkt(&rates, bandwidth, lambda, |i, r| {
        zeta[i] * xi[i] / (r + xi[i]).powi(2)
    });
    let objective_value = evaluate_objective(ObjectiveKind::Freshness, &rates, zeta, xi)?
        .expect_finite("freshness")?;
    Ok(AllocationResult {
        rates,
        objective_value,
        kkt_residual,
        multiplier: lambda,
    })
}

/// Maximizes `sum zeta ln(rho/(rho+xi))` subject to `sum rho = R`.
///
/// For a multiplier `lambda`, each page solves `rho (rho + xi) = zeta xi / lambda`;
/// `lambda` is bisected (geometrically) until the rates use the bandwidth.
pub fn solve_harmonic_allocation<T: Scalar>(
    zeta: &[T],
    xi: &[T],
    bandwidth: T,
) -> Result<AllocationResult<T>> {
    validate(zeta, xi, bandwidth)?;
    let m = zeta.len();
    // stable root of rho^2 + xi rho - c = 0
    let rate = |i: usize, lambda: T| {
        let c = zeta[i] * xi[i] / lambda;
        T::lit(2.0) * c / (xi[i] + (xi[i] * xi[i] + T::lit(4.0) * c).sqrt())
    };
    let total = |lambda: T| (0..m).map(|i| rate(i, lambda)).sum::<T>();

    // rho^2 <= c and (rho + xi)^2 >= c bound lambda on both sides
    let sum_root: T = (0..m).map(|i| (zeta[i] * xi[i]).sqrt()).sum();
    let sum_xi: T = xi.iter().copied().sum();
    let mut lo = (sum_root / (bandwidth + sum_xi)).powi(2);
    let mut hi = (sum_root / bandwidth).powi(2);
    let tol = bandwidth * T::lit(1e-12);
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let s = total(mid);
        if (s - bandwidth).abs() <= tol {
            lo = mid;
            hi = mid;
            break;
        }
        // total is decreasing in lambda
        if s > bandwidth {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = (lo * hi).sqrt();
    let mut rates: Vec<T> = (0..m).map(|i| rate(i, lambda)).collect();
    normalize(&mut rates, bandwidth);
    let kkt_residual = kkt(&rates, bandwidth, lambda, |i, r| {
        zeta[i] * xi[i] / (r * (r + xi[i]))
    });
    let objective_value =
        evaluate_objective(ObjectiveKind::Harmonic, &rates, zeta, xi)?.expect_finite("harmonic")?;
    Ok(AllocationResult {
        rates,
        objective_value,
        kkt_residual,
        multiplier: lambda,
    })
}

/// Maximizes `-sum zeta xi / rho` subject to `sum rho = R`; closed form
/// `rho_i = R sqrt(zeta_i xi_i) / sum_j sqrt(zeta_j xi_j)`.
pub fn solve_delay_allocation<T: Scalar>(
    zeta: &[T],
    xi: &[T],
    bandwidth: T,
) -> Result<AllocationResult<T>> {
    validate(zeta, xi, bandwidth)?;
    let roots: Vec<T> = zeta.iter().zip(xi).map(|(&z, &x)| (z * x).sqrt()).collect();
    let sum_root: T = roots.iter().copied().sum();
    let rates: Vec<T> = roots.iter().map(|&r| bandwidth * r / sum_root).collect();
    let lambda = (sum_root / bandwidth).powi(2);
    let kkt_residual = kkt(&rates, bandwidth, lambda, |i, r| zeta[i] * xi[i] / (r * r));
    Ok(AllocationResult {
        rates,
        objective_value: -sum_root * sum_root / bandwidth,
        kkt_residual,
        multiplier: lambda,
    })
}

/// Rescales non-negative rates to sum to `bandwidth` exactly (up to rounding).
fn normalize<T: Scalar>(rates: &mut [T], bandwidth: T) {
    let s: T = rates.iter().copied().sum();
    if s > T::zero() {
        let k = bandwidth / s;
        rates.iter_mut().for_each(|r| *r *= k);
    }
}

/// Largest relative violation among: active gradients equal to `lambda`,
/// inactive gradients at most `lambda`, and the bandwidth constraint.
fn kkt<T: Scalar>(rates: &[T], bandwidth: T, lambda: T, gradient: impl Fn(usize, T) -> T) -> T {
    let budget = (rates.iter().copied().sum::<T>() - bandwidth).abs() / bandwidth;
    rates
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let g = gradient(i, r);
            if r > T::zero() {
                (g - lambda).abs() / lambda
            } else {
                ((g - lambda) / lambda).max(T::zero())
            }
        })
        .fold(budget, T::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn freshness(rho: &[f64], zeta: &[f64], xi: &[f64]) -> f64 {
        rho.iter()
            .zip(zeta)
            .zip(xi)
            .map(|((r, z), x)| z * r / (r + x))
            .sum()
    }

    #[test]
    fn freshness_examples() {
        let one = solve_freshness_allocation(&[2.0], &[0.3], 1.7).unwrap();
        assert_eq!(one.rates, vec![1.7]);

        let sym = solve_freshness_allocation(&[1.0, 1.0], &[1.0, 1.0], 2.0).unwrap();
        assert_abs_diff_eq!(sym.rates[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sym.rates[1], 1.0, epsilon = 1e-12);

        let abandon = solve_freshness_allocation(&[1.0, 1.0], &[1.0, 5.0], 1.0).unwrap();
        assert_eq!(abandon.rates, vec![1.0, 0.0]);
        assert!(abandon.kkt_residual <= 1e-8);
    }

    #[test]
    fn freshness_matches_fine_grid_for_two_pages() {
        let cases = [
            ([1.0, 1.0], [1.0, 5.0], 1.0),
            ([0.4, 1.9], [0.2, 1.3], 2.5),
            ([1.5, 0.2], [1.9, 0.1], 0.7),
        ];
        for (zeta, xi, r) in cases {
            let sol = solve_freshness_allocation(&zeta, &xi, r).unwrap();
            let mut best = f64::NEG_INFINITY;
            for k in 0..=100_000 {
                let a = r * k as f64 / 100_000.0;
                best = best.max(freshness(&[a, r - a], &zeta, &xi));
            }
            assert!(
                sol.objective_value >= best - 1e-9,
                "{} < {best}",
                sol.objective_value
            );
            assert!(sol.objective_value - best < 1e-6);
        }
    }

    #[test]
    fn harmonic_examples() {
        let sym = solve_harmonic_allocation(&[1.0, 1.0], &[1.0, 1.0], 2.0).unwrap();
        assert_abs_diff_eq!(sym.rates[0], 1.0, epsilon = 1e-10);
        let sol = solve_harmonic_allocation(&[1.0, 1.0], &[1.0, 3.0], 2.0).unwrap();
        assert_abs_diff_eq!(sol.rates[0], (45f64.sqrt() - 5.0) / 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            sol.rates[1],
            2.0 - (45f64.sqrt() - 5.0) / 2.0,
            epsilon = 1e-9
        );
        assert!(sol.kkt_residual <= 1e-8);
        let skewed =
            solve_harmonic_allocation(&[100.0, 1e-3, 1.0], &[0.1, 50.0, 1.0], 0.5).unwrap();
        assert!(skewed.rates.iter().all(|&r| r > 0.0));
    }

    #[test]
    fn delay_examples() {
        let sol = solve_delay_allocation(&[1.0, 1.0], &[1.0, 4.0], 3.0).unwrap();
        assert_abs_diff_eq!(sol.rates[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.rates[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.objective_value, -3.0, epsilon = 1e-12);
        let sym = solve_delay_allocation::<f64>(&[2.0, 1.0, 4.0], &[1.0, 2.0, 0.5], 6.0).unwrap();
        assert!(sym.rates.iter().all(|&r| (r - 2.0).abs() < 1e-12));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(solve_freshness_allocation(&[1.0], &[0.0], 1.0).is_err());
        assert!(solve_harmonic_allocation(&[-1.0], &[1.0], 1.0).is_err());
        assert!(solve_delay_allocation(&[1.0], &[1.0], 0.0).is_err());
        assert!(solve_allocation(ObjectiveKind::IntervalFreshness, &[1.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn single_precision_solves() {
        let sol = solve_freshness_allocation(&[1.0f32, 2.0], &[0.5, 0.5], 1.0).unwrap();
        let s: f32 = sol.rates.iter().sum();
        assert!((s - 1.0).abs() < 1e-6);
    }
}
