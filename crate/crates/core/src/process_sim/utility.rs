use super::{PageEnsemble, SimulationTrace};
use crate::error::{Error, Result};
use crate::scalar::{one_minus_exp_over, Scalar};

/// Fresh-served requests divided by the number of pages.
pub fn empirical_utility<T: Scalar>(trace: &SimulationTrace<T>) -> T {
    if trace.pages.is_empty() {
        return T::zero();
    }
    let fresh: usize = trace.pages.iter().map(|p| p.fresh_requests()).sum();
    T::from_count(fresh) / T::from_count(trace.pages.len())
}

/// Like [`empirical_utility`] but only counts requests with time in `(from, to]`.
pub fn empirical_utility_between<T: Scalar>(trace: &SimulationTrace<T>, from: T, to: T) -> T {
    if trace.pages.is_empty() {
        return T::zero();
    }
    let fresh: usize = trace
        .pages
        .iter()
        .map(|p| {
            p.requests
                .iter()
                .zip(&p.request_fresh)
                .filter(|(&z, &f)| f && z > from && z <= to)
                .count()
        })
        .sum();
    T::from_count(fresh) / T::from_count(trace.pages.len())
}

/// Stationary expected utility of Poisson refreshing at rates `rho`:
/// `duration/m * sum(zeta * rho / (rho + xi))`.
pub fn expected_utility_rate_policy<T: Scalar>(
    rho: &[T],
    ensemble: &PageEnsemble<T>,
    duration: T,
) -> Result<T> {
    check(rho.len(), ensemble, duration)?;
    if let Some(bad) = rho.iter().find(|r| !(**r >= T::zero())) {
        return Err(Error::invalid(format!(
            "refresh rate {bad} must be non-negative"
        )));
    }
    let sum: T = rho
        .iter()
        .zip(ensemble.change_rates())
        .zip(ensemble.request_rates())
        .map(|((&r, &xi), &zeta)| {
            if r == T::zero() {
                T::zero()
            } else {
                zeta * r / (r + xi)
            }
        })
        .sum();
    Ok(duration / T::from_count(ensemble.len()) * sum)
}

/// Expected utility of refreshing page `i` every `kappa[i]`:
/// `duration/m * sum(zeta * (1 - e^{-xi kappa}) / (xi kappa))`.
///
/// Exact when `duration` is a whole number of every interval and the grid
/// starts with a refresh.
pub fn expected_utility_interval_policy<T: Scalar>(
    kappa: &[T],
    ensemble: &PageEnsemble<T>,
    duration: T,
) -> Result<T> {
    check(kappa.len(), ensemble, duration)?;
    if let Some(bad) = kappa.iter().find(|k| !(**k > T::zero() && k.is_finite())) {
        return Err(Error::invalid(format!(
            "refresh interval {bad} must be positive"
        )));
    }
    let sum: T = kappa
        .iter()
        .zip(ensemble.change_rates())
        .zip(ensemble.request_rates())
        .map(|((&k, &xi), &zeta)| zeta * one_minus_exp_over(xi * k))
        .sum();
    Ok(duration / T::from_count(ensemble.len()) * sum)
}

fn check<T: Scalar>(n: usize, ensemble: &PageEnsemble<T>, duration: T) -> Result<()> {
    if n != ensemble.len() {
        return Err(Error::invalid(format!(
            "policy has {n} pages, ensemble has {}",
            ensemble.len()
        )));
    }
    if !(duration > T::zero() && duration.is_finite()) {
        return Err(Error::invalid(format!(
            "duration {duration} must be positive"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process_sim::PageTrace;
    use approx::assert_abs_diff_eq;

    fn single(xi: f64, zeta: f64) -> PageEnsemble<f64> {
        PageEnsemble::new(vec![xi], vec![zeta], xi, xi).unwrap()
    }

    #[test]
    fn rate_policy_examples() {
        let e = single(1.0, 1.0);
        assert_eq!(expected_utility_rate_policy(&[0.0], &e, 10.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            expected_utility_rate_policy(&[1.0], &e, 10.0).unwrap(),
            5.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn interval_policy_examples() {
        let e = single(1.0, 1.0);
        let u = expected_utility_interval_policy(&[1.0], &e, 10.0).unwrap();
        assert_abs_diff_eq!(u, 10.0 * (1.0 - (-1.0f64).exp()), epsilon = 1e-12);
        assert!(u >= expected_utility_rate_policy(&[1.0], &e, 10.0).unwrap());

        let tiny = single(1e-12, 2.0);
        let u = expected_utility_interval_policy(&[1.0], &tiny, 10.0).unwrap();
        assert_abs_diff_eq!(u, 20.0, epsilon = 1e-9);
    }

    #[test]
    fn hand_traced_utility_and_symmetry() {
        let page =
            PageTrace::from_events(vec![1.0], vec![0.5, 1.5, 2.5], vec![2.0], 0.0, false).unwrap();
        let one = SimulationTrace {
            pages: vec![page.clone()],
            start: 0.0,
            end: 3.0,
            rng_seed: 0,
        };
        assert_eq!(empirical_utility(&one), 1.0);
        let two = SimulationTrace {
            pages: vec![page.clone(), page],
            start: 0.0,
            end: 3.0,
            rng_seed: 0,
        };
        assert_eq!(empirical_utility(&two), 1.0);
        assert_eq!(empirical_utility_between(&one, 0.0, 2.0), 0.0);
        assert_eq!(empirical_utility_between(&one, 2.0, 3.0), 1.0);
    }

    #[test]
    fn no_refreshes_means_zero_utility() {
        let page = PageTrace::from_events(vec![], vec![0.5, 1.5], vec![], 0.0, false).unwrap();
        let t = SimulationTrace {
            pages: vec![page],
            start: 0.0,
            end: 3.0,
            rng_seed: 0,
        };
        assert_eq!(empirical_utility(&t), 0.0);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let e = single(1.0, 1.0);
        assert!(expected_utility_rate_policy(&[1.0, 1.0], &e, 1.0).is_err());
        assert!(expected_utility_interval_policy(&[1.0], &e, 0.0).is_err());
    }
}
