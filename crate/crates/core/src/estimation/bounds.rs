use super::WindowSummary;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Concentration width for moment matching on a partial log:
/// `((1/N) sum(w e^{-xi_max w}))^{-1} * sqrt(ln(2/delta) / (2N))`.
pub fn confidence_width_partial<T: Scalar>(windows: &[T], xi_max: T, delta: T) -> Result<T> {
    if windows.is_empty() {
        return Err(Error::invalid("no windows"));
    }
    check_delta(delta)?;
    if let Some(w) = windows.iter().find(|w| !(**w > T::zero())) {
        return Err(Error::invalid(format!("window {w} must be positive")));
    }
    let n = T::from_count(windows.len());
    let mean: T = windows.iter().map(|&w| w * (-xi_max * w).exp()).sum::<T>() / n;
    Ok(hoeffding(n, delta) / mean)
}

pub(crate) fn width_from_summary<T: Scalar>(
    summary: &WindowSummary<T>,
    xi_max: T,
    delta: T,
) -> Result<T> {
    check_delta(delta)?;
    let n = T::lit(summary.total() as f64);
    let mean: T = summary
        .buckets()
        .iter()
        .map(|b| T::lit(b.total as f64) * b.width * (-xi_max * b.width).exp())
        .sum::<T>()
        / n;
    Ok(hoeffding(n, delta) / mean)
}

/// Per-page width after exploring for `tau` with the uniform-interval
/// policy, union-bounded over `m` pages:
/// `e^{xi_max m/R} sqrt(R ln(2m/delta) / (2 tau m))`.
///
/// `tau` is rounded up to a multiple of `m/R`.
pub fn confidence_width_ui<T: Scalar>(
    m: usize,
    bandwidth: T,
    tau: T,
    xi_max: T,
    delta: T,
) -> Result<T> {
    check_delta(delta)?;
    if m == 0 || !(bandwidth > T::zero()) || !(tau > T::zero()) {
        return Err(Error::invalid(
            "need m >= 1, positive bandwidth and positive tau",
        ));
    }
    let mf = T::from_count(m);
    let step = mf / bandwidth;
    let tau = (tau / step - T::lit(1e-9)).ceil().max(T::one()) * step;
    let log_term = (T::lit(2.0) * mf / delta).ln();
    Ok((xi_max * step).exp() * (bandwidth * log_term / (T::lit(2.0) * tau * mf)).sqrt())
}

/// `psi(t) = ((1+t) ln(1+t) - t) / (t^2/2)`, with `psi(0) = 1`.
pub fn psi<T: Scalar>(t: T) -> T {
    if t.abs() < T::lit(1e-6) {
        T::one() - t / T::lit(3.0) + t * t / T::lit(6.0)
    } else {
        ((T::one() + t) * t.ln_1p() - t) / (t * t / T::lit(2.0))
    }
}

/// Width for the full-observation estimator after observing for `elapsed`:
/// `sqrt(2 xi_max ln(2/delta) / (elapsed psi(xi_max/xi_min - 1)))`.
pub fn confidence_width_full<T: Scalar>(elapsed: T, xi_min: T, xi_max: T, delta: T) -> Result<T> {
    check_delta(delta)?;
    if !(elapsed > T::zero()) {
        return Err(Error::invalid(format!(
            "elapsed time {elapsed} must be positive"
        )));
    }
    if !(xi_min > T::zero() && xi_min <= xi_max) {
        return Err(Error::invalid(format!(
            "bad rate bounds [{xi_min}, {xi_max}]"
        )));
    }
    let m = psi(xi_max / xi_min - T::one());
    Ok((T::lit(2.0) * xi_max * (T::lit(2.0) / delta).ln() / (elapsed * m)).sqrt())
}

fn hoeffding<T: Scalar>(n: T, delta: T) -> T {
    ((T::lit(2.0) / delta).ln() / (T::lit(2.0) * n)).sqrt()
}

fn check_delta<T: Scalar>(delta: T) -> Result<()> {
    if delta > T::zero() && delta < T::one() {
        Ok(())
    } else {
        Err(Error::invalid(format!("delta {delta} must lie in (0, 1)")))
    }
}
