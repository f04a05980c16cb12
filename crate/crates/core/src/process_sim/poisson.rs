use std::iter::Peekable;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lazily generated homogeneous Poisson process on `(start, end]`.
///
/// Inter-arrival times are standard exponentials (ziggurat, drawn in `f64`)
/// scaled by `1/rate`. A zero rate yields no events.
#[derive(Debug, Clone)]
pub struct PoissonStream<T, R> {
    rng: R,
    rate: T,
    current: T,
    end: T,
    done: bool,
}

impl<T: Scalar, R: Rng> PoissonStream<T, R> {
    pub fn new(rng: R, rate: T, start: T, end: T) -> Result<Self> {
        if !(rate >= T::zero() && rate.is_finite()) {
            return Err(Error::invalid(format!(
                "Poisson rate {rate} must be finite and non-negative"
            )));
        }
        if !(end >= start) {
            return Err(Error::invalid(format!(
                "stream end {end} precedes start {start}"
            )));
        }
        Ok(Self {
            rng,
            rate,
            current: start,
            end,
            done: rate == T::zero(),
        })
    }

    /// Hands the generator back, e.g. to continue the same stream at a new rate.
    pub fn into_rng(self) -> R {
        self.rng
    }
}

impl<T: Scalar, R: Rng> Iterator for PoissonStream<T, R> {
    type Item = T;

    fn next(&mut self) -> Option<T> {
        if self.done {
            return None;
        }
        let e: f64 = self.rng.sample(Exp1);
        let gap = T::lit(e) / self.rate;
        let t = self.current + gap;
        if t > self.end {
            self.done = true;
            return None;
        }
        self.current = t;
        Some(t)
    }
}

/// Event times of a rate-`rate` Poisson process on `(0, horizon]`.
pub fn sample_poisson_events<T: Scalar>(rate: T, horizon: T, rng_seed: u64) -> Result<Vec<T>> {
    if !(horizon > T::zero()) {
        return Err(Error::invalid(format!(
            "horizon {horizon} must be positive"
        )));
    }
    let stream = PoissonStream::new(
        ChaCha8Rng::seed_from_u64(rng_seed),
        rate,
        T::zero(),
        horizon,
    )?;
    Ok(stream.collect())
}

/// `P(Fresh at t0 + delta | Fresh at t0 = s)` under refresh rate `rho` and change rate `xi`.
///
/// `rho/(rho+xi) + (s - rho/(rho+xi)) * exp(-(rho+xi) * delta)`.
pub fn freshness_probability_exact<T: Scalar>(
    rho: T,
    xi: T,
    initially_fresh: bool,
    delta: T,
) -> Result<T> {
    if !(xi > T::zero()) {
        return Err(Error::invalid(format!("change rate {xi} must be positive")));
    }
    if !(rho >= T::zero()) {
        return Err(Error::invalid(format!(
            "refresh rate {rho} must be non-negative"
        )));
    }
    if !(delta >= T::zero()) {
        return Err(Error::invalid(format!(
            "elapsed time {delta} must be non-negative"
        )));
    }
    let stationary = rho / (rho + xi);
    let s = if initially_fresh { T::one() } else { T::zero() };
    let p = stationary + (s - stationary) * (-(rho + xi) * delta).exp();
    Ok(p.max(T::zero()).min(T::one()))
}

/// Answers "did the page change in `(previous probe, t]`?" for increasing `t`
/// while consuming a change-time iterator lazily.
#[derive(Debug)]
pub struct ChangeProbe<T, I: Iterator<Item = T>> {
    changes: Peekable<I>,
    last: Option<T>,
}

impl<T: Scalar, I: Iterator<Item = T>> ChangeProbe<T, I> {
    pub fn new(changes: I) -> Self {
        Self {
            changes: changes.peekable(),
            last: None,
        }
    }

    /// Number of changes in `(previous probe, t]`. Probes must not go back in time.
    pub fn count_until(&mut self, t: T) -> u64 {
        debug_assert!(
            self.last.is_none_or(|l| t >= l),
            "probe times must be non-decreasing"
        );
        let mut n = 0;
        while let Some(&x) = self.changes.peek() {
            if x > t {
                break;
            }
            self.changes.next();
            n += 1;
        }
        self.last = Some(t);
        n
    }

    pub fn changed_until(&mut self, t: T) -> bool {
        self.count_until(t) > 0
    }

    /// Number of windows `(start + (k-1) w, start + k w]`, `k = 1..=n`, that
    /// contain at least one change. Costs O(changes), not O(windows).
    pub fn changed_grid_windows(&mut self, start: T, width: T, n: u64) -> u64 {
        let end = start + width * T::lit(n as f64);
        let mut changed = 0;
        let mut last_window: Option<u64> = None;
        while let Some(&x) = self.changes.peek() {
            if x > end {
                break;
            }
            self.changes.next();
            if x <= start {
                continue;
            }
            let k = ((x - start) / width).ceil().to_f64_lossy().max(1.0) as u64;
            let k = k.min(n);
            if last_window != Some(k) {
                changed += 1;
                last_window = Some(k);
            }
        }
        self.last = Some(end);
        changed
    }
}
