use std::io::Write;

use serde::Serialize;

use super::{Horizon, PageEnsemble, PoissonStream, Policy, PolicyKind};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::scalar::Scalar;

/// Where each page's refresh times come from.
#[derive(Debug, Clone, PartialEq)]
pub enum RefreshSchedule<T> {
    /// Poisson refreshes at the given rates.
    Poisson(Vec<T>),
    /// Refreshes at `start + n * interval`, `n >= 1`.
    Grid(Vec<T>),
    /// Caller-supplied refresh times per page.
    Explicit(Vec<Vec<T>>),
}

impl<T: Scalar> RefreshSchedule<T> {
    fn len(&self) -> usize {
        match self {
            RefreshSchedule::Poisson(v) | RefreshSchedule::Grid(v) => v.len(),
            RefreshSchedule::Explicit(v) => v.len(),
        }
    }
}

impl<T: Scalar> From<&Policy<T>> for RefreshSchedule<T> {
    fn from(policy: &Policy<T>) -> Self {
        match policy.kind() {
            PolicyKind::Rates => RefreshSchedule::Poisson(policy.values().to_vec()),
            PolicyKind::Intervals => RefreshSchedule::Grid(policy.values().to_vec()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    /// Cache state of each page at the start of the horizon; all stale if `None`.
    pub initial_fresh: Option<Vec<bool>>,
    /// When false the request streams are left empty.
    pub simulate_requests: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            initial_fresh: None,
            simulate_requests: true,
        }
    }
}

/// Event streams of one page and the bits derived from them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageTrace<T> {
    pub changes: Vec<T>,
    pub requests: Vec<T>,
    pub refreshes: Vec<T>,
    /// Fresh(i, z) for each request time z.
    pub request_fresh: Vec<bool>,
    /// o_n: whether a change happened in (y_{n-1}, y_n], with y_0 = start.
    pub observations: Vec<bool>,
    pub initially_fresh: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    // Order encodes the tie-break at identical timestamps.
    Change,
    Refresh,
    Request,
}

impl<T: Scalar> PageTrace<T> {
    /// Replays the three streams through the cache state machine.
    ///
    /// A change marks the cached copy stale, a refresh makes it fresh, and a
    /// request reads the current state. Simultaneous events are processed in
    /// the order change, refresh, request.
    pub fn from_events(
        changes: Vec<T>,
        requests: Vec<T>,
        refreshes: Vec<T>,
        start: T,
        initially_fresh: bool,
    ) -> Result<Self> {
        for (name, s) in [
            ("change", &changes),
            ("request", &requests),
            ("refresh", &refreshes),
        ] {
            if s.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::invalid(format!(
                    "{name} times must be strictly increasing"
                )));
            }
            if s.first().is_some_and(|&t| t < start) {
                return Err(Error::invalid(format!(
                    "{name} time precedes the start of the horizon"
                )));
            }
        }

        let mut request_fresh = Vec::with_capacity(requests.len());
        let mut observations = Vec::with_capacity(refreshes.len());
        let (mut ci, mut ri, mut qi) = (0, 0, 0);
        let mut fresh = initially_fresh;
        let mut changed_since_refresh = false;
        loop {
            let next = [
                changes.get(ci).map(|&t| (t, EventKind::Change)),
                refreshes.get(ri).map(|&t| (t, EventKind::Refresh)),
                requests.get(qi).map(|&t| (t, EventKind::Request)),
            ]
            .into_iter()
            .flatten()
            .min_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .expect("finite event times")
                    .then(a.1.cmp(&b.1))
            });
            let Some((_, kind)) = next else { break };
            match kind {
                EventKind::Change => {
                    fresh = false;
                    changed_since_refresh = true;
                    ci += 1;
                }
                EventKind::Refresh => {
                    observations.push(changed_since_refresh);
                    changed_since_refresh = false;
                    fresh = true;
                    ri += 1;
                }
                EventKind::Request => {
                    request_fresh.push(fresh);
                    qi += 1;
                }
            }
        }
        Ok(Self {
            changes,
            requests,
            refreshes,
            request_fresh,
            observations,
            initially_fresh,
        })
    }

    pub fn fresh_requests(&self) -> usize {
        self.request_fresh.iter().filter(|&&f| f).count()
    }

    /// Fresh(t) straight from its definition: the last refresh strictly before
    /// `t` is later than the last change strictly before `t`.
    pub fn fresh_at(&self, t: T) -> bool {
        let last_change = self
            .changes
            .iter()
            .copied()
            .filter(|&x| x < t)
            .fold(None, |_, x| Some(x));
        let last_refresh = self
            .refreshes
            .iter()
            .copied()
            .filter(|&y| y < t)
            .fold(None, |_, y| Some(y));
        match (last_change, last_refresh) {
            (None, None) => self.initially_fresh,
            (Some(_), None) => false,
            (None, Some(_)) => true,
            (Some(x), Some(y)) => x < y,
        }
    }
}

/// Everything simulated over one horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTrace<T> {
    pub pages: Vec<PageTrace<T>>,
    pub start: T,
    pub end: T,
    pub rng_seed: u64,
}

impl<T: Scalar> SimulationTrace<T> {
    pub fn page_count(&self) -> usize {
        self.pages.len()
    }

    /// Recomputes every derived bit from the raw streams and checks ordering
    /// and horizon containment.
    pub fn verify(&self) -> Result<()> {
        for (i, page) in self.pages.iter().enumerate() {
            let all = page
                .changes
                .iter()
                .chain(&page.requests)
                .chain(&page.refreshes);
            if all.clone().any(|&t| t < self.start || t > self.end) {
                return Err(Error::Numerical(format!(
                    "page {i}: event outside the horizon"
                )));
            }
            let rebuilt = PageTrace::from_events(
                page.changes.clone(),
                page.requests.clone(),
                page.refreshes.clone(),
                self.start,
                page.initially_fresh,
            )?;
            if rebuilt.observations != page.observations
                || rebuilt.request_fresh != page.request_fresh
            {
                return Err(Error::Numerical(format!(
                    "page {i}: stored bits disagree with the streams"
                )));
            }
        }
        Ok(())
    }

    /// CSV with columns `page_id,stream,time,bit`; `bit` is the observation
    /// bit on refresh rows and empty otherwise. Rows are time-ordered per page.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["page_id", "stream", "time", "bit"])?;
        for (i, page) in self.pages.iter().enumerate() {
            let mut rows: Vec<(T, EventKind, Option<bool>)> = Vec::new();
            rows.extend(page.changes.iter().map(|&t| (t, EventKind::Change, None)));
            rows.extend(
                page.refreshes
                    .iter()
                    .zip(&page.observations)
                    .map(|(&t, &o)| (t, EventKind::Refresh, Some(o))),
            );
            rows.extend(page.requests.iter().map(|&t| (t, EventKind::Request, None)));
            rows.sort_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .expect("finite times")
                    .then(a.1.cmp(&b.1))
            });
            for (t, kind, bit) in rows {
                let stream = match kind {
                    EventKind::Change => "change",
                    EventKind::Refresh => "refresh",
                    EventKind::Request => "request",
                };
                let bit = bit.map(|b| if b { "1" } else { "0" }).unwrap_or("");
                out.write_record([i.to_string().as_str(), stream, t.to_string().as_str(), bit])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub fn simulate_crawl<T: Scalar>(
    ensemble: &PageEnsemble<T>,
    schedule: &RefreshSchedule<T>,
    horizon: Horizon<T>,
    rng_seed: u64,
) -> Result<SimulationTrace<T>> {
    simulate_crawl_with(
        ensemble,
        schedule,
        horizon,
        rng_seed,
        &SimOptions::default(),
    )
}

/// Simulates change, request and refresh streams of every page.
///
/// Each page draws from its own seeded streams (see [`crate::rng`]), so the
/// change process of page `i` is identical across schedules for a fixed seed.
pub fn simulate_crawl_with<T: Scalar>(
    ensemble: &PageEnsemble<T>,
    schedule: &RefreshSchedule<T>,
    horizon: Horizon<T>,
    rng_seed: u64,
    options: &SimOptions,
) -> Result<SimulationTrace<T>> {
    let m = ensemble.len();
    if schedule.len() != m {
        return Err(Error::invalid(format!(
            "schedule covers {} pages, ensemble has {m}",
            schedule.len()
        )));
    }
    if let Some(init) = &options.initial_fresh {
        if init.len() != m {
            return Err(Error::invalid("initial cache state must cover every page"));
        }
    }
    let Horizon { start, end } = horizon;
    let mut pages = Vec::with_capacity(m);
    for i in 0..m {
        let changes = stream(
            rng_seed,
            i,
            Stream::Change,
            ensemble.change_rates()[i],
            start,
            end,
        )?;
        let requests = if options.simulate_requests {
            stream(
                rng_seed,
                i,
                Stream::Request,
                ensemble.request_rates()[i],
                start,
                end,
            )?
        } else {
            Vec::new()
        };
        let refreshes = match schedule {
            RefreshSchedule::Poisson(rates) => {
                stream(rng_seed, i, Stream::Refresh, rates[i], start, end)?
            }
            RefreshSchedule::Grid(intervals) => grid_times(intervals[i], start, end)?,
            RefreshSchedule::Explicit(times) => {
                let t = times[i].clone();
                if t.iter().any(|&y| y <= start || y > end) {
                    return Err(Error::invalid(format!(
                        "refresh of page {i} outside ({start}, {end}]"
                    )));
                }
                t
            }
        };
        let init = options.initial_fresh.as_ref().is_some_and(|v| v[i]);
        pages.push(PageTrace::from_events(
            changes, requests, refreshes, start, init,
        )?);
    }
    Ok(SimulationTrace {
        pages,
        start,
        end,
        rng_seed,
    })
}

/// Change bits `o_n` of one page with change rate `xi` refreshed after each
/// of `windows` in turn, starting at time 0.
pub fn observe_windows<T: Scalar>(xi: T, windows: &[T], rng_seed: u64) -> Result<Vec<bool>> {
    Ok(observe_counts(xi, windows, rng_seed)?
        .into_iter()
        .map(|c| c > 0)
        .collect())
}

/// Like [`observe_windows`] but returns the number of changes per window.
pub fn observe_counts<T: Scalar>(xi: T, windows: &[T], rng_seed: u64) -> Result<Vec<u64>> {
    if let Some(w) = windows.iter().find(|w| !(**w > T::zero())) {
        return Err(Error::invalid(format!("window {w} must be positive")));
    }
    let end: T = windows.iter().copied().sum();
    let changes = PoissonStream::new(stream_rng(rng_seed, 0, Stream::Change), xi, T::zero(), end)?;
    let mut probe = super::ChangeProbe::new(changes);
    let mut y = T::zero();
    Ok(windows
        .iter()
        .map(|&w| {
            y += w;
            probe.count_until(y)
        })
        .collect())
}

fn stream<T: Scalar>(
    seed: u64,
    page: usize,
    which: Stream,
    rate: T,
    start: T,
    end: T,
) -> Result<Vec<T>> {
    Ok(PoissonStream::new(stream_rng(seed, page, which), rate, start, end)?.collect())
}

/// `start + n * interval` for `n = 1, 2, ...` up to `end` (inclusive, with a
/// relative slack of 1e-9 intervals for rounding).
pub(crate) fn grid_times<T: Scalar>(interval: T, start: T, end: T) -> Result<Vec<T>> {
    if !(interval > T::zero() && interval.is_finite()) {
        return Err(Error::invalid(format!(
            "refresh interval {interval} must be positive"
        )));
    }
    let n = ((end - start) / interval + T::lit(1e-9))
        .floor()
        .to_f64_lossy() as u64;
    Ok((1..=n)
        .map(|k| start + interval * T::lit(k as f64))
        .map(|y| y.min(end))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ensemble() -> PageEnsemble<f64> {
        PageEnsemble::new(vec![0.5, 1.0], vec![1.0, 2.0], 0.1, 1.0).unwrap()
    }

    #[test]
    fn hand_traced_freshness() {
        // One change at 1, one refresh at 2, requests at 0.5, 1.5, 2.5.
        let page =
            PageTrace::from_events(vec![1.0], vec![0.5, 1.5, 2.5], vec![2.0], 0.0, false).unwrap();
        assert_eq!(page.request_fresh, vec![false, false, true]);
        assert_eq!(page.observations, vec![true]);
        assert_eq!(page.fresh_requests(), 1);
    }

    #[test]
    fn simultaneous_events_follow_tie_order() {
        // change, refresh and request all at t = 1
        let page = PageTrace::from_events(vec![1.0], vec![1.0], vec![1.0], 0.0, false).unwrap();
        assert_eq!(page.observations, vec![true]);
        assert_eq!(page.request_fresh, vec![true]);
    }

    #[test]
    fn grid_schedule_hits_exact_multiples() {
        let e = ensemble();
        let h = Horizon::new(0.0, 10.0).unwrap();
        let trace = simulate_crawl(&e, &RefreshSchedule::Grid(vec![2.0, 2.0]), h, 3).unwrap();
        for p in &trace.pages {
            assert_eq!(p.refreshes, vec![2.0, 4.0, 6.0, 8.0, 10.0]);
        }
        trace.verify().unwrap();
    }

    #[test]
    fn huge_change_rate_sets_every_bit() {
        let e = PageEnsemble::new(vec![1e9], vec![1.0], 1.0, 1e9).unwrap();
        let h = Horizon::new(0.0, 1e-3).unwrap();
        let trace = simulate_crawl(&e, &RefreshSchedule::Grid(vec![1e-4]), h, 11).unwrap();
        assert_eq!(trace.pages[0].observations.len(), 10);
        assert!(trace.pages[0].observations.iter().all(|&o| o));
    }

    #[test]
    fn observed_windows_match_trace_bits() {
        let e = PageEnsemble::new(vec![0.7], vec![1.0], 0.7, 0.7).unwrap();
        let h = Horizon::new(0.0, 30.0).unwrap();
        let trace = simulate_crawl(&e, &RefreshSchedule::Grid(vec![1.5]), h, 21).unwrap();
        let bits = observe_windows(0.7, &[1.5; 20], 21).unwrap();
        assert_eq!(bits, trace.pages[0].observations);
        let counts = observe_counts(0.7, &[1.5; 20], 21).unwrap();
        assert_eq!(
            counts.iter().sum::<u64>() as usize,
            trace.pages[0].changes.len()
        );
    }

    #[test]
    fn requests_can_be_switched_off() {
        let e = ensemble();
        let h = Horizon::new(0.0, 50.0).unwrap();
        let opts = SimOptions {
            simulate_requests: false,
            ..Default::default()
        };
        let t = simulate_crawl_with(&e, &RefreshSchedule::Poisson(vec![1.0, 1.0]), h, 1, &opts)
            .unwrap();
        assert!(t.pages.iter().all(|p| p.requests.is_empty()));
    }

    #[test]
    fn explicit_schedule_outside_horizon_is_rejected() {
        let e = ensemble();
        let h = Horizon::new(0.0, 5.0).unwrap();
        let bad = RefreshSchedule::Explicit(vec![vec![1.0], vec![6.0]]);
        assert!(simulate_crawl(&e, &bad, h, 1).is_err());
    }

    #[test]
    fn csv_export_has_header_and_bits_on_refresh_rows() {
        let page = PageTrace::from_events(vec![1.0], vec![0.5], vec![2.0], 0.0, false).unwrap();
        let trace = SimulationTrace {
            pages: vec![page],
            start: 0.0,
            end: 3.0,
            rng_seed: 0,
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "page_id,stream,time,bit\n0,request,0.5,\n0,change,1,\n0,refresh,2,1\n"
        );
    }
}
