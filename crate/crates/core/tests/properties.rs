use proptest::prelude::*;

use freshcrawl::allocation::{
    evaluate_objective, solve_delay_allocation, solve_freshness_allocation,
    solve_harmonic_allocation, ObjectiveKind,
};
use freshcrawl::estimation::{
    group_intervals, mle_estimate, moment_match_estimate, EstimatorConfig, GroupingMode,
    ObservationLog, RateBounds,
};
use freshcrawl::experiments::compare_ui_ur;
use freshcrawl::policies::{
    regret_bound_etc, run_etc, run_phased_eps_greedy, EpsGreedyConfig, EtcConfig, TauChoice,
};
use freshcrawl::process_sim::{
    freshness_probability_exact, observe_windows, simulate_crawl, Horizon, PageEnsemble,
    RefreshSchedule,
};

fn rates(max_len: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.1f64..2.0, 0.1f64..2.0), 1..=max_len)
}

fn split(pairs: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    pairs.iter().copied().unzip()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_is_reproducible_and_bits_match_changes(
        pairs in rates(4),
        seed in any::<u64>(),
        end in 1.0f64..30.0,
    ) {
        let (xi, zeta) = split(&pairs);
        let e = PageEnsemble::with_tight_bounds(xi, zeta).unwrap();
        let schedule = RefreshSchedule::Poisson(vec![1.0; e.len()]);
        let horizon = Horizon::from_zero(end).unwrap();
        let a = simulate_crawl(&e, &schedule, horizon, seed).unwrap();
        let b = simulate_crawl(&e, &schedule, horizon, seed).unwrap();
        prop_assert_eq!(&a.pages, &b.pages);
        a.verify().unwrap();
        for page in &a.pages {
            let mut prev = 0.0;
            for (n, &y) in page.refreshes.iter().enumerate() {
                let changed = page.changes.iter().any(|&c| c > prev && c <= y);
                prop_assert_eq!(page.observations[n], changed);
                prev = y;
            }
        }
    }

    #[test]
    fn observe_windows_is_deterministic(xi in 0.05f64..3.0, seed in any::<u64>(), n in 1usize..50) {
        let windows: Vec<f64> = (0..n).map(|k| 0.1 + k as f64 * 0.07).collect();
        prop_assert_eq!(observe_windows(xi, &windows, seed).unwrap(), observe_windows(xi, &windows, seed).unwrap());
    }

    #[test]
    fn freshness_probability_is_a_semigroup(
        rho in 0.0f64..3.0,
        xi in 0.05f64..3.0,
        fresh: bool,
        s in 0.0f64..5.0,
        t in 0.0f64..5.0,
    ) {
        let direct = freshness_probability_exact(rho, xi, fresh, s + t).unwrap();
        let mid = freshness_probability_exact(rho, xi, fresh, s).unwrap();
        let from_fresh = freshness_probability_exact(rho, xi, true, t).unwrap();
        let from_stale = freshness_probability_exact(rho, xi, false, t).unwrap();
        let composed = mid * from_fresh + (1.0 - mid) * from_stale;
        prop_assert!((direct - composed).abs() <= 1e-12, "{} vs {}", direct, composed);
    }

    #[test]
    fn uniform_intervals_dominate_uniform_rates(
        pairs in rates(8),
        bandwidth in 0.2f64..10.0,
        tau in 0.5f64..100.0,
    ) {
        let (xi, zeta) = split(&pairs);
        let e = PageEnsemble::with_tight_bounds(xi, zeta).unwrap();
        let c = compare_ui_ur(&e, bandwidth, tau, 0, 0).unwrap();
        prop_assert!(c.closed_ui >= c.closed_ur - 1e-12 * c.closed_ur.abs());
    }

    #[test]
    fn moment_matching_decreases_with_unchanged_count(
        widths in prop::collection::vec(0.1f64..5.0, 2..30),
        pick in any::<prop::sample::Index>(),
    ) {
        let n = widths.len();
        let bounds = RateBounds::new(0.01, 20.0).unwrap();
        let cfg = EstimatorConfig::default();
        // Flip bits one at a time from changed to unchanged; the estimate can only fall.
        let mut bits = vec![true; n];
        let start = pick.index(n);
        let mut last = f64::INFINITY;
        for k in 0..n {
            bits[(start + k) % n] = false;
            let est = moment_match_estimate(&ObservationLog::partial(widths.clone(), bits.clone()).unwrap(), bounds, &cfg)
                .unwrap();
            prop_assert!(est.xi_hat <= last + 1e-9);
            last = est.xi_hat;
        }
    }

    #[test]
    fn equal_windows_make_mm_and_mle_agree(
        w in 0.05f64..5.0,
        bits in prop::collection::vec(any::<bool>(), 1..200),
    ) {
        let log = ObservationLog::partial(vec![w; bits.len()], bits).unwrap();
        let bounds = RateBounds::new(0.01, 10.0).unwrap();
        let cfg = EstimatorConfig::default();
        let mm = moment_match_estimate(&log, bounds, &cfg).unwrap();
        let mle = mle_estimate(&log, bounds, &cfg).unwrap();
        prop_assert!((mm.xi_hat - mle.xi_hat).abs() <= 2e-10);
    }

    #[test]
    fn small_window_groups_have_length_between_one_and_two(windows in prop::collection::vec(0.01f64..0.99, 1..200)) {
        for g in group_intervals(&windows, GroupingMode::SmallWindows) {
            let total: f64 = g.iter().map(|&i| windows[i]).sum();
            prop_assert!(total > 1.0 && total < 2.0, "group length {}", total);
        }
    }

    #[test]
    fn large_window_groups_stay_in_range(
        windows in prop::collection::vec(1.0f64..10.0, 1..200),
        xi in 0.05f64..2.0,
    ) {
        let (lo, hi) = ((-1.0f64).exp(), 2.0 * (-1.0f64).exp());
        let groups = group_intervals(&windows, GroupingMode::LargeWindows { xi });
        let mut seen = std::collections::HashSet::new();
        for g in groups {
            let s: f64 = g.iter().map(|&i| (-xi * windows[i]).exp()).sum();
            prop_assert!(s >= lo && s < hi, "group sum {}", s);
            for i in g {
                prop_assert!(windows[i] >= 1.0);
                prop_assert!(seen.insert(i), "window {} reused", i);
            }
        }
    }

    #[test]
    fn allocations_spend_the_bandwidth(pairs in rates(10), bandwidth in 0.1f64..20.0) {
        let (xi, zeta) = split(&pairs);
        for res in [
            solve_freshness_allocation(&zeta, &xi, bandwidth).unwrap(),
            solve_harmonic_allocation(&zeta, &xi, bandwidth).unwrap(),
            solve_delay_allocation(&zeta, &xi, bandwidth).unwrap(),
        ] {
            let total: f64 = res.rates.iter().sum();
            prop_assert!((total - bandwidth).abs() <= 1e-9 * bandwidth);
            prop_assert!(res.rates.iter().all(|&r| r >= 0.0));
        }
    }

    #[test]
    fn freshness_allocation_is_locally_optimal(
        pairs in rates(6),
        bandwidth in 0.1f64..10.0,
        from in any::<prop::sample::Index>(),
        to in any::<prop::sample::Index>(),
        frac in 0.001f64..0.1,
    ) {
        let (xi, zeta) = split(&pairs);
        let res = solve_freshness_allocation(&zeta, &xi, bandwidth).unwrap();
        let (i, j) = (from.index(xi.len()), to.index(xi.len()));
        prop_assume!(i != j);
        let shift = frac * res.rates[i];
        prop_assume!(shift > 0.0);
        let mut moved = res.rates.clone();
        moved[i] -= shift;
        moved[j] += shift;
        let value = evaluate_objective(ObjectiveKind::Freshness, &moved, &zeta, &xi).unwrap().finite().unwrap();
        prop_assert!(value <= res.objective_value + 1e-12);
    }

    #[test]
    fn freshness_rate_grows_with_request_rate(
        pairs in rates(6),
        bandwidth in 0.1f64..10.0,
        which in any::<prop::sample::Index>(),
        factor in 1.0f64..3.0,
    ) {
        let (xi, mut zeta) = split(&pairs);
        let j = which.index(xi.len());
        let before = solve_freshness_allocation(&zeta, &xi, bandwidth).unwrap().rates[j];
        zeta[j] *= factor;
        let after = solve_freshness_allocation(&zeta, &xi, bandwidth).unwrap().rates[j];
        prop_assert!(after >= before - 1e-9 * bandwidth);
    }

    #[test]
    fn delay_allocation_scales_with_bandwidth(pairs in rates(8), bandwidth in 0.1f64..10.0, c in 0.1f64..10.0) {
        let (xi, zeta) = split(&pairs);
        let base = solve_delay_allocation(&zeta, &xi, bandwidth).unwrap();
        let scaled = solve_delay_allocation(&zeta, &xi, c * bandwidth).unwrap();
        for (a, b) in base.rates.iter().zip(&scaled.rates) {
            prop_assert!((c * a - b).abs() <= 1e-9 * b.max(1.0));
        }
    }

    #[test]
    fn bound_is_smallest_at_its_minimizer(
        zeta in prop::collection::vec(0.1f64..2.0, 1..20),
        bandwidth in 1.0f64..50.0,
        horizon in 10.0f64..1e5,
        frac in 0.001f64..0.999,
    ) {
        let m = zeta.len();
        let e = PageEnsemble::new(vec![0.5; m], zeta, 0.1, 1.0).unwrap();
        let config = EtcConfig::for_ensemble(&e, bandwidth, horizon, 0.1).unwrap();
        let bound = regret_bound_etc(&config).unwrap();
        let tau = frac * horizon;
        prop_assert!(bound.at(tau) >= bound.envelope - 1e-9 * bound.envelope.abs());
        prop_assert!(bound.envelope <= bound.envelope_loose);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn etc_regret_decomposes_and_commit_regret_is_bounded(
        pairs in rates(6),
        seed in any::<u64>(),
        rounds in 1u32..40,
    ) {
        let (xi, zeta) = split(&pairs);
        let e = PageEnsemble::new(xi, zeta, 0.1, 2.0).unwrap();
        let bandwidth = 2.0;
        let horizon = 500.0;
        let tau = rounds as f64 * e.len() as f64 / bandwidth;
        let config = EtcConfig::for_ensemble(&e, bandwidth, horizon, 0.1).unwrap().with_tau(TauChoice::Explicit(tau));
        let a = run_etc(&config, &e, seed).unwrap();
        let b = run_etc(&config, &e, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!((a.regret - a.exploration_regret - a.commit_regret).abs() <= 1e-9);
        prop_assert!(a.commit_regret <= a.commit_regret_bound + 1e-9);
    }

    #[test]
    fn eps_greedy_rates_stay_mixed(
        pairs in rates(6),
        seed in any::<u64>(),
        eps in 0.01f64..=1.0,
        phases in 1usize..5,
    ) {
        let (xi, zeta) = split(&pairs);
        let e = PageEnsemble::new(xi, zeta, 0.1, 2.0).unwrap();
        let bandwidth = 3.0;
        let config = EtcConfig::for_ensemble(&e, bandwidth, 400.0, 0.1).unwrap();
        let records = run_phased_eps_greedy(
            &config,
            &e,
            &EpsGreedyConfig { eps, phases, burn_in_tolerance: None },
            seed,
        )
        .unwrap();
        let floor = eps * bandwidth / e.len() as f64;
        for r in &records {
            let total: f64 = r.rates.iter().sum();
            prop_assert!((total - bandwidth).abs() <= 1e-9 * bandwidth);
            prop_assert!(r.rates.iter().all(|&x| x >= floor - 1e-12));
        }
    }
}
