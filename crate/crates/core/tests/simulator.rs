use std::f64::consts::PI;

use tierlink::analytic::OwnTierExponent;
use tierlink::config::case_study_tiers;
use tierlink::geometry::{feasible, max_dome_angle, ConstraintSet, Network, TierSpec};
use tierlink::link_metrics::{multiflow_total, FlowSpec};
use tierlink::markov::{analyze, PriorityStrategy};
use tierlink::simulator::{
    estimate, estimate_multiflow, exhaustive_search, run_route, trial_rng, Outcome, Router, SimulationEstimate,
};
use tierlink::Error;

fn case_study() -> (Network, ConstraintSet) {
    (Network::new(case_study_tiers()).unwrap(), ConstraintSet::default())
}

fn s321() -> PriorityStrategy {
    "3,2,1".parse().unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn estimate_is_independent_of_thread_count() {
    let (net, c) = case_study();
    let runs: Vec<SimulationEstimate> =
        [1, 2, 7].iter().map(|&t| in_pool(t, || estimate(&net, &c, &s321(), 3000, 42))).collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    assert_eq!(runs[0].mean_forward_advance.to_bits(), runs[2].mean_forward_advance.to_bits());
}

#[test]
fn seeds_select_reproducible_streams() {
    let (net, c) = case_study();
    assert_eq!(estimate(&net, &c, &s321(), 500, 9), estimate(&net, &c, &s321(), 500, 9));
    let a = Router::with_strategy(&net, &c, &s321()).realize(&mut trial_rng(1, 0));
    let b = Router::with_strategy(&net, &c, &s321()).realize(&mut trial_rng(2, 0));
    let c2 = Router::with_strategy(&net, &c, &s321()).realize(&mut trial_rng(1, 1));
    assert_ne!(a, b);
    assert_ne!(a, c2);
}

#[test]
fn one_trial_is_degenerate() {
    let (net, c) = case_study();
    for seed in 0..5 {
        let e = estimate(&net, &c, &s321(), 1, seed);
        assert!(e.interruption_probability == 0.0 || e.interruption_probability == 1.0);
        assert_eq!(e.standard_error, 0.0);
        assert_eq!(e.iterations, 1);
    }
}

#[test]
fn gateways_alone_cannot_cross_the_globe() {
    let net = Network::new(vec![TierSpec::new(0.0, 500), TierSpec::new(800.0, 0), TierSpec::new(1200.0, 0)]).unwrap();
    let c = ConstraintSet::default();
    for seed in 0..20 {
        let t = run_route(&net, &c, &s321(), &mut trial_rng(seed, 0));
        assert_eq!(t.outcome, Outcome::Interrupted);
        assert_eq!(t.interrupted_at, Some(1));
        assert_eq!(t.tier_sequence, vec![0]);
    }
}

#[test]
fn estimate_bookkeeping() {
    let (net, c) = case_study();
    let n = 4000;
    let e = estimate(&net, &c, &s321(), n, 5);
    assert_eq!(e.hop_histogram.values().sum::<u64>(), n);
    assert_eq!(e.per_hop_interruptions.iter().sum::<u64>(), e.interruptions);
    assert_eq!(e.success_histogram.values().sum::<u64>(), n - e.interruptions);
    let p = e.interruption_probability;
    assert_eq!(p, e.interruptions as f64 / n as f64);
    assert!((e.standard_error - (p * (1.0 - p) / n as f64).sqrt()).abs() <= 1e-15);
    let weighted: u64 = e.success_histogram.iter().map(|(&h, &c)| h as u64 * c).sum();
    assert!((e.mean_hops_success - weighted as f64 / (n - e.interruptions) as f64).abs() <= 1e-12);
}

#[test]
fn traces_replay_as_feasible_hops() {
    // The receiver is not antipodal here, so every hop has a defined bearing.
    let net = Network::new(case_study_tiers()).unwrap();
    let c = ConstraintSet::new(PI / 6.0, PI / 10.0, 4000.0, 2.4).unwrap();
    let router = Router::with_strategy(&net, &c, &s321());
    let (_, receiver) = router.endpoints();
    let mut successes = 0;
    for trial in 0..300 {
        let points = router.realize(&mut trial_rng(77, trial));
        let (trace, path) = router.run_on(&points);
        assert_eq!(trace.tier_sequence[0], 0);
        assert_eq!(trace.hops + 1, trace.tier_sequence.len());
        assert_eq!(path.len(), trace.tier_sequence.len());
        match trace.outcome {
            Outcome::Success => {
                successes += 1;
                assert_eq!(trace.interrupted_at, None);
                let last = path.last().unwrap();
                let to_rx = tierlink::geometry::dome_angle(last, &receiver).unwrap();
                assert!(to_rx <= max_dome_angle(last.tier, 0, &net, &c) + 1e-9);
            }
            Outcome::Interrupted => assert!(trace.interrupted_at.is_some()),
        }
        for w in path.windows(2) {
            let theta_max = max_dome_angle(w[0].tier, w[1].tier, &net, &c);
            assert!(feasible(&w[1], &w[0], &receiver, &c, theta_max), "trial {trial}: infeasible hop");
        }
    }
    assert!(successes > 200);
}

#[test]
fn first_and_last_hops_fail_most() {
    let (net, c) = case_study();
    let e = estimate(&net, &c, &s321(), 20_000, 3);
    let counts = &e.per_hop_interruptions;
    assert!(counts.len() >= 5, "{counts:?}");
    let first = counts[0];
    let peak_late = counts[4..].iter().copied().max().unwrap();
    let middle = counts[1..4].iter().copied().max().unwrap();
    assert!(first > middle && peak_late > middle, "{counts:?}");
}

#[test]
fn exhaustive_search_limits() {
    let net = Network::new(vec![TierSpec::new(0.0, 200)]).unwrap();
    let c = ConstraintSet::default();
    let out = exhaustive_search(&net, &c, 50, 1).unwrap();
    assert_eq!(out.len(), 1);
    let tiers: Vec<TierSpec> = (0..9).map(|i| TierSpec::new(i as f64 * 100.0, 10)).collect();
    let big = Network::new(tiers).unwrap();
    assert!(matches!(exhaustive_search(&big, &c, 1, 1), Err(Error::TooManyTiers { tiers: 9, limit: 8 })));
}

#[test]
fn exhaustive_search_is_sorted() {
    let (net, c) = case_study();
    let out = exhaustive_search(&net, &c, 2000, 11).unwrap();
    assert_eq!(out.len(), 6);
    assert!(out.windows(2).all(|w| w[0].1.interruption_probability <= w[1].1.interruption_probability));
}

#[test]
fn three_flows_match_the_product_formula() {
    let (net, c) = case_study();
    let base = analyze(&net, &c, &s321(), OwnTierExponent::All).unwrap().multihop;
    let flows = FlowSpec::new(vec![0.0, PI / 6.0, PI / 6.0]).unwrap();
    let want = multiflow_total(&flows, base, c.theta_m).unwrap();
    let n = 10_000;
    let (got, se) = estimate_multiflow(&net, &c, &s321(), &flows.launch_angles(), n, 2024);
    let band = 3.0 * se.max((want * (1.0 - want) / n as f64).sqrt());
    assert!((got - want).abs() <= band, "simulated {got:.5} +- {se:.5}, product formula {want:.5}");
}
