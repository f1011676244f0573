use std::f64::consts::PI;

use proptest::prelude::*;

use tierlink::analytic::{pair_interruption, tier_interruption_matrix, tier_interruption_matrix_with, OwnTierExponent};
use tierlink::config::case_study_tiers;
use tierlink::geometry::{max_dome_angle, ConstraintSet, Network, TierSpec};
use tierlink::simulator::void_probability;

fn case_study() -> (Network, ConstraintSet) {
    (Network::new(case_study_tiers()).unwrap(), ConstraintSet::default())
}

#[test]
fn void_probability_matches_closed_form() {
    let (net, c) = case_study();
    let p = tier_interruption_matrix(&net, &c);
    for i in 0..3 {
        for j in 0..3 {
            let (est, se) = void_probability(&net, &c, i, j, 40_000, 7 + (3 * i + j) as u64);
            let want = p.get(i, j);
            let band = 3.0 * se.max((want * (1.0 - want) / 40_000.0).sqrt()) + 1e-12;
            assert!((est - want).abs() <= band, "P^I[{i}][{j}] = {want:.4}, simulated {est:.4} +- {se:.4}");
        }
    }
}

#[test]
fn own_tier_convention_only_changes_the_diagonal() {
    let (net, c) = case_study();
    let others = tier_interruption_matrix_with(&net, &c, OwnTierExponent::Others);
    let all = tier_interruption_matrix_with(&net, &c, OwnTierExponent::All);
    for i in 0..3 {
        for j in 0..3 {
            if i == j && !others.is_blocked(i, j) {
                assert!(all.get(i, j) < others.get(i, j));
            } else {
                assert_eq!(all.get(i, j), others.get(i, j));
            }
        }
    }
}

#[test]
fn log_space_switch_is_continuous() {
    let c = ConstraintSet::default();
    let at = |n: u64| {
        let net = Network::new(vec![TierSpec::new(0.0, 1), TierSpec::new(1200.0, n)]).unwrap();
        pair_interruption(0, 1, &net, &c, OwnTierExponent::Others)
    };
    let theta = {
        let net = Network::new(vec![TierSpec::new(0.0, 1), TierSpec::new(1200.0, 1)]).unwrap();
        max_dome_angle(0, 1, &net, &c)
    };
    let a = (c.theta_r / (4.0 * PI)) * (c.theta_s.cos() - theta.cos());
    for n in [999u64, 1000, 1001, 5000] {
        let want = (1.0 - a).powf(n as f64);
        assert!((at(n) - want).abs() <= 1e-13 * want.max(1e-300), "n = {n}");
    }
}

#[test]
fn empty_tier_is_never_found() {
    let net = Network::new(vec![TierSpec::new(0.0, 0), TierSpec::new(600.0, 200)]).unwrap();
    let c = ConstraintSet::default();
    let p = tier_interruption_matrix(&net, &c);
    assert_eq!(p.get(1, 0), 1.0);
    // The receiver is a fixed ground point, so the satellite tier still delivers.
    assert!(p.delivers(1));
    assert!(!p.delivers(0));
}

fn network() -> impl Strategy<Value = Network> {
    (prop::collection::vec((50.0..600.0f64, 1u64..1500), 1..5), 1u64..1500).prop_map(|(sats, gateways)| {
        let mut h = 0.0;
        let mut tiers = vec![TierSpec::new(0.0, gateways)];
        for (gap, n) in sats {
            h += gap;
            tiers.push(TierSpec::new(h, n));
        }
        Network::new(tiers).unwrap()
    })
}

fn constraints() -> impl Strategy<Value = ConstraintSet> {
    (0.1..PI, 0.05..0.6f64, 800.0..9000.0f64).prop_map(|(r, s, d)| ConstraintSet::new(r, s, d, PI).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn probabilities_and_row_products(net in network(), c in constraints()) {
        let p = tier_interruption_matrix(&net, &c);
        let ps = p.single_hop();
        for i in 0..net.len() {
            let mut prod = 1.0;
            for j in 0..net.len() {
                let x = p.get(i, j);
                prop_assert!((0.0..=1.0).contains(&x));
                prod *= x;
            }
            prop_assert!((ps.get(i) - prod).abs() <= 1e-15);
        }
    }

    #[test]
    fn more_devices_never_raise_interruption(net in network(), c in constraints(), tier in 0usize..5, extra in 1u64..500) {
        let tier = tier % net.len();
        let mut tiers = net.tiers().to_vec();
        tiers[tier].count += extra;
        let bigger = Network::new(tiers).unwrap();
        let p = tier_interruption_matrix(&net, &c);
        let q = tier_interruption_matrix(&bigger, &c);
        for i in 0..net.len() {
            prop_assert!(q.get(i, tier) <= p.get(i, tier) + 1e-15);
        }
    }

    #[test]
    fn wider_sector_never_raises_interruption(net in network(), c in constraints(), widen in 1.0..2.0f64) {
        let wider = ConstraintSet::new((c.theta_r * widen).min(2.0 * PI), c.theta_s, c.d_th, c.theta_m).unwrap();
        let p = tier_interruption_matrix(&net, &c);
        let q = tier_interruption_matrix(&net, &wider);
        for i in 0..net.len() {
            for j in 0..net.len() {
                prop_assert!(q.get(i, j) <= p.get(i, j) + 1e-15);
            }
        }
    }
}
