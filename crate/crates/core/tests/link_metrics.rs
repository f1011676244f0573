use std::f64::consts::PI;

use approx::assert_relative_eq;
use nalgebra::{DVector, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use tierlink::analytic::{tier_interruption_matrix, OwnTierExponent};
use tierlink::config::case_study_tiers;
use tierlink::geometry::{ConstraintSet, Network, TierSpec, EARTH_RADIUS_KM};
use tierlink::link_metrics::{
    availability, free_space_snr, mean_link_distances, multiflow_interruption, multiflow_total, snr_sample,
    CoverageModel, FlowSpec, LinkBudget, LinkKind, ShadowedRician, UrllcMode,
};
use tierlink::markov::{analyze, PriorityStrategy, StationaryDistribution};
use tierlink::strategy::stationary_optimal;

fn case_study() -> (Network, ConstraintSet) {
    (Network::new(case_study_tiers()).unwrap(), ConstraintSet::default())
}

fn s321() -> PriorityStrategy {
    "3,2,1".parse().unwrap()
}

fn case_model(samples: usize) -> CoverageModel {
    let (net, c) = case_study();
    CoverageModel::new(&net, &c, &s321(), OwnTierExponent::All, &LinkBudget::ka_band(), samples, 5).unwrap()
}

/// Sample mean and its standard error.
fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn draws(fading: ShadowedRician, n: usize, seed: u64) -> Vec<f64> {
    let sampler = fading.sampler().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sampler.sample(&mut rng)).collect()
}

#[test]
fn shadowed_rician_mean() {
    let fading = LinkBudget::ka_band().fading;
    let (mean, se) = mean_and_se(&draws(fading, 1_000_000, 1));
    let want = 19.4 + 2.0 * 0.158;
    assert!((mean - want).abs() <= 3.0 * se, "mean {mean} +- {se}, want {want}");
}

#[test]
fn heavy_shadowing_parameter_approaches_rician_moments() {
    let (b, omega) = (0.158, 19.4);
    let xs = draws(ShadowedRician { b, m: 500.0, omega }, 1_000_000, 2);
    let squares: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let (m1, _) = mean_and_se(&xs);
    let (m2, _) = mean_and_se(&squares);
    // Rician power with line-of-sight power omega and scatter variance b per component.
    let rice_m1 = 2.0 * b + omega;
    let rice_m2 = omega * omega + 8.0 * b * omega + 8.0 * b * b;
    assert_relative_eq!(m1, rice_m1, max_relative = 0.02);
    assert_relative_eq!(m2, rice_m2, max_relative = 0.02);
}

#[test]
fn bad_fading_parameters_are_rejected() {
    assert!(ShadowedRician { b: 0.1, m: 0.4, omega: 1.0 }.sampler().is_err());
    assert!(ShadowedRician { b: 0.0, m: 1.0, omega: 1.0 }.sampler().is_err());
}

#[test]
fn inter_satellite_snr_at_1000_km() {
    // 15 dBW, 41.7 dBi, 20 GHz, 3.6e-12 W noise, worked out by hand.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let got = snr_sample(LinkKind::InterSatellite, 1000.0, &LinkBudget::ka_band(), &mut rng).unwrap();
    assert_relative_eq!(got, 0.185_122_961_509, max_relative = 1e-9);
    let doubled = snr_sample(LinkKind::InterSatellite, 2000.0, &LinkBudget::ka_band(), &mut rng).unwrap();
    assert_eq!(got / doubled, 4.0);
    assert!(snr_sample(LinkKind::SatTerrestrial, 0.0, &LinkBudget::ka_band(), &mut rng).is_err());
}

#[test]
fn sat_terrestrial_snr_averages_to_the_faded_budget() {
    let b = LinkBudget::ka_band();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let xs: Vec<f64> =
        (0..200_000).map(|_| snr_sample(LinkKind::SatTerrestrial, 800.0, &b, &mut rng).unwrap()).collect();
    let (mean, se) = mean_and_se(&xs);
    let want = free_space_snr(800.0, &b) * b.rain_attenuation * b.fading.mean();
    assert!((mean - want).abs() <= 3.0 * se, "{mean} vs {want}");
}

#[test]
fn coverage_limits_and_monotonicity() {
    let model = case_model(20_000);
    assert!(model.coverage(0.0).is_err());
    assert!(model.coverage(-1.0).is_err());
    assert_eq!(model.coverage(f64::INFINITY).unwrap(), 0.0);
    assert!(model.coverage(1e-9).unwrap() > 0.99);
    assert!(model.coverage(1e9).unwrap() < 1e-6);
    let mut last = 1.0;
    for db in (-30..=30).step_by(5) {
        let pc = model.coverage(10f64.powf(db as f64 / 10.0)).unwrap();
        assert!((0.0..=1.0).contains(&pc));
        assert!(pc <= last + 1e-12, "coverage rose at {db} dB");
        last = pc;
    }
}

#[test]
fn urllc_limits_and_dominance() {
    let model = case_model(20_000);
    for gamma in [0.1, 1.0, 10.0] {
        let pc = model.coverage(gamma).unwrap();
        assert_eq!(model.urllc(gamma, 1e-6, UrllcMode::Latency).unwrap(), 0.0);
        assert!((model.urllc(gamma, 1e9, UrllcMode::Latency).unwrap() - pc).abs() <= 1e-3);
        let mut last = 0.0;
        for tau in [0.05, 0.1, 0.5, 1.0, 4.0, 20.0] {
            let pu = model.urllc(gamma, tau, UrllcMode::Latency).unwrap();
            assert!(pu >= last - 1e-12, "URLLC fell at tau = {tau}");
            assert!(pu <= pc + 1e-12);
            last = pu;
        }
    }
}

#[test]
fn literal_threshold_clamps_to_coverage() {
    // The printed threshold is below zero for small tau, which leaves only the SNR condition.
    let model = case_model(5_000);
    let t = model.latency_threshold(1e-3, UrllcMode::Literal).unwrap();
    assert!(t <= 0.0);
    assert_eq!(model.urllc(1.0, 1e-3, UrllcMode::Literal).unwrap(), model.coverage(1.0).unwrap());
}

#[test]
fn coverage_grows_and_saturates_with_devices() {
    let c = ConstraintSet::default();
    let budget = LinkBudget::ka_band();
    let values: Vec<f64> = [800u64, 1600, 2400, 3200]
        .iter()
        .map(|&total| {
            let tiers = [0.0, 600.0, 900.0, 1200.0].iter().map(|&h| TierSpec::new(h, total / 4)).collect();
            let net = Network::new(tiers).unwrap();
            let s = stationary_optimal(&tier_interruption_matrix(&net, &c)).unwrap();
            CoverageModel::new(&net, &c, &s, OwnTierExponent::Others, &budget, 20_000, 3).unwrap().coverage(1.0).unwrap()
        })
        .collect();
    assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
    assert!(values[3] - values[2] < values[1] - values[0], "{values:?}");
}

#[test]
fn sparse_networks_have_no_mean_forward_angle() {
    // 100 devices per tier push every arccos argument past 1.
    let tiers = [0.0, 600.0, 900.0, 1200.0].iter().map(|&h| TierSpec::new(h, 100)).collect();
    let net = Network::new(tiers).unwrap();
    let c = ConstraintSet::default();
    let s = stationary_optimal(&tier_interruption_matrix(&net, &c)).unwrap();
    assert!(matches!(analyze(&net, &c, &s, OwnTierExponent::Others), Err(tierlink::Error::Domain(_))));
}

#[test]
fn availability_dominates_the_distance_limited_route() {
    let (net, c) = case_study();
    let base = analyze(&net, &c, &s321(), OwnTierExponent::All).unwrap().multihop;
    let a = availability(&net, &c, &s321(), OwnTierExponent::All).unwrap();
    assert!(a >= 1.0 - base, "{a} < {}", 1.0 - base);
    // With a non-binding distance limit the substitution changes nothing.
    let loose = ConstraintSet::new(c.theta_r, c.theta_s, 1e6, c.theta_m).unwrap();
    let base = analyze(&net, &loose, &s321(), OwnTierExponent::All).unwrap().multihop;
    assert_eq!(availability(&net, &loose, &s321(), OwnTierExponent::All).unwrap(), 1.0 - base);
}

fn one_hot(k: usize, i: usize) -> StationaryDistribution {
    let mut w = DVector::zeros(k);
    w[i] = 1.0;
    StationaryDistribution { weights: w }
}

#[test]
fn mean_distances_single_tier_and_degenerate_angle() {
    let net = Network::new(vec![TierSpec::new(0.0, 10), TierSpec::new(700.0, 10)]).unwrap();
    let (r1, r2) = (EARTH_RADIUS_KM, EARTH_RADIUS_KM + 700.0);
    let theta = 0.3;
    let (d1, d2) = mean_link_distances(&one_hot(2, 1), theta, &net);
    assert_relative_eq!(d1, (r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * theta.cos()).sqrt(), max_relative = 1e-14);
    assert_relative_eq!(d2, r2 * (2.0 - 2.0 * theta.cos()).sqrt(), max_relative = 1e-12);
    let v = StationaryDistribution { weights: DVector::from_vec(vec![0.25, 0.75]) };
    let (d1, _) = mean_link_distances(&v, 1e-9, &net);
    assert_relative_eq!(d1, 0.75 * 700.0, max_relative = 1e-6);
}

#[test]
fn case_study_mean_distances_by_vectors() {
    let (net, c) = case_study();
    let a = analyze(&net, &c, &s321(), OwnTierExponent::All).unwrap();
    let theta = a.hops.theta_bar;
    let at = |r: f64, angle: f64| Vector3::new(r * angle.sin(), 0.0, r * angle.cos());
    let radii: Vec<f64> = (0..3).map(|i| net.radius(i)).collect();
    let v = a.stationary.as_slice();
    let d1: f64 = (0..3).map(|i| v[i] * (at(radii[i], theta) - at(EARTH_RADIUS_KM, 0.0)).norm()).sum();
    let d2: f64 =
        (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| v[i] * v[j] * (at(radii[j], theta) - at(radii[i], 0.0)).norm()).sum();
    let (g1, g2) = mean_link_distances(&a.stationary, theta, &net);
    assert_relative_eq!(g1, d1, max_relative = 1e-12);
    assert_relative_eq!(g2, d2, max_relative = 1e-12);
}

#[test]
fn multiflow_identities() {
    let (net, c) = case_study();
    let base = analyze(&net, &c, &s321(), OwnTierExponent::All).unwrap().multihop;
    assert!((multiflow_interruption(0.0, base, c.theta_m).unwrap() - base).abs() <= 1e-12);
    for theta_m in [0.5, 1.5, 2.5] {
        assert!((multiflow_interruption(0.0, base, theta_m).unwrap() - base).abs() <= 1e-12);
    }
    let single = FlowSpec::new(vec![0.0]).unwrap();
    assert!((multiflow_total(&single, base, c.theta_m).unwrap() - base).abs() <= 1e-12);
    let three = FlowSpec::new(vec![0.0, PI / 6.0, PI / 6.0]).unwrap();
    assert!(multiflow_total(&three, base, c.theta_m).unwrap() < base);
    assert!(multiflow_interruption(PI / 2.0, base, c.theta_m).is_err());
}

#[test]
fn tilted_flows_scale_the_base_value_down() {
    for theta_m in [0.8, 1.6, 2.4] {
        let mut last = 0.1;
        for theta in [0.1, 0.4, 0.8, 1.2] {
            let x = multiflow_interruption(theta, 0.1, theta_m).unwrap();
            assert!(x < last, "theta_m {theta_m}, tilt {theta}");
            last = x;
        }
    }
    // Antipodal endpoints: every tilted great circle has the same length.
    assert_relative_eq!(multiflow_interruption(1.2, 0.1, PI).unwrap(), 0.1, max_relative = 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn multiflow_total_is_order_free_and_shrinks_with_flows(
        angles in prop::collection::vec(0.0..1.5f64, 1..6),
        extra in 0.0..1.5f64,
        base in 0.0..1.0f64,
        theta_m in 0.1..PI,
        seed in any::<u64>(),
    ) {
        let flows = FlowSpec::new(angles.clone()).unwrap();
        let total = multiflow_total(&flows, base, theta_m).unwrap();
        let mut shuffled = angles.clone();
        shuffled.rotate_left((seed % angles.len() as u64) as usize);
        shuffled.reverse();
        let again = multiflow_total(&FlowSpec::new(shuffled).unwrap(), base, theta_m).unwrap();
        prop_assert!((total - again).abs() <= 1e-12 * total.max(1e-300));
        let mut more = angles;
        more.push(extra);
        let added = multiflow_total(&FlowSpec::new(more).unwrap(), base, theta_m).unwrap();
        prop_assert!(multiflow_interruption(extra, base, theta_m).unwrap() <= base + 1e-15);
        prop_assert!(added <= total + 1e-15);
    }
}
