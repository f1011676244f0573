use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tierlink::geometry::{
    direction_angle, dome_angle, feasible, max_dome_angle, sample_uniform_sphere, ConstraintSet, Network, SpherePoint,
    TierSpec, EARTH_RADIUS_KM,
};

fn point(tier: usize, radius: f64, polar: f64, azimuth: f64) -> SpherePoint {
    SpherePoint::from_angles(tier, radius, polar, azimuth)
}

/// Initial great-circle bearing from (lat1, lon1) to (lat2, lon2), the
/// navigation formula.
fn bearing(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let dl = lon2 - lon1;
    (dl.sin() * lat2.cos()).atan2(lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dl.cos())
}

fn lat_lon(p: &SpherePoint) -> (f64, f64) {
    let u = p.unit();
    (u.z.clamp(-1.0, 1.0).asin(), u.y.atan2(u.x))
}

fn bearing_gap(current: &SpherePoint, candidate: &SpherePoint, receiver: &SpherePoint) -> f64 {
    let (la, lo) = lat_lon(current);
    let (lb, lob) = lat_lon(candidate);
    let (lr, lor) = lat_lon(receiver);
    let d = (bearing(la, lo, lb, lob) - bearing(la, lo, lr, lor)).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Haversine central angle.
fn haversine(p: &SpherePoint, q: &SpherePoint) -> f64 {
    let (l1, o1) = lat_lon(p);
    let (l2, o2) = lat_lon(q);
    let h = ((l2 - l1) / 2.0).sin().powi(2) + l1.cos() * l2.cos() * ((o2 - o1) / 2.0).sin().powi(2);
    2.0 * h.sqrt().min(1.0).asin()
}

#[test]
fn dome_angle_examples() {
    let r = EARTH_RADIUS_KM;
    let x = SpherePoint { tier: 0, position: Vector3::new(r, 0.0, 0.0) };
    let y = SpherePoint { tier: 0, position: Vector3::new(0.0, r, 0.0) };
    let minus_x = SpherePoint { tier: 0, position: Vector3::new(-r, 0.0, 0.0) };
    assert_eq!(dome_angle(&x, &x).unwrap(), 0.0);
    assert_abs_diff_eq!(dome_angle(&x, &minus_x).unwrap(), PI, epsilon = 1e-15);
    assert_abs_diff_eq!(dome_angle(&x, &y).unwrap(), PI / 2.0, epsilon = 1e-15);
    let origin = SpherePoint { tier: 0, position: Vector3::zeros() };
    assert!(dome_angle(&x, &origin).is_err());
}

#[test]
fn direction_angle_examples() {
    let r = EARTH_RADIUS_KM;
    let current = point(0, r, PI / 2.0, 0.0);
    let receiver = point(0, r, PI / 2.0, 1.0);
    let on_arc = point(0, r, PI / 2.0, 0.3);
    let behind = point(0, r, PI / 2.0, -0.3);
    assert_abs_diff_eq!(direction_angle(&current, &on_arc, &receiver).unwrap(), 0.0, epsilon = 1e-9);
    assert_abs_diff_eq!(direction_angle(&current, &behind, &receiver).unwrap(), PI, epsilon = 1e-9);
    assert!(direction_angle(&current, &current, &receiver).is_err());
}

#[test]
fn case_study_max_dome_angles() {
    let net = Network::new(vec![TierSpec::new(0.0, 300), TierSpec::new(575.0, 140), TierSpec::new(1200.0, 720)]).unwrap();
    let c = ConstraintSet::default();
    assert_eq!(max_dome_angle(0, 0, &net, &c), c.theta_s);
    // Gateway to 1200 km: the 4000 km distance limit binds.
    let r3: f64 = EARTH_RADIUS_KM + 1200.0;
    let distance = ((EARTH_RADIUS_KM.powi(2) + r3 * r3 - 4000.0f64.powi(2)) / (2.0 * EARTH_RADIUS_KM * r3)).acos();
    assert_abs_diff_eq!(max_dome_angle(0, 2, &net, &c), distance, epsilon = 1e-15);
    assert_abs_diff_eq!(max_dome_angle(0, 2, &net, &c), 0.55657, epsilon = 1e-5);
}

#[test]
fn sampled_points_lie_on_their_sphere() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let radius = EARTH_RADIUS_KM + 900.0;
    for p in sample_uniform_sphere(2, radius, 10_000, &mut rng) {
        assert!((p.position.norm() - radius).abs() <= 1e-9 * radius);
        assert_eq!(p.tier, 2);
    }
}

fn angles() -> impl Strategy<Value = (f64, f64)> {
    (0.05..PI - 0.05, -PI..PI)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn dome_angle_matches_haversine(a in angles(), b in angles(), ha in 0.0..2000.0f64, hb in 0.0..2000.0f64) {
        let p = point(0, EARTH_RADIUS_KM + ha, a.0, a.1);
        let q = point(1, EARTH_RADIUS_KM + hb, b.0, b.1);
        let d = dome_angle(&p, &q).unwrap();
        prop_assert!((0.0..=PI).contains(&d));
        prop_assert!((d - dome_angle(&q, &p).unwrap()).abs() <= 1e-15);
        prop_assert!((d - haversine(&p, &q)).abs() <= 1e-7);
    }

    #[test]
    fn direction_angle_matches_navigation_bearings(
        a in angles(), b in angles(), r in angles(), hb in 0.0..1500.0f64,
    ) {
        let current = point(0, EARTH_RADIUS_KM, a.0, a.1);
        let candidate = point(1, EARTH_RADIUS_KM + hb, b.0, b.1);
        let receiver = point(0, EARTH_RADIUS_KM, r.0, r.1);
        // Bearings are ill-conditioned right next to the current point or its antipode.
        let dc = dome_angle(&current, &candidate).unwrap();
        let dr = dome_angle(&current, &receiver).unwrap();
        prop_assume!(dc > 1e-3 && dc < PI - 1e-3 && dr > 1e-3 && dr < PI - 1e-3);
        let got = direction_angle(&current, &candidate, &receiver).unwrap();
        prop_assert!((got - bearing_gap(&current, &candidate, &receiver)).abs() <= 1e-6);
    }

    #[test]
    fn feasible_matches_brute_force(
        a in angles(), b in angles(), r in angles(),
        theta_r in 0.2..PI, theta_s in 0.05..0.5f64, theta_max in 0.5..1.2f64,
    ) {
        let c = ConstraintSet::new(theta_r, theta_s, 4000.0, PI).unwrap();
        let current = point(0, EARTH_RADIUS_KM, a.0, a.1);
        let candidate = point(1, EARTH_RADIUS_KM + 800.0, b.0, b.1);
        let receiver = point(0, EARTH_RADIUS_KM, r.0, r.1);
        let dc = haversine(&current, &candidate);
        let dr = haversine(&current, &receiver);
        prop_assume!(dc > 1e-3 && dc < PI - 1e-3 && dr > 1e-3 && dr < PI - 1e-3);
        let gap = bearing_gap(&current, &candidate, &receiver);
        // Stay clear of the boundaries, where the two routes may round differently.
        prop_assume!((dc - theta_s).abs() > 1e-6 && (dc - theta_max).abs() > 1e-6 && (gap - theta_r / 2.0).abs() > 1e-6);
        let expected = dc >= theta_s && dc <= theta_max && gap <= theta_r / 2.0;
        prop_assert_eq!(feasible(&candidate, &current, &receiver, &c, theta_max), expected);
    }

    #[test]
    fn max_dome_angle_is_symmetric_and_floored(
        h in prop::collection::vec(1.0..2000.0f64, 1..5), d_th in 500.0..10_000.0f64, theta_s in 0.05..1.0f64,
    ) {
        let mut heights = h;
        heights.sort_by(f64::total_cmp);
        heights.dedup();
        let mut tiers = vec![TierSpec::new(0.0, 10)];
        tiers.extend(heights.iter().map(|&x| TierSpec::new(x, 10)));
        let net = Network::new(tiers).unwrap();
        let c = ConstraintSet::new(PI / 6.0, theta_s, d_th, PI).unwrap();
        for i in 0..net.len() {
            for j in 0..net.len() {
                let t = max_dome_angle(i, j, &net, &c);
                prop_assert!(t >= theta_s && t <= PI);
                prop_assert_eq!(t, max_dome_angle(j, i, &net, &c));
            }
        }
        // Two gateways never see each other over the horizon.
        prop_assert_eq!(max_dome_angle(0, 0, &net, &c), theta_s);
    }
}
