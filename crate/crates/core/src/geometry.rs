//! Spherical geometry: dome angles, direction angles, the per-tier-pair
//! maximum dome angle, and uniform sampling on spheres.
//!
//! Every device lives on a sphere concentric with the Earth. The *dome angle*
//! between two devices is the central angle subtended at the Earth's center.
//! The *direction angle* of a candidate relay is the deviation between the
//! bearing toward the candidate and the bearing toward the receiver, both
//! measured in the tangent plane at the current relay.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in kilometres; the radius of the gateway tier.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Slack applied to closed angular constraints so that points constructed
/// exactly on a boundary are not rejected by rounding.
pub const ANGLE_TOLERANCE: f64 = 1e-12;

/// One concentric tier of relay devices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierSpec {
    /// Height above the Earth's surface, km.
    pub height_km: f64,
    /// Number of devices, distributed as a binomial point process.
    pub count: u64,
}

impl TierSpec {
    pub fn new(height_km: f64, count: u64) -> Self {
        Self { height_km, count }
    }

    /// Radius of the tier sphere, km.
    pub fn radius(&self) -> f64 {
        EARTH_RADIUS_KM + self.height_km
    }

    /// Devices per square kilometre of tier sphere.
    pub fn density(&self) -> f64 {
        self.count as f64 / (4.0 * PI * self.radius().powi(2))
    }
}

/// An ordered list of tiers. Tier 0 is the terrestrial gateway layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TierSpec>", into = "Vec<TierSpec>")]
pub struct Network {
    tiers: Vec<TierSpec>,
}

impl Network {
    /// Validates and wraps a tier list.
    ///
    /// The first tier must sit on the surface and heights must be strictly
    /// increasing. Empty tiers are allowed and simply never provide relays.
    pub fn new(tiers: Vec<TierSpec>) -> Result<Self> {
        let problems = Self::violations(&tiers);
        if problems.is_empty() {
            Ok(Self { tiers })
        } else {
            Err(Error::InvalidNetwork(problems.join("; ")))
        }
    }

    /// Every invariant the tier list breaks, in tier order.
    pub fn violations(tiers: &[TierSpec]) -> Vec<String> {
        let mut out = Vec::new();
        if tiers.is_empty() {
            out.push("tier list is empty".to_string());
            return out;
        }
        for (i, t) in tiers.iter().enumerate() {
            if !t.height_km.is_finite() || t.height_km < 0.0 {
                out.push(format!("tier {}: height {} km is not a finite nonnegative value", i + 1, t.height_km));
            }
        }
        if tiers[0].height_km != 0.0 {
            out.push(format!("tier 1 must be terrestrial (height 0 km), got {} km", tiers[0].height_km));
        }
        for (i, w) in tiers.windows(2).enumerate() {
            if w[1].height_km <= w[0].height_km {
                out.push(format!(
                    "tier {} height {} km is not above tier {} height {} km",
                    i + 2,
                    w[1].height_km,
                    i + 1,
                    w[0].height_km
                ));
            }
        }
        out
    }

    pub fn tiers(&self) -> &[TierSpec] {
        &self.tiers
    }

    /// Number of tiers, `K`.
    pub fn len(&self) -> usize {
        self.tiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiers.is_empty()
    }

    pub fn radius(&self, tier: usize) -> f64 {
        self.tiers[tier].radius()
    }

    pub fn count(&self, tier: usize) -> u64 {
        self.tiers[tier].count
    }

    pub fn total_devices(&self) -> u64 {
        self.tiers.iter().map(|t| t.count).sum()
    }
}

impl TryFrom<Vec<TierSpec>> for Network {
    type Error = Error;

    fn try_from(tiers: Vec<TierSpec>) -> Result<Self> {
        Network::new(tiers)
    }
}

impl From<Network> for Vec<TierSpec> {
    fn from(n: Network) -> Self {
        n.tiers
    }
}

/// Routing constraints shared by every hop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    /// Total opening of the admissible direction sector, rad. A candidate is
    /// admissible when its bearing deviates from the receiver bearing by at
    /// most `theta_r / 2`.
    pub theta_r: f64,
    /// Minimum dome angle of a hop, rad.
    pub theta_s: f64,
    /// Maximum reliable link distance, km. `f64::INFINITY` disables the limit.
    pub d_th: f64,
    /// Dome angle between transmitter and receiver, rad.
    pub theta_m: f64,
}

impl ConstraintSet {
    pub fn new(theta_r: f64, theta_s: f64, d_th: f64, theta_m: f64) -> Result<Self> {
        let c = Self { theta_r, theta_s, d_th, theta_m };
        let problems = c.violations();
        if problems.is_empty() {
            Ok(c)
        } else {
            Err(Error::InvalidConstraints(problems.join("; ")))
        }
    }

    /// Every invariant the constraint set breaks.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.theta_r > 0.0 && self.theta_r <= 2.0 * PI) {
            out.push(format!("theta_r = {} must lie in (0, 2pi]", self.theta_r));
        }
        if !(self.theta_s > 0.0 && self.theta_s < PI) {
            out.push(format!("theta_s = {} must lie in (0, pi)", self.theta_s));
        }
        if !(self.d_th > 0.0) {
            out.push(format!("d_th = {} km must be positive", self.d_th));
        }
        if !(self.theta_m > 0.0 && self.theta_m <= PI) {
            out.push(format!("theta_m = {} must lie in (0, pi]", self.theta_m));
        }
        out
    }

    /// The same constraints with the distance limit removed, so only
    /// Earth blockage bounds a hop.
    pub fn without_distance_limit(&self) -> Self {
        Self { d_th: f64::INFINITY, ..*self }
    }
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self { theta_r: PI / 6.0, theta_s: PI / 10.0, d_th: 4000.0, theta_m: PI }
    }
}

/// A device position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    pub tier: usize,
    pub position: Vector3<f64>,
}

impl SpherePoint {
    /// Places a point on the sphere of `radius` in the direction of `dir`.
    pub fn on_sphere(tier: usize, radius: f64, dir: Vector3<f64>) -> Result<Self> {
        let n = dir.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidGeometry("direction vector has zero length".into()));
        }
        Ok(Self { tier, position: dir * (radius / n) })
    }

    /// Point at colatitude `polar` and longitude `azimuth` on the given sphere.
    pub fn from_angles(tier: usize, radius: f64, polar: f64, azimuth: f64) -> Self {
        let (sp, cp) = polar.sin_cos();
        let (sa, ca) = azimuth.sin_cos();
        Self { tier, position: Vector3::new(sp * ca, sp * sa, cp) * radius }
    }

    pub fn unit(&self) -> Vector3<f64> {
        self.position.normalize()
    }
}

fn clamped_acos(x: f64) -> f64 {
    x.clamp(-1.0, 1.0).acos()
}

/// Central angle between two unit vectors.
pub fn unit_angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    clamped_acos(a.dot(b))
}

/// Central angle between two devices, in `[0, pi]`.
pub fn dome_angle(p: &SpherePoint, q: &SpherePoint) -> Result<f64> {
    let np = p.position.norm();
    let nq = q.position.norm();
    if !(np > 0.0 && nq > 0.0) {
        return Err(Error::InvalidGeometry("dome angle of a zero-length position".into()));
    }
    Ok(clamped_acos(p.position.dot(&q.position) / (np * nq)))
}

/// Component of `v` in the tangent plane at unit vector `at`.
pub fn tangent_component(at: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    v - at * at.dot(v)
}

/// Angle between the bearings from `current` toward `candidate` and toward
/// `receiver`, measured in the tangent plane at `current`.
pub fn direction_angle(current: &SpherePoint, candidate: &SpherePoint, receiver: &SpherePoint) -> Result<f64> {
    let nc = current.position.norm();
    if !(nc > 0.0) {
        return Err(Error::InvalidGeometry("current relay has a zero-length position".into()));
    }
    let at = current.position / nc;
    let to_candidate = tangent_component(&at, &(candidate.position - current.position));
    let to_receiver = tangent_component(&at, &(receiver.position - current.position));
    let scale = nc.max(1.0) * 1e-12;
    if to_candidate.norm() <= scale {
        return Err(Error::InvalidGeometry("candidate has no bearing from the current relay".into()));
    }
    if to_receiver.norm() <= scale {
        return Err(Error::InvalidGeometry("receiver has no bearing from the current relay".into()));
    }
    Ok(to_candidate.angle(&to_receiver))
}

/// Largest dome angle at which tiers `i` and `j` can still communicate,
/// ignoring the lower bound `theta_s`: the smaller of the distance-limited
/// angle and the joint line-of-sight angle.
pub fn link_reach(i: usize, j: usize, network: &Network, c: &ConstraintSet) -> f64 {
    let r1 = EARTH_RADIUS_KM;
    let ri = network.radius(i);
    let rj = network.radius(j);
    let distance = if c.d_th.is_finite() {
        clamped_acos((ri * ri + rj * rj - c.d_th * c.d_th) / (2.0 * ri * rj))
    } else {
        PI
    };
    let blockage = clamped_acos(r1 / ri) + clamped_acos(r1 / rj);
    distance.min(blockage)
}

/// Maximum dome angle `theta_{i,j}` of a hop from tier `i` to tier `j`,
/// floored at `theta_s`. Equality with `theta_s` marks an unusable pair.
pub fn max_dome_angle(i: usize, j: usize, network: &Network, c: &ConstraintSet) -> f64 {
    c.theta_s.max(link_reach(i, j, network, c))
}

/// `n` points drawn independently and uniformly on the sphere of `radius`.
pub fn sample_uniform_sphere<R: Rng + ?Sized>(tier: usize, radius: f64, n: usize, rng: &mut R) -> Vec<SpherePoint> {
    (0..n)
        .map(|_| {
            let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
            SpherePoint { tier, position: Vector3::new(x, y, z) * radius }
        })
        .collect()
}

/// Unit vectors drawn uniformly on the sphere.
pub fn sample_unit_vectors<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| {
            let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
            Vector3::new(x, y, z)
        })
        .collect()
}

/// Checks constraints (c1)-(c3) for relaying from `current` to `candidate`.
///
/// `theta_max` is [`max_dome_angle`] for the two tiers involved. All three
/// boundaries are closed.
pub fn feasible(
    candidate: &SpherePoint,
    current: &SpherePoint,
    receiver: &SpherePoint,
    c: &ConstraintSet,
    theta_max: f64,
) -> bool {
    let Ok(dome) = dome_angle(current, candidate) else {
        return false;
    };
    if dome < c.theta_s - ANGLE_TOLERANCE || dome > theta_max + ANGLE_TOLERANCE {
        return false;
    }
    match direction_angle(current, candidate, receiver) {
        Ok(dir) => dir <= c.theta_r / 2.0 + ANGLE_TOLERANCE,
        Err(_) => false,
    }
}

/// Area fraction of a sphere covered by a cap of dome angle `theta`.
pub fn cap_fraction(theta: f64) -> f64 {
    (1.0 - theta.cos()) / 2.0
}
