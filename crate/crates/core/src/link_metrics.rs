//! Link-level metrics on top of the routing chain: satellite availability,
//! SNR coverage, URLLC rate and multi-flow interruption.
//!
//! Lengths are kilometres at the interface and metres inside the link budget.

use std::f64::consts::{LN_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::analytic::OwnTierExponent;
use crate::error::{Error, Result};
use crate::geometry::{ConstraintSet, Network, EARTH_RADIUS_KM};
use crate::markov::{analyze, Analysis, PriorityStrategy, StationaryDistribution};

/// Propagation speed, m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Default number of fading draws behind an exceedance curve.
pub const DEFAULT_FADING_SAMPLES: usize = 100_000;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Shadowed-Rician fading: average multipath power `2b`, Nakagami-`m`
/// shadowing of a line-of-sight component with average power `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowedRician {
    pub b: f64,
    pub m: f64,
    pub omega: f64,
}

impl ShadowedRician {
    /// Average power gain, `2b + omega`.
    pub fn mean(&self) -> f64 {
        2.0 * self.b + self.omega
    }

    pub fn sampler(&self) -> Result<ShadowedRicianSampler> {
        if !(self.b > 0.0 && self.omega > 0.0 && self.m >= 0.5) {
            return Err(Error::Domain(format!("shadowed-Rician parameters {self:?} need b, omega > 0 and m >= 0.5")));
        }
        Ok(ShadowedRicianSampler {
            los: Gamma::new(self.m, self.omega / self.m).expect("positive shape and scale"),
            scatter: Normal::new(0.0, self.b.sqrt()).expect("positive deviation"),
        })
    }
}

/// Draws power gains `|sqrt(g) e^{i phi} + X + iY|^2` with
/// `g ~ Gamma(m, omega/m)`, uniform `phi` and `X, Y ~ N(0, b)`.
#[derive(Debug, Clone, Copy)]
pub struct ShadowedRicianSampler {
    los: Gamma<f64>,
    scatter: Normal<f64>,
}

impl Distribution<f64> for ShadowedRicianSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let amplitude = self.los.sample(rng).sqrt();
        let phase: f64 = rng.random_range(0.0..2.0 * PI);
        let re = amplitude * phase.cos() + self.scatter.sample(rng);
        let im = amplitude * phase.sin() + self.scatter.sample(rng);
        re * re + im * im
    }
}

/// Radio parameters, in linear units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub carrier_frequency_hz: f64,
    pub transmit_power_w: f64,
    pub antenna_gain: f64,
    pub bandwidth_hz: f64,
    pub noise_power_w: f64,
    pub rain_attenuation: f64,
    pub package_size_bits: f64,
    pub fading: ShadowedRician,
    pub snr_threshold: f64,
    pub latency_threshold_s: f64,
}

impl LinkBudget {
    /// Ka-band reference budget: 20 GHz carrier, 15 dBW, 41.7 dBi, 100 MHz,
    /// -2 dB rain loss, 100 Mbit packages, 4 s latency, 0 dB threshold.
    pub fn ka_band() -> Self {
        Self {
            carrier_frequency_hz: 20e9,
            transmit_power_w: db_to_linear(15.0),
            antenna_gain: db_to_linear(41.7),
            bandwidth_hz: 100e6,
            noise_power_w: 3.6e-12,
            rain_attenuation: db_to_linear(-2.0),
            package_size_bits: 100e6,
            fading: ShadowedRician { b: 0.158, m: 1.29, omega: 19.4 },
            snr_threshold: 1.0,
            latency_threshold_s: 4.0,
        }
    }

    /// Every invariant the budget breaks.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let fields = [
            ("carrier_frequency", self.carrier_frequency_hz),
            ("transmit_power", self.transmit_power_w),
            ("antenna_gain", self.antenna_gain),
            ("bandwidth", self.bandwidth_hz),
            ("noise_power", self.noise_power_w),
            ("rain_attenuation", self.rain_attenuation),
            ("package_size", self.package_size_bits),
            ("snr_threshold", self.snr_threshold),
            ("latency_threshold", self.latency_threshold_s),
            ("fading.b", self.fading.b),
            ("fading.omega", self.fading.omega),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("link_budget.{name} = {v} must be positive"));
            }
        }
        if !(self.fading.m >= 0.5) {
            out.push(format!("link_budget.fading.m = {} must be at least 0.5", self.fading.m));
        }
        out
    }

    /// `rho G (c / 4 pi f)^2 / sigma^2`, the SNR at 1 m without fading.
    pub fn snr_at_one_metre(&self) -> f64 {
        let wave = SPEED_OF_LIGHT / (4.0 * PI * self.carrier_frequency_hz);
        self.transmit_power_w * self.antenna_gain * wave * wave / self.noise_power_w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    SatTerrestrial,
    InterSatellite,
}

/// Free-space SNR over `distance_km`.
pub fn free_space_snr(distance_km: f64, budget: &LinkBudget) -> f64 {
    let d = distance_km * 1e3;
    budget.snr_at_one_metre() / (d * d)
}

/// One SNR draw. Satellite-terrestrial links add rain loss and fading;
/// inter-satellite links are deterministic.
pub fn snr_sample<R: Rng + ?Sized>(kind: LinkKind, distance_km: f64, budget: &LinkBudget, rng: &mut R) -> Result<f64> {
    if !(distance_km > 0.0) {
        return Err(Error::Domain(format!("link distance {distance_km} km must be positive")));
    }
    let snr = free_space_snr(distance_km, budget);
    Ok(match kind {
        LinkKind::InterSatellite => snr,
        LinkKind::SatTerrestrial => snr * budget.rain_attenuation * budget.fading.sampler()?.sample(rng),
    })
}

/// Empirical complementary CDF of the fading gain, linearly interpolated
/// between order statistics.
#[derive(Debug, Clone)]
pub struct FadingTable {
    sorted: Vec<f64>,
}

impl FadingTable {
    pub fn new(fading: &ShadowedRician, samples: usize, seed: u64) -> Result<Self> {
        let sampler = fading.sampler()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sorted: Vec<f64> = (0..samples.max(2)).map(|_| sampler.sample(&mut rng)).collect();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    /// `P[S > x]`.
    pub fn ccdf(&self, x: f64) -> f64 {
        let n = self.sorted.len();
        if x < self.sorted[0] {
            return 1.0;
        }
        if x >= self.sorted[n - 1] {
            return 0.0;
        }
        // Order statistic k sits at cumulative probability (k + 1) / n.
        let k = self.sorted.partition_point(|&s| s <= x) - 1;
        let (a, b) = (self.sorted[k], self.sorted[k + 1]);
        let frac = if b > a { (x - a) / (b - a) } else { 0.0 };
        1.0 - (k as f64 + 1.0 + frac) / n as f64
    }
}

/// CDF of the dome angle from a fixed point to the nearest of `n` uniform
/// points on a sphere.
pub fn contact_angle_cdf(theta: f64, n: u64) -> f64 {
    1.0 - ((1.0 + theta.cos()) / 2.0).powf(n as f64)
}

/// Inverse of [`contact_angle_cdf`].
pub fn contact_angle_quantile(u: f64, n: u64) -> f64 {
    (2.0 * (1.0 - u).powf(1.0 / n as f64) - 1.0).clamp(-1.0, 1.0).acos()
}

/// Law-of-cosines chord between radii `a` and `b` at dome angle `theta`.
pub fn chord(a: f64, b: f64, theta: f64) -> f64 {
    (a * a + b * b - 2.0 * a * b * theta.cos()).max(0.0).sqrt()
}

/// Mean ground-satellite and satellite-satellite hop lengths, km.
pub fn mean_link_distances(v: &StationaryDistribution, theta_bar: f64, network: &Network) -> (f64, f64) {
    let k = network.len();
    let r1 = EARTH_RADIUS_KM;
    let d1 = (0..k).map(|i| v.get(i) * chord(r1, network.radius(i), theta_bar)).sum();
    let d2 = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| v.get(i) * v.get(j) * chord(network.radius(i), network.radius(j), theta_bar))
        .sum();
    (d1, d2)
}

/// 1 minus the multi-hop interruption once the distance limit is dropped,
/// so only Earth blockage bounds a hop.
pub fn availability(network: &Network, c: &ConstraintSet, s: &PriorityStrategy, own: OwnTierExponent) -> Result<f64> {
    Ok(1.0 - analyze(network, &c.without_distance_limit(), s, own)?.multihop)
}

/// Latency threshold convention of the URLLC rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UrllcMode {
    /// Per-hop SNR threshold `2^(N_h w / (B (tau - D/c))) - 1`, where
    /// `w` is the package size and `D` the mean route length.
    #[default]
    Latency,
    /// `exp(tau ln2 / (N_h B) - ln2 D / (c N_h B)) - 1`, without the
    /// package size.
    Literal,
}

/// SNR coverage and URLLC evaluation for one strategy.
#[derive(Debug, Clone)]
pub struct CoverageModel {
    network: Network,
    analysis: Analysis,
    budget: LinkBudget,
    fading: FadingTable,
}

impl CoverageModel {
    pub fn new(
        network: &Network,
        c: &ConstraintSet,
        s: &PriorityStrategy,
        own: OwnTierExponent,
        budget: &LinkBudget,
        fading_samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let analysis = analyze(network, c, s, own)?;
        Ok(Self {
            network: network.clone(),
            analysis,
            budget: *budget,
            fading: FadingTable::new(&budget.fading, fading_samples, seed)?,
        })
    }

    pub fn analysis(&self) -> &Analysis {
        &self.analysis
    }

    fn satellite_weights(&self) -> Vec<(usize, f64)> {
        let v = &self.analysis.stationary;
        let total: f64 = (1..self.network.len()).map(|i| v.get(i)).sum();
        if total <= 0.0 {
            return Vec::new();
        }
        (1..self.network.len()).map(|i| (i, v.get(i) / total)).filter(|&(_, w)| w > 0.0).collect()
    }

    /// `P[SNR_1 > gamma]` for a ground device served by its nearest visible
    /// satellite, averaged over satellite tiers by stationary occupancy.
    pub fn sat_terrestrial_exceedance(&self, gamma: f64) -> f64 {
        let r1 = EARTH_RADIUS_KM;
        let k0 = self.budget.snr_at_one_metre() * self.budget.rain_attenuation;
        self.satellite_weights()
            .into_iter()
            .map(|(j, w)| {
                let n = self.network.count(j);
                if n == 0 {
                    return 0.0;
                }
                let rj = self.network.radius(j);
                let upper = contact_angle_cdf((r1 / rj).acos(), n);
                let integrand = |u: f64| {
                    let d = chord(r1, rj, contact_angle_quantile(u, n)) * 1e3;
                    self.fading.ccdf(gamma * d * d / k0)
                };
                w * quadrature::integrate(integrand, 0.0, upper, 1e-6).integral.clamp(0.0, 1.0)
            })
            .sum()
    }

    /// `P[SNR_2 > gamma]` between satellites of tiers drawn from the
    /// stationary occupancy.
    pub fn inter_satellite_exceedance(&self, gamma: f64) -> f64 {
        let weights = self.satellite_weights();
        let d_gamma = (self.budget.snr_at_one_metre() / gamma).sqrt() / 1e3;
        let r1 = EARTH_RADIUS_KM;
        let mut total = 0.0;
        for &(i, wi) in &weights {
            for &(j, wj) in &weights {
                let (ri, rj) = (self.network.radius(i), self.network.radius(j));
                let n = if i == j { self.network.count(j).saturating_sub(1) } else { self.network.count(j) };
                if n == 0 {
                    continue;
                }
                let reach = ((ri * ri + rj * rj - d_gamma * d_gamma) / (2.0 * ri * rj)).clamp(-1.0, 1.0).acos();
                let los = (r1 / ri).acos() + (r1 / rj).acos();
                total += wi * wj * contact_angle_cdf(reach.min(los), n);
            }
        }
        total
    }

    /// Probability that every hop of an `N_h`-hop route clears `gamma`.
    pub fn coverage(&self, gamma: f64) -> Result<f64> {
        if !(gamma > 0.0) {
            return Err(Error::Domain(format!("SNR threshold {gamma} must be positive")));
        }
        if gamma.is_infinite() {
            return Ok(0.0);
        }
        let p1 = self.sat_terrestrial_exceedance(gamma);
        let p2 = self.inter_satellite_exceedance(gamma);
        let v1 = self.analysis.stationary.get(0);
        let middle = v1 * p1 + (1.0 - v1) * p2;
        let inner = self.analysis.hops.n_h.saturating_sub(2) as i32;
        Ok(p1 * p1 * middle.powi(inner))
    }

    /// Mean ground-satellite and satellite-satellite hop lengths, km.
    pub fn mean_link_distances(&self) -> (f64, f64) {
        mean_link_distances(&self.analysis.stationary, self.analysis.hops.theta_bar, &self.network)
    }

    /// Per-hop SNR threshold implied by latency budget `tau`; `None` when
    /// propagation alone exceeds it.
    pub fn latency_threshold(&self, tau: f64, mode: UrllcMode) -> Option<f64> {
        let n_h = self.analysis.hops.n_h as f64;
        let (d1, d2) = self.mean_link_distances();
        let route_km = 2.0 * d1 + (n_h - 2.0).max(0.0) * d2;
        let propagation = route_km * 1e3 / SPEED_OF_LIGHT;
        let b = self.budget.bandwidth_hz;
        match mode {
            UrllcMode::Latency => {
                let slack = tau - propagation;
                (slack > 0.0).then(|| (LN_2 * n_h * self.budget.package_size_bits / (b * slack)).exp_m1())
            }
            UrllcMode::Literal => Some((tau * LN_2 / (n_h * b) - LN_2 * propagation / (n_h * b)).exp_m1()),
        }
    }

    /// Probability that every hop clears `gamma` and the route meets the
    /// latency budget `tau`.
    pub fn urllc(&self, gamma: f64, tau: f64, mode: UrllcMode) -> Result<f64> {
        let coverage = self.coverage(gamma)?;
        match self.latency_threshold(tau, mode) {
            None => Ok(0.0),
            Some(t) if t <= 0.0 => Ok(coverage),
            Some(t) => Ok(coverage * self.coverage(t)?),
        }
    }
}

/// Coverage probability with the default fading sample size.
pub fn coverage_probability(
    gamma: f64,
    network: &Network,
    c: &ConstraintSet,
    s: &PriorityStrategy,
    budget: &LinkBudget,
) -> Result<f64> {
    CoverageModel::new(network, c, s, OwnTierExponent::Others, budget, DEFAULT_FADING_SAMPLES, 0)?.coverage(gamma)
}

/// URLLC rate with the default fading sample size and latency convention.
pub fn urllc_rate(
    gamma: f64,
    tau: f64,
    network: &Network,
    c: &ConstraintSet,
    s: &PriorityStrategy,
    budget: &LinkBudget,
) -> Result<f64> {
    CoverageModel::new(network, c, s, OwnTierExponent::Others, budget, DEFAULT_FADING_SAMPLES, 0)?.urllc(
        gamma,
        tau,
        UrllcMode::Latency,
    )
}

/// Dihedral angles between each flow's plane and the shortest-arc plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub dihedral_angles: Vec<f64>,
}

impl FlowSpec {
    pub fn new(dihedral_angles: Vec<f64>) -> Result<Self> {
        let spec = Self { dihedral_angles };
        let problems = spec.violations();
        if problems.is_empty() {
            Ok(spec)
        } else {
            Err(Error::Domain(problems.join("; ")))
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dihedral_angles.is_empty() {
            out.push("flows.dihedral_angles is empty".to_string());
        }
        for (i, &a) in self.dihedral_angles.iter().enumerate() {
            if !(0.0..PI / 2.0).contains(&a) {
                out.push(format!("flows.dihedral_angles[{i}] = {a} must lie in [0, pi/2)"));
            }
        }
        out
    }

    /// Signed launch angles for simulation: repeated angles alternate sides
    /// of the shortest arc.
    pub fn launch_angles(&self) -> Vec<f64> {
        let mut seen: Vec<(f64, usize)> = Vec::new();
        self.dihedral_angles
            .iter()
            .map(|&a| {
                let count = match seen.iter_mut().find(|(x, _)| *x == a) {
                    Some((_, n)) => {
                        *n += 1;
                        *n
                    }
                    None => {
                        seen.push((a, 0));
                        0
                    }
                };
                if count % 2 == 0 { a } else { -a }
            })
            .collect()
    }
}

/// Interruption probability of a flow whose plane is tilted by `theta` from
/// the shortest arc, scaled from the shortest-arc value `base_pm` by the
/// ratio of arc lengths.
pub fn multiflow_interruption(theta: f64, base_pm: f64, theta_m: f64) -> Result<f64> {
    if !(0.0..PI / 2.0).contains(&theta) {
        return Err(Error::Domain(format!("dihedral angle {theta} must lie in [0, pi/2)")));
    }
    let half = theta_m / 2.0;
    let q = (1.0 - (half.cos() * theta.sin()).powi(2)).sqrt();
    let arc = (half.sin() / q).min(1.0).asin();
    Ok(base_pm * (theta_m / (2.0 * q)) / arc)
}

/// Probability that every flow is interrupted, treating flows as
/// independent.
pub fn multiflow_total(flows: &FlowSpec, base_pm: f64, theta_m: f64) -> Result<f64> {
    flows
        .dihedral_angles
        .iter()
        .map(|&t| multiflow_interruption(t, base_pm, theta_m))
        .product()
}
