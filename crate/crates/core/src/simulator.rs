//! Monte Carlo routing over random tier realizations.
//!
//! Each trial draws a fresh binomial point process per tier, places the
//! transmitter at the north pole of the gateway sphere and the receiver at
//! dome angle `theta_m` along the `y = 0` meridian, and routes hop by hop:
//!
//! 1. If the receiver lies within `max_dome_angle(tier, gateway)` of the
//!    current relay, the route ends. It succeeds when that tier pair is
//!    usable and is interrupted otherwise (a gateway cannot deliver to a
//!    nearby gateway).
//! 2. Tiers are scanned in priority order. In the first tier with a feasible
//!    candidate the one closest to the receiver becomes the next relay.
//! 3. If no tier has a feasible candidate the route is interrupted.
//!
//! Hops count selected relays. Trial `i` draws from a ChaCha8 stream keyed by
//! `(seed, i)` and aggregation uses integer counters only, so estimates do
//! not depend on the thread count.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analytic::InterruptionMatrix;
use crate::error::Result;
use crate::geometry::{max_dome_angle, sample_unit_vectors, ConstraintSet, Network, SpherePoint, ANGLE_TOLERANCE};
use crate::markov::PriorityStrategy;
use crate::strategy::{dynamic_priority, penultimate_adjust, StrategyMode, MAX_EXHAUSTIVE_TIERS};

/// Forward advance is accumulated in these units to keep sums exact.
const NANORADIAN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Interrupted,
}

/// Record of one simulated route.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteTrace {
    pub outcome: Outcome,
    /// Number of relays selected.
    pub hops: usize,
    /// Tier of the transmitter followed by the tier of every relay.
    pub tier_sequence: Vec<usize>,
    /// 1-based hop at which the route failed.
    pub interrupted_at: Option<usize>,
}

/// How the tier search order is chosen at each hop.
#[derive(Debug, Clone)]
pub enum PriorityRule {
    Static(PriorityStrategy),
    /// Switches to `adjusted` once the receiver is within `window` rad.
    Penultimate { base: PriorityStrategy, adjusted: PriorityStrategy, window: f64 },
    /// `table[tier][r - 1]` is the strategy for `r` remaining hops; the
    /// remaining count is the receiver distance over `theta_bar`, rounded.
    Dynamic { table: Vec<Vec<PriorityStrategy>>, theta_bar: f64 },
}

impl PriorityRule {
    /// Penultimate adjustment of `base` inside `window`.
    pub fn penultimate(base: PriorityStrategy, p: &InterruptionMatrix, window: f64) -> Self {
        let adjusted = penultimate_adjust(&base, p);
        Self::Penultimate { base, adjusted, window }
    }

    /// Penultimate adjustment of `base`, applied whenever the relay chosen
    /// at this hop could be the last one: the receiver is within one hop
    /// plus one delivery distance of some delivering tier.
    pub fn penultimate_for(network: &Network, c: &ConstraintSet, base: PriorityStrategy, p: &InterruptionMatrix) -> Self {
        let k = network.len();
        let window = (0..k)
            .filter(|&j| p.delivers(j))
            .map(|j| {
                let reach = (0..k).map(|i| max_dome_angle(i, j, network, c)).fold(0.0, f64::max);
                reach + max_dome_angle(j, 0, network, c)
            })
            .fold(0.0, f64::max);
        Self::penultimate(base, p, window)
    }

    /// Per-hop dynamic priorities for every tier and remaining hop count up
    /// to the full transmitter-receiver distance.
    pub fn dynamic(p: &InterruptionMatrix, theta_m: f64, theta_bar: f64) -> Result<Self> {
        let max_remaining = ((theta_m / theta_bar).ceil() as usize).max(1) + 1;
        let table = (0..p.k())
            .map(|tier| (1..=max_remaining).map(|r| dynamic_priority(tier, r, p)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::Dynamic { table, theta_bar })
    }

    fn order(&self, tier: usize, to_receiver: f64) -> Vec<usize> {
        match self {
            PriorityRule::Static(s) => s.order(),
            PriorityRule::Penultimate { base, adjusted, window } => {
                if to_receiver <= *window {
                    adjusted.order()
                } else {
                    base.order()
                }
            }
            PriorityRule::Dynamic { table, theta_bar } => {
                let row = &table[tier];
                let r = ((to_receiver / theta_bar + 0.5).floor() as usize).clamp(1, row.len());
                row[r - 1].order()
            }
        }
    }
}

/// Precomputed routing state shared by all trials.
#[derive(Debug, Clone)]
pub struct Router {
    network: Network,
    constraints: ConstraintSet,
    rule: PriorityRule,
    /// `cos(theta_{i,j} + tol)`: lower bound on the dot product of a hop.
    min_dot: Vec<Vec<f64>>,
    /// `cos(theta_s - tol)`: upper bound on the dot product of a hop.
    max_dot: f64,
    /// Receiver distance below which the route ends, per tier.
    delivery_zone: Vec<f64>,
    /// Whether a relay in the tier can deliver to the receiver.
    can_deliver: Vec<bool>,
    half_sector: f64,
    receiver: Vector3<f64>,
    /// Normal of the reference plane used for the heading when the receiver
    /// has no defined bearing (antipodal receiver).
    plane_normal: Vector3<f64>,
    /// Heading of the first hop when it differs from the receiver bearing.
    launch: Option<Vector3<f64>>,
    max_hops: usize,
}

impl Router {
    pub fn new(network: &Network, c: &ConstraintSet, rule: PriorityRule) -> Self {
        let k = network.len();
        let min_dot = (0..k)
            .map(|i| (0..k).map(|j| (max_dome_angle(i, j, network, c) + ANGLE_TOLERANCE).min(std::f64::consts::PI).cos()).collect())
            .collect();
        let delivery_zone: Vec<f64> = (0..k).map(|i| max_dome_angle(i, 0, network, c)).collect();
        let can_deliver = delivery_zone.iter().map(|&z| z > c.theta_s).collect();
        let max_hops = 4 * (std::f64::consts::PI / c.theta_s).ceil() as usize + 8;
        Self {
            network: network.clone(),
            constraints: *c,
            rule,
            min_dot,
            max_dot: (c.theta_s - ANGLE_TOLERANCE).max(0.0).cos(),
            delivery_zone,
            can_deliver,
            half_sector: c.theta_r / 2.0,
            receiver: Vector3::new(c.theta_m.sin(), 0.0, c.theta_m.cos()),
            plane_normal: Vector3::new(0.0, 1.0, 0.0),
            launch: None,
            max_hops,
        }
    }

    pub fn with_strategy(network: &Network, c: &ConstraintSet, s: &PriorityStrategy) -> Self {
        Self::new(network, c, PriorityRule::Static(s.clone()))
    }

    /// Rotates the route's reference plane about the transmitter vertical by
    /// `angle` rad, so the first hop heads off the shortest arc.
    pub fn rotated(mut self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        self.plane_normal = Vector3::new(-s, c, 0.0);
        self.launch = Some(Vector3::new(c, s, 0.0));
        self
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    /// Draws one realization of every tier (unit vectors).
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<Vector3<f64>>> {
        self.network.tiers().iter().map(|t| sample_unit_vectors(t.count as usize, rng)).collect()
    }

    /// Routes once on a fresh realization.
    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> RouteTrace {
        let points = self.realize(rng);
        self.route(&points, None).0
    }

    /// Routes on a given realization and returns the relay positions too.
    pub fn run_on(&self, points: &[Vec<Vector3<f64>>]) -> (RouteTrace, Vec<SpherePoint>) {
        let mut path = Vec::new();
        let (trace, _) = self.route(points, Some(&mut path));
        (trace, path)
    }

    /// Transmitter and receiver positions on the gateway sphere.
    pub fn endpoints(&self) -> (SpherePoint, SpherePoint) {
        let r = self.network.radius(0);
        (
            SpherePoint { tier: 0, position: Vector3::new(0.0, 0.0, r) },
            SpherePoint { tier: 0, position: self.receiver * r },
        )
    }

    fn heading(&self, at: &Vector3<f64>) -> Vector3<f64> {
        let toward = self.receiver - at * at.dot(&self.receiver);
        if toward.norm() > 1e-9 {
            return toward.normalize();
        }
        let fallback = self.plane_normal.cross(at);
        let fallback = fallback - at * at.dot(&fallback);
        fallback.normalize()
    }

    /// Returns the trace and the summed forward advance toward the receiver.
    fn route(&self, points: &[Vec<Vector3<f64>>], mut path: Option<&mut Vec<SpherePoint>>) -> (RouteTrace, f64) {
        let mut current = Vector3::new(0.0, 0.0, 1.0);
        let mut tier = 0usize;
        let mut index: Option<usize> = None;
        let mut sequence = vec![0usize];
        let mut advance = 0.0;
        if let Some(p) = path.as_deref_mut() {
            p.push(self.endpoints().0);
        }
        let done = |outcome: Outcome, sequence: Vec<usize>, hop: usize| RouteTrace {
            outcome,
            hops: sequence.len() - 1,
            interrupted_at: (outcome == Outcome::Interrupted).then_some(hop),
            tier_sequence: sequence,
        };
        for hop in 1..=self.max_hops {
            let to_rx = current.dot(&self.receiver).clamp(-1.0, 1.0).acos();
            if to_rx <= self.delivery_zone[tier] + ANGLE_TOLERANCE {
                if self.can_deliver[tier] {
                    return (done(Outcome::Success, sequence, hop), advance);
                }
                if hop > 1 {
                    return (done(Outcome::Interrupted, sequence, hop), advance);
                }
            }
            let heading = match self.launch {
                Some(h) if hop == 1 => h,
                _ => self.heading(&current),
            };
            let side = current.cross(&heading);
            let mut chosen = None;
            for j in self.rule.order(tier, to_rx) {
                let lo = self.min_dot[tier][j];
                let mut best: Option<(usize, f64)> = None;
                for (idx, p) in points[j].iter().enumerate() {
                    let d = p.dot(&current);
                    if d < lo || d > self.max_dot {
                        continue;
                    }
                    if j == tier && index == Some(idx) {
                        continue;
                    }
                    let deviation = p.dot(&side).abs().atan2(p.dot(&heading));
                    if deviation > self.half_sector + ANGLE_TOLERANCE {
                        continue;
                    }
                    let score = p.dot(&self.receiver);
                    if best.is_none_or(|(_, s)| score > s) {
                        best = Some((idx, score));
                    }
                }
                if let Some((idx, _)) = best {
                    chosen = Some((j, idx));
                    break;
                }
            }
            let Some((j, idx)) = chosen else {
                return (done(Outcome::Interrupted, sequence, hop), advance);
            };
            let next = points[j][idx];
            advance += to_rx - next.dot(&self.receiver).clamp(-1.0, 1.0).acos();
            current = next;
            tier = j;
            index = Some(idx);
            sequence.push(j);
            if let Some(p) = path.as_deref_mut() {
                p.push(SpherePoint { tier: j, position: next * self.network.radius(j) });
            }
        }
        let hop = sequence.len();
        (done(Outcome::Interrupted, sequence, hop), advance)
    }
}

/// The routing rule a strategy mode simulates with: dynamic mode uses
/// per-hop priorities, stationary-optimal mode (or any mode when
/// `penultimate` is set) adjusts the strategy near the receiver, and every
/// other mode routes with `s` unchanged.
pub fn routing_rule(
    mode: StrategyMode,
    s: &PriorityStrategy,
    network: &Network,
    c: &ConstraintSet,
    p: &InterruptionMatrix,
    theta_bar: f64,
    penultimate: bool,
) -> Result<PriorityRule> {
    Ok(match mode {
        StrategyMode::Dynamic => PriorityRule::dynamic(p, c.theta_m, theta_bar)?,
        StrategyMode::StationaryOptimal => PriorityRule::penultimate_for(network, c, s.clone(), p),
        _ if penultimate => PriorityRule::penultimate_for(network, c, s.clone(), p),
        _ => PriorityRule::Static(s.clone()),
    })
}

/// Routes once with a static strategy on a fresh realization.
pub fn run_route<R: Rng + ?Sized>(network: &Network, c: &ConstraintSet, s: &PriorityStrategy, rng: &mut R) -> RouteTrace {
    Router::with_strategy(network, c, s).run(rng)
}

/// The RNG of trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Aggregated Monte Carlo results.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationEstimate {
    pub iterations: u64,
    pub interruptions: u64,
    pub interruption_probability: f64,
    pub standard_error: f64,
    /// Mean relay count of successful routes; NaN when none succeeded.
    pub mean_hops_success: f64,
    /// Relay count of every trial.
    pub hop_histogram: BTreeMap<usize, u64>,
    /// Relay count of successful trials.
    pub success_histogram: BTreeMap<usize, u64>,
    /// `per_hop_interruptions[h - 1]` counts routes interrupted at hop `h`.
    pub per_hop_interruptions: Vec<u64>,
    /// Mean decrease of the dome angle to the receiver per relay hop.
    pub mean_forward_advance: f64,
}

#[derive(Debug, Default, Clone)]
struct Tally {
    trials: u64,
    interruptions: u64,
    success_hops: u64,
    relay_hops: u64,
    advance_nrad: i64,
    hops: BTreeMap<usize, u64>,
    success: BTreeMap<usize, u64>,
    per_hop: Vec<u64>,
}

impl Tally {
    fn add(mut self, trace: &RouteTrace, advance: f64) -> Self {
        self.trials += 1;
        self.relay_hops += trace.hops as u64;
        self.advance_nrad += (advance / NANORADIAN).round() as i64;
        *self.hops.entry(trace.hops).or_default() += 1;
        match trace.outcome {
            Outcome::Success => {
                self.success_hops += trace.hops as u64;
                *self.success.entry(trace.hops).or_default() += 1;
            }
            Outcome::Interrupted => {
                self.interruptions += 1;
                let at = trace.interrupted_at.unwrap_or(trace.hops + 1);
                if self.per_hop.len() < at {
                    self.per_hop.resize(at, 0);
                }
                self.per_hop[at - 1] += 1;
            }
        }
        self
    }

    fn merge(mut self, other: Self) -> Self {
        self.trials += other.trials;
        self.interruptions += other.interruptions;
        self.success_hops += other.success_hops;
        self.relay_hops += other.relay_hops;
        self.advance_nrad += other.advance_nrad;
        for (k, v) in other.hops {
            *self.hops.entry(k).or_default() += v;
        }
        for (k, v) in other.success {
            *self.success.entry(k).or_default() += v;
        }
        if self.per_hop.len() < other.per_hop.len() {
            self.per_hop.resize(other.per_hop.len(), 0);
        }
        for (i, v) in other.per_hop.into_iter().enumerate() {
            self.per_hop[i] += v;
        }
        self
    }

    fn finish(self) -> SimulationEstimate {
        let n = self.trials as f64;
        let p = self.interruptions as f64 / n;
        let successes = self.trials - self.interruptions;
        SimulationEstimate {
            iterations: self.trials,
            interruptions: self.interruptions,
            interruption_probability: p,
            standard_error: (p * (1.0 - p) / n).sqrt(),
            mean_hops_success: if successes > 0 { self.success_hops as f64 / successes as f64 } else { f64::NAN },
            hop_histogram: self.hops,
            success_histogram: self.success,
            per_hop_interruptions: self.per_hop,
            mean_forward_advance: if self.relay_hops > 0 {
                self.advance_nrad as f64 * NANORADIAN / self.relay_hops as f64
            } else {
                f64::NAN
            },
        }
    }
}

impl Router {
    /// Runs `iterations` independent trials in parallel.
    pub fn estimate(&self, iterations: u64, seed: u64) -> SimulationEstimate {
        assert!(iterations >= 1, "at least one trial is required");
        (0..iterations)
            .into_par_iter()
            .fold(Tally::default, |tally, i| {
                let mut rng = trial_rng(seed, i);
                let points = self.realize(&mut rng);
                let (trace, advance) = self.route(&points, None);
                tally.add(&trace, advance)
            })
            .reduce(Tally::default, Tally::merge)
            .finish()
    }
}

/// Monte Carlo interruption estimate for a static strategy.
pub fn estimate(network: &Network, c: &ConstraintSet, s: &PriorityStrategy, iterations: u64, seed: u64) -> SimulationEstimate {
    Router::with_strategy(network, c, s).estimate(iterations, seed)
}

/// Simulates every strategy with common random numbers and sorts by
/// estimated interruption (ties by strategy).
pub fn exhaustive_search(
    network: &Network,
    c: &ConstraintSet,
    iterations: u64,
    seed: u64,
) -> Result<Vec<(PriorityStrategy, SimulationEstimate)>> {
    let k = network.len();
    if k > MAX_EXHAUSTIVE_TIERS {
        return Err(crate::error::Error::TooManyTiers { tiers: k, limit: MAX_EXHAUSTIVE_TIERS });
    }
    let mut out: Vec<(PriorityStrategy, SimulationEstimate)> = crate::strategy::all_strategies(k)
        .into_iter()
        .map(|s| {
            let e = estimate(network, c, &s, iterations, seed);
            (s, e)
        })
        .collect();
    out.sort_by(|a, b| {
        a.1.interruption_probability
            .total_cmp(&b.1.interruption_probability)
            .then_with(|| a.0.cmp(&b.0))
    });
    Ok(out)
}

/// Empirical probability that a relay of tier `i` finds no feasible relay in
/// tier `j`, with the receiver direction fixed. Returns `(estimate, stderr)`.
pub fn void_probability(network: &Network, c: &ConstraintSet, i: usize, j: usize, trials: u64, seed: u64) -> (f64, f64) {
    let theta = max_dome_angle(i, j, network, c);
    let (lo, hi) = ((theta + ANGLE_TOLERANCE).cos(), (c.theta_s - ANGLE_TOLERANCE).cos());
    let n = if i == j { network.count(j).saturating_sub(1) } else { network.count(j) } as usize;
    let here = Vector3::new(0.0, 0.0, 1.0);
    let heading = Vector3::new(1.0, 0.0, 0.0);
    let side = here.cross(&heading);
    let half = c.theta_r / 2.0;
    let voids: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let found = sample_unit_vectors(n, &mut rng).iter().any(|p| {
                let d = p.dot(&here);
                d >= lo && d <= hi && p.dot(&side).abs().atan2(p.dot(&heading)) <= half + ANGLE_TOLERANCE
            });
            u64::from(!found)
        })
        .sum();
    let p = voids as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

/// Joint interruption of several flows sharing each realization: the
/// fraction of trials in which every flow is interrupted. Flow `f` leaves the
/// transmitter rotated by `angles[f]` rad from the shortest arc.
pub fn estimate_multiflow(
    network: &Network,
    c: &ConstraintSet,
    s: &PriorityStrategy,
    angles: &[f64],
    iterations: u64,
    seed: u64,
) -> (f64, f64) {
    let base = Router::with_strategy(network, c, s);
    let routers: Vec<Router> = angles.iter().map(|&a| base.clone().rotated(a)).collect();
    let failures: u64 = (0..iterations)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let points = base.realize(&mut rng);
            let all_failed = routers.iter().all(|r| r.route(&points, None).0.outcome == Outcome::Interrupted);
            u64::from(all_failed)
        })
        .sum();
    let p = failures as f64 / iterations as f64;
    (p, (p * (1.0 - p) / iterations as f64).sqrt())
}
