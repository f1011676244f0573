//! Tier-level Markov chains of a multi-hop route.
//!
//! A route moves between tiers hop by hop; the tier of the next relay depends
//! only on the tier of the current one and on the priority strategy. Three
//! transition matrices describe the chain:
//!
//! * `T1` (`K x K`): next-tier distribution given that a relay was found.
//! * `T2` (`K+1 x K+1`): the same transitions unnormalized, plus an absorbing
//!   "interrupted" state entered with the single-hop interruption probability.
//! * `T3` (`K+1 x K+1`): the penultimate hop, where tiers that cannot reach
//!   the gateway tier are useless and their mass moves to the absorbing state.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analytic::{tier_interruption_matrix_with, InterruptionMatrix, OwnTierExponent, SingleHopVector};
use crate::error::{Error, Result};
use crate::geometry::{max_dome_angle, ConstraintSet, Network};

/// Tier selection priorities. `ranks[i]` is the rank of tier `i`; rank 1 is
/// searched first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct PriorityStrategy {
    ranks: Vec<usize>,
}

impl PriorityStrategy {
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        let k = ranks.len();
        if k == 0 {
            return Err(Error::InvalidStrategy("empty strategy".into()));
        }
        let mut seen = vec![false; k];
        for &r in &ranks {
            if r == 0 || r > k || seen[r - 1] {
                return Err(Error::InvalidStrategy(format!("{ranks:?} is not a permutation of 1..={k}")));
            }
            seen[r - 1] = true;
        }
        Ok(Self { ranks })
    }

    /// Strategy that searches tiers in the given order (0-based tier indices).
    pub fn from_order(order: &[usize]) -> Result<Self> {
        let mut ranks = vec![0; order.len()];
        for (pos, &tier) in order.iter().enumerate() {
            if tier >= order.len() || ranks[tier] != 0 {
                return Err(Error::InvalidStrategy(format!("{order:?} is not an ordering of the tiers")));
            }
            ranks[tier] = pos + 1;
        }
        Self::new(ranks)
    }

    /// Searches tiers in index order.
    pub fn identity(k: usize) -> Self {
        Self { ranks: (1..=k).collect() }
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn rank(&self, tier: usize) -> usize {
        self.ranks[tier]
    }

    pub fn k(&self) -> usize {
        self.ranks.len()
    }

    /// Tier indices (0-based) in search order.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.ranks.len()];
        for (tier, &r) in self.ranks.iter().enumerate() {
            order[r - 1] = tier;
        }
        order
    }
}

impl TryFrom<Vec<usize>> for PriorityStrategy {
    type Error = Error;

    fn try_from(ranks: Vec<usize>) -> Result<Self> {
        Self::new(ranks)
    }
}

impl From<PriorityStrategy> for Vec<usize> {
    fn from(s: PriorityStrategy) -> Self {
        s.ranks
    }
}

impl fmt::Display for PriorityStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.ranks.iter().map(|r| r.to_string()).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

impl FromStr for PriorityStrategy {
    type Err = Error;

    /// Accepts `3,2,1`, `3 2 1` or `[3 2 1]`.
    fn from_str(s: &str) -> Result<Self> {
        let ranks = s
            .trim()
            .trim_start_matches('[')
            .trim_end_matches(']')
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<usize>().map_err(|_| Error::InvalidStrategy(format!("bad rank {t:?} in {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ranks)
    }
}

fn check_dims(s: &PriorityStrategy, p: &InterruptionMatrix) {
    assert_eq!(s.k(), p.k(), "strategy and interruption matrix disagree on the tier count");
}

/// Unnormalized next-tier probabilities plus the absorbing column.
pub fn build_t2(s: &PriorityStrategy, p: &InterruptionMatrix) -> DMatrix<f64> {
    check_dims(s, p);
    let k = p.k();
    let order = s.order();
    let mut t = DMatrix::zeros(k + 1, k + 1);
    for i in 0..k {
        let mut none_so_far = 1.0;
        for &j in &order {
            t[(i, j)] = (1.0 - p.get(i, j)) * none_so_far;
            none_so_far *= p.get(i, j);
        }
        t[(i, k)] = none_so_far;
    }
    t[(k, k)] = 1.0;
    t
}

/// Next-tier distribution conditioned on finding a relay. Rows of tiers that
/// never find a relay are zero.
pub fn build_t1(s: &PriorityStrategy, p: &InterruptionMatrix) -> DMatrix<f64> {
    let k = p.k();
    let t2 = build_t2(s, p);
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        let found: f64 = (0..k).map(|j| t2[(i, j)]).sum();
        if found > 0.0 {
            for j in 0..k {
                t[(i, j)] = t2[(i, j)] / found;
            }
        }
    }
    t
}

/// Penultimate-hop transitions: tiers that cannot deliver to the receiver are
/// skipped, and their mass is absorbed.
pub fn build_t3(s: &PriorityStrategy, p: &InterruptionMatrix) -> DMatrix<f64> {
    check_dims(s, p);
    let k = p.k();
    let order = s.order();
    let mut t = DMatrix::zeros(k + 1, k + 1);
    for i in 0..k {
        let mut none_so_far = 1.0;
        let mut moved = 0.0;
        for &j in &order {
            if !p.delivers(j) {
                continue;
            }
            let v = (1.0 - p.get(i, j)) * none_so_far;
            t[(i, j)] = v;
            moved += v;
            none_so_far *= p.get(i, j);
        }
        t[(i, k)] = 1.0 - moved;
    }
    t[(k, k)] = 1.0;
    t
}

/// The three transition matrices of one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrices {
    pub t1: DMatrix<f64>,
    pub t2: DMatrix<f64>,
    pub t3: DMatrix<f64>,
}

impl TransitionMatrices {
    pub fn build(s: &PriorityStrategy, p: &InterruptionMatrix) -> Self {
        Self { t1: build_t1(s, p), t2: build_t2(s, p), t3: build_t3(s, p) }
    }

    pub fn k(&self) -> usize {
        self.t1.nrows()
    }
}

/// Tiers reachable from the gateway tier in one or more hops, following
/// edges `i -> j` with `P^I_{i,j} != 1`. Sorted ascending.
pub fn reachable_tiers(p: &InterruptionMatrix) -> Vec<usize> {
    let k = p.k();
    let mut seen = vec![false; k];
    let mut queue: VecDeque<usize> = VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        for j in 0..k {
            if !seen[j] && !p.is_blocked(i, j) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    (0..k).filter(|&j| seen[j]).collect()
}

/// States reachable from `start` (inclusive) along positive entries of the
/// leading `n x n` block of `m`.
fn closure(m: &DMatrix<f64>, n: usize, start: usize) -> Vec<usize> {
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if !seen[j] && m[(i, j)] > 0.0 {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    (0..n).filter(|&j| seen[j]).collect()
}

/// Largest accepted `||v T1 - v||_inf` of a stationary solution.
const STATIONARY_RESIDUAL: f64 = 1e-9;

/// Long-run tier occupancy of a route that keeps finding relays.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub weights: DVector<f64>,
}

impl StationaryDistribution {
    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        self.weights.as_slice()
    }

    /// `(v, 0)`: the distribution lifted onto the augmented state space.
    pub fn augmented(&self) -> DVector<f64> {
        let k = self.weights.len();
        DVector::from_fn(k + 1, |i, _| if i < k { self.weights[i] } else { 0.0 })
    }
}

/// Solves `v T1 = v`, `sum(v) = 1` on the tiers reachable from the gateway
/// tier. Tiers outside that set get weight zero.
pub fn stationary_distribution(t1: &DMatrix<f64>) -> Result<StationaryDistribution> {
    let k = t1.nrows();
    let live = |i: usize| (0..k).any(|j| t1[(i, j)] > 0.0);
    if !live(0) {
        return Err(Error::NoStationary("the gateway tier has no outgoing transitions".into()));
    }
    let states: Vec<usize> = closure(t1, k, 0).into_iter().filter(|&i| live(i)).collect();
    let n = states.len();
    let mut a = DMatrix::from_fn(n, n, |r, c| t1[(states[c], states[r])] - if r == c { 1.0 } else { 0.0 });
    let mut b = DVector::zeros(n);
    for c in 0..n {
        a[(n - 1, c)] = 1.0;
    }
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NoStationary("the reachable chain has several closed classes".into()))?;
    let mut weights = DVector::zeros(k);
    for (idx, &s) in states.iter().enumerate() {
        weights[s] = x[idx].max(0.0);
    }
    let total = weights.sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::NoStationary("degenerate solution".into()));
    }
    weights /= total;
    let residual = (t1.transpose() * &weights - &weights).amax();
    if residual > STATIONARY_RESIDUAL {
        return Err(Error::NoStationary(format!("reachable tiers lose mass to dead tiers (residual {residual:.3e})")));
    }
    Ok(StationaryDistribution { weights })
}

/// Expected number of hops before interruption from each tier, solving
/// `mu_i = 1 + sum_j T2_{i,j} mu_j` over the gateway tier and `reachable`.
/// Other tiers get zero.
pub fn hops_before_interruption(t2: &DMatrix<f64>, reachable: &[usize]) -> Result<DVector<f64>> {
    let k = t2.nrows() - 1;
    let mut states: Vec<usize> = reachable.to_vec();
    if !states.contains(&0) {
        states.push(0);
    }
    states.sort_unstable();
    states.dedup();

    // Every state must be able to reach the absorbing state.
    let mut absorbs = vec![false; k];
    let mut changed = true;
    while changed {
        changed = false;
        for &i in &states {
            if !absorbs[i] && (t2[(i, k)] > 0.0 || (0..k).any(|j| absorbs[j] && t2[(i, j)] > 0.0)) {
                absorbs[i] = true;
                changed = true;
            }
        }
    }
    if let Some(&tier) = states.iter().find(|&&i| !absorbs[i]) {
        return Err(Error::NonAbsorbing { tier });
    }

    let n = states.len();
    let a = DMatrix::from_fn(n, n, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id - t2[(states[r], states[c])]
    });
    let ones = DVector::from_element(n, 1.0);
    let x = a.lu().solve(&ones).ok_or(Error::NonAbsorbing { tier: states[0] })?;
    let mut mu = DVector::zeros(k);
    for (idx, &s) in states.iter().enumerate() {
        mu[s] = x[idx];
    }
    Ok(mu)
}

/// `prod_{k=1}^{n} (2k-1)/(2k)`.
pub fn wallis_product(n: u64) -> f64 {
    (1..=n).map(|k| ((2 * k - 1) as f64 / (2 * k) as f64).ln()).sum::<f64>().exp()
}

/// Expected dome angle of the nearest relay from tier `i` in tier `j`.
pub fn mean_pair_dome_angle(i: usize, j: usize, network: &Network, c: &ConstraintSet) -> f64 {
    let n = if i == j { network.count(j).saturating_sub(1) } else { network.count(j) };
    let g = 2.0 * std::f64::consts::PI / c.theta_r;
    let theta_ij = max_dome_angle(i, j, network, c);
    let arg = g - g * (std::f64::consts::PI * wallis_product(n)).cos() + theta_ij.cos();
    arg.clamp(-1.0, 1.0).acos()
}

/// Mean forward dome angle per hop, weighted by stationary occupancy and
/// transition probabilities.
pub fn mean_forward_dome_angle(
    t1: &DMatrix<f64>,
    v: &StationaryDistribution,
    network: &Network,
    c: &ConstraintSet,
) -> f64 {
    let k = t1.nrows();
    let mut total = 0.0;
    for i in 0..k {
        if v.get(i) == 0.0 {
            continue;
        }
        for j in 0..k {
            if t1[(i, j)] > 0.0 {
                total += v.get(i) * t1[(i, j)] * mean_pair_dome_angle(i, j, network, c);
            }
        }
    }
    total
}

/// Expected hop count of a successful route: `theta_m / theta_bar` rounded
/// half up, at least 1.
pub fn hops_for_success(theta_m: f64, theta_bar: f64) -> Result<usize> {
    if !(theta_bar > 0.0) {
        return Err(Error::Domain(format!("mean forward dome angle {theta_bar} must be positive")));
    }
    Ok(((theta_m / theta_bar + 0.5).floor() as usize).max(1))
}

fn absorbed_after(t2: &DMatrix<f64>, t3: Option<&DMatrix<f64>>, start: usize, steps: usize) -> f64 {
    let n = t2.nrows();
    let mut x = DVector::zeros(n).transpose();
    x[start] = 1.0;
    for _ in 0..steps {
        x *= t2;
    }
    if let Some(t3) = t3 {
        x *= t3;
    }
    x[n - 1]
}

/// Probability that a route of `n_h` hops starting in the gateway tier is
/// interrupted: `e1 T2^(n_h-2) T3 e_{K+1}`.
pub fn multihop_interruption(t2: &DMatrix<f64>, t3: &DMatrix<f64>, n_h: usize) -> Result<f64> {
    multihop_interruption_from(t2, t3, 0, n_h)
}

/// As [`multihop_interruption`], starting in tier `start`.
pub fn multihop_interruption_from(t2: &DMatrix<f64>, t3: &DMatrix<f64>, start: usize, n_h: usize) -> Result<f64> {
    if n_h < 2 {
        return Err(Error::Domain(format!("multi-hop interruption needs at least 2 hops, got {n_h}")));
    }
    Ok(absorbed_after(t2, Some(t3), start, n_h - 2))
}

/// Interruption probability accumulated within the first `n` hops of a route
/// that is expected to need `n_e` hops.
pub fn cumulative_interruption(n: usize, n_e: usize, t2: &DMatrix<f64>, t3: &DMatrix<f64>) -> Result<f64> {
    if n_e < 2 {
        return Err(Error::Domain(format!("expected hop count must be at least 2, got {n_e}")));
    }
    if n + 1 < n_e {
        Ok(absorbed_after(t2, None, 0, n))
    } else {
        Ok(absorbed_after(t2, Some(t3), 0, n_e - 2))
    }
}

/// `sum_i v_i P^S_i`.
pub fn weighted_single_hop(v: &StationaryDistribution, ps: &SingleHopVector) -> f64 {
    v.as_slice().iter().zip(ps.as_slice()).map(|(a, b)| a * b).sum()
}

/// Hop-count summary of a strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct HopStatistics {
    /// Expected hops before interruption per starting tier.
    pub mu: DVector<f64>,
    /// Expected hops of a successful route.
    pub n_h: usize,
    /// Mean forward dome angle per hop, rad.
    pub theta_bar: f64,
}

/// Every analytic quantity of one (network, constraints, strategy) triple.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub interruption: InterruptionMatrix,
    pub single_hop: SingleHopVector,
    pub strategy: PriorityStrategy,
    pub matrices: TransitionMatrices,
    pub reachable: Vec<usize>,
    pub stationary: StationaryDistribution,
    pub hops: HopStatistics,
    /// `e1 T2^(n_h-2) T3 e_{K+1}` with `n_h` from [`HopStatistics`], raised to
    /// 2 for very short routes.
    pub multihop: f64,
}

impl Analysis {
    /// Multi-hop interruption for a route of `n_h` hops.
    pub fn multihop_at(&self, n_h: usize) -> Result<f64> {
        multihop_interruption(&self.matrices.t2, &self.matrices.t3, n_h)
    }

    /// `(v, 0) T2`; its last entry is the weighted single-hop interruption.
    pub fn one_step(&self) -> DVector<f64> {
        (self.stationary.augmented().transpose() * &self.matrices.t2).transpose()
    }

    pub fn weighted_single_hop(&self) -> f64 {
        weighted_single_hop(&self.stationary, &self.single_hop)
    }
}

/// Runs the full analytic pipeline.
pub fn analyze(network: &Network, c: &ConstraintSet, strategy: &PriorityStrategy, own: OwnTierExponent) -> Result<Analysis> {
    if strategy.k() != network.len() {
        return Err(Error::InvalidStrategy(format!(
            "strategy {strategy} ranks {} tiers but the network has {}",
            strategy.k(),
            network.len()
        )));
    }
    let interruption = tier_interruption_matrix_with(network, c, own);
    analyze_matrix(network, c, strategy, interruption)
}

/// Runs the pipeline on a precomputed interruption matrix.
pub fn analyze_matrix(
    network: &Network,
    c: &ConstraintSet,
    strategy: &PriorityStrategy,
    interruption: InterruptionMatrix,
) -> Result<Analysis> {
    let single_hop = interruption.single_hop();
    let matrices = TransitionMatrices::build(strategy, &interruption);
    let reachable = reachable_tiers(&interruption);
    let stationary = stationary_distribution(&matrices.t1)?;
    let mu = hops_before_interruption(&matrices.t2, &reachable)?;
    let theta_bar = mean_forward_dome_angle(&matrices.t1, &stationary, network, c);
    let n_h = hops_for_success(c.theta_m, theta_bar)?;
    let multihop = multihop_interruption(&matrices.t2, &matrices.t3, n_h.max(2))?;
    Ok(Analysis {
        interruption,
        single_hop,
        strategy: strategy.clone(),
        matrices,
        reachable,
        stationary,
        hops: HopStatistics { mu, n_h, theta_bar },
        multihop,
    })
}
