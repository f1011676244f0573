//! Priority-strategy generation: exhaustive stationary-optimal search, two
//! cheap heuristics, the penultimate-hop adjustment and per-hop dynamic
//! priorities.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{InterruptionMatrix, SingleHopVector};
use crate::error::{Error, Result};
use crate::geometry::{ConstraintSet, Network};
use crate::markov::{
    analyze_matrix, build_t1, build_t2, build_t3, multihop_interruption_from, stationary_distribution,
    PriorityStrategy, StationaryDistribution,
};

/// Largest tier count for which every permutation is evaluated.
pub const MAX_EXHAUSTIVE_TIERS: usize = 8;

/// Values closer than this are treated as ties.
const TIE_TOLERANCE: f64 = 1e-12;

/// Analytic summary of one strategy.
#[derive(Debug, Clone)]
pub struct StrategyReport {
    pub strategy: PriorityStrategy,
    pub stationary: StationaryDistribution,
    /// `(v, 0) T2`; the last entry is the weighted single-hop interruption.
    pub one_step: DVector<f64>,
    pub weighted_interruption: f64,
    /// Multi-hop interruption with this strategy's own expected hop count.
    pub analytic_multihop: f64,
    pub n_h: usize,
}

/// Every permutation of `1..=k`, in lexicographic order.
pub fn all_strategies(k: usize) -> Vec<PriorityStrategy> {
    (1..=k)
        .permutations(k)
        .map(|ranks| PriorityStrategy::new(ranks).expect("permutation"))
        .collect()
}

fn check_exhaustive(k: usize) -> Result<()> {
    if k > MAX_EXHAUSTIVE_TIERS {
        Err(Error::TooManyTiers { tiers: k, limit: MAX_EXHAUSTIVE_TIERS })
    } else {
        Ok(())
    }
}

/// Weighted single-hop interruption `sum_i v_i P^S_i` of a strategy, or
/// `None` when its chain has no stationary distribution.
pub fn strategy_weighted_interruption(s: &PriorityStrategy, p: &InterruptionMatrix) -> Option<f64> {
    let v = stationary_distribution(&build_t1(s, p)).ok()?;
    let k = p.k();
    let t2 = build_t2(s, p);
    Some((0..k).map(|i| v.get(i) * t2[(i, k)]).sum())
}

/// The strategy minimizing the weighted single-hop interruption over all
/// `K!` orderings. Values within `TIE_TOLERANCE` of the minimum are ties,
/// which go to the lexicographically smallest rank vector.
pub fn stationary_optimal(p: &InterruptionMatrix) -> Result<PriorityStrategy> {
    check_exhaustive(p.k())?;
    let scored: Vec<(f64, PriorityStrategy)> = all_strategies(p.k())
        .into_par_iter()
        .filter_map(|s| strategy_weighted_interruption(&s, p).map(|w| (w, s)))
        .collect();
    let best = scored.iter().map(|(w, _)| *w).min_by(f64::total_cmp).ok_or(Error::NoFeasibleStrategy)?;
    Ok(scored
        .into_iter()
        .filter(|(w, _)| *w <= best + TIE_TOLERANCE)
        .map(|(_, s)| s)
        .min()
        .expect("the minimum is attained"))
}

/// Full analytic report for one strategy.
pub fn strategy_report(
    network: &Network,
    c: &ConstraintSet,
    p: &InterruptionMatrix,
    s: &PriorityStrategy,
) -> Result<StrategyReport> {
    let a = analyze_matrix(network, c, s, p.clone())?;
    Ok(StrategyReport {
        strategy: s.clone(),
        one_step: a.one_step(),
        weighted_interruption: a.weighted_single_hop(),
        stationary: a.stationary,
        analytic_multihop: a.multihop,
        n_h: a.hops.n_h,
    })
}

/// Reports for every strategy, sorted by weighted interruption (ties by
/// strategy). Strategies without a stationary distribution are skipped.
pub fn evaluate_strategies(network: &Network, c: &ConstraintSet, p: &InterruptionMatrix) -> Result<Vec<StrategyReport>> {
    check_exhaustive(p.k())?;
    let mut reports: Vec<StrategyReport> = all_strategies(p.k())
        .into_par_iter()
        .filter_map(|s| strategy_report(network, c, p, &s).ok())
        .collect();
    if reports.is_empty() {
        return Err(Error::NoFeasibleStrategy);
    }
    reports.sort_by(|a, b| {
        a.weighted_interruption
            .total_cmp(&b.weighted_interruption)
            .then_with(|| a.strategy.cmp(&b.strategy))
    });
    Ok(reports)
}

/// Ranks tiers by ascending single-hop interruption; ties by tier index.
pub fn single_hop_inspired(ps: &SingleHopVector) -> PriorityStrategy {
    let order: Vec<usize> = (0..ps.len()).sorted_by(|&a, &b| ps.get(a).total_cmp(&ps.get(b))).collect();
    PriorityStrategy::from_order(&order).expect("ordering of all tiers")
}

/// Ranks satellite tiers by descending device density; the gateway tier and
/// tiers outside `reachable` go last, in index order.
pub fn density_inspired(network: &Network, reachable: &[usize]) -> PriorityStrategy {
    let k = network.len();
    let (mut front, back): (Vec<usize>, Vec<usize>) = (0..k).partition(|&i| i != 0 && reachable.contains(&i));
    front.sort_by(|&a, &b| {
        let (da, db) = (network.tiers()[a].density(), network.tiers()[b].density());
        db.total_cmp(&da).then(a.cmp(&b))
    });
    front.extend(back);
    PriorityStrategy::from_order(&front).expect("ordering of all tiers")
}

/// Tier indices ordered by descending density, gateways included.
pub fn density_order(network: &Network) -> Vec<usize> {
    (0..network.len())
        .sorted_by(|&a, &b| {
            let (da, db) = (network.tiers()[a].density(), network.tiers()[b].density());
            db.total_cmp(&da).then(a.cmp(&b))
        })
        .collect()
}

/// Moves tiers that cannot deliver to the receiver behind every tier that
/// can, keeping the relative order inside each group.
pub fn penultimate_adjust(s: &PriorityStrategy, p: &InterruptionMatrix) -> PriorityStrategy {
    let (mut open, blocked): (Vec<usize>, Vec<usize>) = s.order().into_iter().partition(|&j| p.delivers(j));
    open.extend(blocked);
    PriorityStrategy::from_order(&open).expect("ordering of all tiers")
}

/// Interruption probability of the rest of a route from `current_tier` with
/// `remaining_hops` hops left, under strategy `s`.
pub fn remaining_interruption(s: &PriorityStrategy, p: &InterruptionMatrix, current_tier: usize, remaining_hops: usize) -> f64 {
    let t3 = build_t3(s, p);
    if remaining_hops <= 2 {
        let k = p.k();
        let mut x = DMatrix::zeros(1, k + 1);
        x[current_tier] = 1.0;
        return (x * t3)[k];
    }
    let t2 = build_t2(s, p);
    multihop_interruption_from(&t2, &t3, current_tier, remaining_hops).expect("at least two hops")
}

/// The strategy minimizing [`remaining_interruption`].
///
/// Near-ties are resolved in favor of the greedy ordering for the current
/// tier (descending `1 - P^I_{current,j}`, non-delivering tiers last), then
/// lexicographically.
pub fn dynamic_priority(current_tier: usize, remaining_hops: usize, p: &InterruptionMatrix) -> Result<PriorityStrategy> {
    check_exhaustive(p.k())?;
    if remaining_hops == 0 {
        return Err(Error::Domain("remaining hop count must be at least 1".into()));
    }
    let greedy = greedy_priority(current_tier, p);
    let scored: Vec<(f64, PriorityStrategy)> = all_strategies(p.k())
        .into_par_iter()
        .map(|s| (remaining_interruption(&s, p, current_tier, remaining_hops), s))
        .collect();
    let best = scored.iter().map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
    let tied: Vec<&PriorityStrategy> =
        scored.iter().filter(|(v, _)| *v <= best + TIE_TOLERANCE).map(|(_, s)| s).collect();
    if tied.contains(&&greedy) {
        return Ok(greedy);
    }
    Ok(tied.into_iter().min().expect("nonempty").clone())
}

/// Orders tiers by descending chance of finding a relay from `current_tier`,
/// with tiers that cannot deliver to the receiver last.
pub fn greedy_priority(current_tier: usize, p: &InterruptionMatrix) -> PriorityStrategy {
    let order: Vec<usize> = (0..p.k())
        .sorted_by(|&a, &b| {
            (!p.delivers(a))
                .cmp(&!p.delivers(b))
                .then(p.get(current_tier, a).total_cmp(&p.get(current_tier, b)))
                .then(a.cmp(&b))
        })
        .collect();
    PriorityStrategy::from_order(&order).expect("ordering of all tiers")
}

/// How a configuration picks its priority strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyMode {
    Explicit,
    #[default]
    StationaryOptimal,
    SingleHop,
    Density,
    /// Per-hop priorities; analytic outputs use the stationary-optimal
    /// strategy.
    Dynamic,
}

impl StrategyMode {
    /// The static strategy this mode selects for `network`.
    pub fn select(
        self,
        network: &Network,
        p: &InterruptionMatrix,
        explicit: Option<&PriorityStrategy>,
    ) -> Result<PriorityStrategy> {
        match self {
            StrategyMode::Explicit => explicit
                .cloned()
                .ok_or_else(|| Error::InvalidStrategy("explicit mode needs a strategy".into())),
            StrategyMode::StationaryOptimal | StrategyMode::Dynamic => stationary_optimal(p),
            StrategyMode::SingleHop => Ok(single_hop_inspired(&p.single_hop())),
            StrategyMode::Density => Ok(density_inspired(network, &crate::markov::reachable_tiers(p))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StrategyMode::Explicit => "explicit",
            StrategyMode::StationaryOptimal => "stationary_optimal",
            StrategyMode::SingleHop => "single_hop",
            StrategyMode::Density => "density",
            StrategyMode::Dynamic => "dynamic",
        }
    }
}
