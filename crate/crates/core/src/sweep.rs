//! Parameter sweeps over network layouts, emitted as long-format rows.

use serde::{Deserialize, Serialize};

use crate::analytic::{tier_interruption_matrix_with, InterruptionMatrix};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::geometry::{Network, TierSpec};
use crate::link_metrics::{availability, CoverageModel, UrllcMode};
use crate::markov::{analyze, PriorityStrategy};
use crate::simulator::{exhaustive_search, routing_rule, Router, SimulationEstimate};
use crate::strategy::{stationary_optimal, StrategyMode};

fn default_five_tier_heights() -> Vec<f64> {
    vec![0.0, 300.0, 600.0, 900.0, 1200.0]
}
fn default_base_count() -> u64 {
    300
}
fn default_series() -> Vec<StrategyMode> {
    vec![StrategyMode::StationaryOptimal, StrategyMode::SingleHop, StrategyMode::Density]
}
fn default_true() -> bool {
    true
}
fn default_total() -> u64 {
    1500
}
fn default_lowest() -> f64 {
    300.0
}
fn default_highest() -> f64 {
    1200.0
}
fn default_gateways() -> u64 {
    500
}
fn default_layouts() -> Vec<Vec<f64>> {
    vec![vec![600.0], vec![900.0], vec![1200.0], vec![600.0, 900.0, 1200.0]]
}
fn default_target() -> f64 {
    0.1
}
fn default_tolerance() -> f64 {
    0.002
}
fn default_max_satellites() -> u64 {
    100_000
}
fn default_four_tier_heights() -> Vec<f64> {
    vec![0.0, 600.0, 900.0, 1200.0]
}
fn default_tau() -> f64 {
    4.0
}

/// A parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    /// The configured network only.
    Point,
    /// Tier counts `(1-2a)n, (1-a)n, n, (1+a)n, (1+2a)n` from the ground up.
    Nonuniformity {
        alphas: Vec<f64>,
        #[serde(default = "default_five_tier_heights")]
        heights_km: Vec<f64>,
        #[serde(default = "default_base_count")]
        base_count: u64,
        #[serde(default = "default_series")]
        series: Vec<StrategyMode>,
        #[serde(default)]
        exhaustive: bool,
        #[serde(default = "default_true")]
        simulate: bool,
    },
    /// Equal counts per tier, satellite tiers equally spaced strictly
    /// between `lowest_km` and `highest_km`.
    TierCount {
        tier_counts: Vec<usize>,
        #[serde(default = "default_total")]
        total_devices: u64,
        #[serde(default = "default_lowest")]
        lowest_km: f64,
        #[serde(default = "default_highest")]
        highest_km: f64,
        #[serde(default = "default_series")]
        series: Vec<StrategyMode>,
        #[serde(default)]
        exhaustive: bool,
        #[serde(default = "default_true")]
        simulate: bool,
    },
    /// Fixed gateways, satellites split evenly over each layout's heights.
    SatelliteCount {
        #[serde(default = "default_gateways")]
        gateways: u64,
        #[serde(default = "default_layouts")]
        layouts: Vec<Vec<f64>>,
        satellite_counts: Vec<u64>,
        #[serde(default)]
        simulate: bool,
    },
    /// Satellites needed to hold the analytic interruption at `target`.
    GatewayTradeoff {
        gateway_counts: Vec<u64>,
        #[serde(default = "default_layouts")]
        layouts: Vec<Vec<f64>>,
        #[serde(default = "default_target")]
        target: f64,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
        #[serde(default = "default_max_satellites")]
        max_satellites: u64,
    },
    /// Availability, coverage and URLLC rate against total device count,
    /// split evenly over the tiers.
    DeviceCount {
        device_counts: Vec<u64>,
        #[serde(default = "default_four_tier_heights")]
        heights_km: Vec<f64>,
        #[serde(default)]
        gamma_db: f64,
        #[serde(default = "default_tau")]
        tau_s: f64,
        #[serde(default)]
        simulate: bool,
    },
}

impl SweepSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SweepSpec::Point => "point",
            SweepSpec::Nonuniformity { .. } => "nonuniformity",
            SweepSpec::TierCount { .. } => "tier_count",
            SweepSpec::SatelliteCount { .. } => "satellite_count",
            SweepSpec::GatewayTradeoff { .. } => "gateway_tradeoff",
            SweepSpec::DeviceCount { .. } => "device_count",
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            SweepSpec::Point => {}
            SweepSpec::Nonuniformity { alphas, heights_km, .. } => {
                if heights_km.len() != 5 {
                    out.push("sweep.heights_km must list five heights".to_string());
                }
                for &a in alphas {
                    if !(-0.5..=0.5).contains(&a) {
                        out.push(format!("sweep.alphas entry {a} must lie in [-0.5, 0.5]"));
                    }
                }
            }
            SweepSpec::TierCount { tier_counts, lowest_km, highest_km, .. } => {
                if tier_counts.iter().any(|&k| k < 1) {
                    out.push("sweep.tier_counts entries must be at least 1".to_string());
                }
                if !(highest_km > lowest_km) {
                    out.push("sweep.highest_km must exceed sweep.lowest_km".to_string());
                }
            }
            SweepSpec::SatelliteCount { layouts, .. } | SweepSpec::GatewayTradeoff { layouts, .. } => {
                if layouts.iter().any(|l| l.is_empty()) {
                    out.push("sweep.layouts entries must list at least one height".to_string());
                }
            }
            SweepSpec::DeviceCount { heights_km, .. } => {
                if heights_km.first() != Some(&0.0) {
                    out.push("sweep.heights_km must start with the ground tier at 0 km".to_string());
                }
            }
        }
        out
    }
}

/// One output value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep: String,
    pub point: usize,
    pub x_name: String,
    pub x: f64,
    pub series: String,
    pub metric: String,
    pub value: f64,
}

/// Splits `total` into `parts` counts differing by at most one, larger
/// counts first.
pub fn split_evenly(total: u64, parts: usize) -> Vec<u64> {
    let p = parts as u64;
    (0..p).map(|i| total / p + u64::from(i < total % p)).collect()
}

/// Five-tier layout with nonuniformity `alpha`.
pub fn nonuniform_network(alpha: f64, heights_km: &[f64], base: u64) -> Result<Network> {
    let factors = [1.0 - 2.0 * alpha, 1.0 - alpha, 1.0, 1.0 + alpha, 1.0 + 2.0 * alpha];
    Network::new(
        heights_km
            .iter()
            .zip(factors)
            .map(|(&h, f)| TierSpec::new(h, (f * base as f64).round().max(0.0) as u64))
            .collect(),
    )
}

/// `k` tiers of equal size: the ground plus `k - 1` satellite tiers at
/// `lowest + (highest - lowest) m / k`, `m = 1..k`.
pub fn equal_tier_network(k: usize, total: u64, lowest_km: f64, highest_km: f64) -> Result<Network> {
    let counts = split_evenly(total, k);
    let tiers = (0..k)
        .map(|m| {
            let h = if m == 0 { 0.0 } else { lowest_km + (highest_km - lowest_km) * m as f64 / k as f64 };
            TierSpec::new(h, counts[m])
        })
        .collect();
    Network::new(tiers)
}

/// Gateways plus `satellites` split evenly over `layout`.
pub fn layout_network(gateways: u64, layout: &[f64], satellites: u64) -> Result<Network> {
    let counts = split_evenly(satellites, layout.len());
    let mut tiers = vec![TierSpec::new(0.0, gateways)];
    tiers.extend(layout.iter().zip(counts).map(|(&h, n)| TierSpec::new(h, n)));
    Network::new(tiers)
}

fn layout_label(layout: &[f64]) -> String {
    layout.iter().map(|h| format!("{h}")).collect::<Vec<_>>().join("+")
}

struct Emitter {
    sweep: &'static str,
    rows: Vec<SweepRow>,
}

impl Emitter {
    fn push(&mut self, point: usize, x_name: &str, x: f64, series: &str, metric: &str, value: f64) {
        self.rows.push(SweepRow {
            sweep: self.sweep.to_string(),
            point,
            x_name: x_name.to_string(),
            x,
            series: series.to_string(),
            metric: metric.to_string(),
            value,
        });
    }
}

/// Analytic (and optionally simulated) interruption of each strategy series.
#[allow(clippy::too_many_arguments)]
fn strategy_series(
    out: &mut Emitter,
    point: usize,
    x_name: &str,
    x: f64,
    network: &Network,
    cfg: &ExperimentConfig,
    series: &[StrategyMode],
    exhaustive: bool,
    simulate: bool,
) -> Result<()> {
    let c = cfg.constraint_set();
    for &mode in series {
        let p = tier_interruption_matrix_with(network, &c, cfg.own_tier_exponent);
        let s = mode.select(network, &p, None)?;
        let label = mode.name();
        let a = analyze(network, &c, &s, cfg.own_tier_exponent)?;
        out.push(point, x_name, x, label, "analytic_interruption", a.multihop);
        if simulate {
            let e = simulate_mode(mode, &s, network, cfg, &p, a.hops.theta_bar)?;
            out.push(point, x_name, x, label, "simulated_interruption", e.interruption_probability);
        }
    }
    if exhaustive {
        let ranked = exhaustive_search(network, &c, cfg.iterations, cfg.seed)?;
        out.push(point, x_name, x, "exhaustive", "simulated_interruption", ranked[0].1.interruption_probability);
    }
    Ok(())
}

fn simulate_mode(
    mode: StrategyMode,
    s: &PriorityStrategy,
    network: &Network,
    cfg: &ExperimentConfig,
    p: &InterruptionMatrix,
    theta_bar: f64,
) -> Result<SimulationEstimate> {
    let c = cfg.constraint_set();
    let rule = routing_rule(mode, s, network, &c, p, theta_bar, cfg.penultimate_adjustment)?;
    Ok(Router::new(network, &c, rule).estimate(cfg.iterations, cfg.seed))
}

fn analytic_for(network: &Network, cfg: &ExperimentConfig) -> Result<f64> {
    let c = cfg.constraint_set();
    let s = stationary_optimal(&tier_interruption_matrix_with(network, &c, cfg.own_tier_exponent))?;
    Ok(analyze(network, &c, &s, cfg.own_tier_exponent)?.multihop)
}

/// Evaluates the configured sweep.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let spec = cfg.sweep.clone().unwrap_or(SweepSpec::Point);
    let mut out = Emitter { sweep: spec.name(), rows: Vec::new() };
    let c = cfg.constraint_set();
    match &spec {
        SweepSpec::Point => {
            let network = cfg.network()?;
            let p = tier_interruption_matrix_with(&network, &c, cfg.own_tier_exponent);
            let s = cfg.strategy_mode.select(&network, &p, cfg.explicit_strategy.as_ref())?;
            let a = analyze(&network, &c, &s, cfg.own_tier_exponent)?;
            let label = cfg.strategy_mode.name();
            out.push(0, "devices", network.total_devices() as f64, label, "analytic_interruption", a.multihop);
            out.push(0, "devices", network.total_devices() as f64, label, "weighted_single_hop", a.weighted_single_hop());
        }
        SweepSpec::Nonuniformity { alphas, heights_km, base_count, series, exhaustive, simulate } => {
            for (point, &alpha) in alphas.iter().enumerate() {
                let network = nonuniform_network(alpha, heights_km, *base_count)?;
                strategy_series(&mut out, point, "alpha", alpha, &network, cfg, series, *exhaustive, *simulate)?;
            }
        }
        SweepSpec::TierCount { tier_counts, total_devices, lowest_km, highest_km, series, exhaustive, simulate } => {
            for (point, &k) in tier_counts.iter().enumerate() {
                let network = equal_tier_network(k, *total_devices, *lowest_km, *highest_km)?;
                strategy_series(&mut out, point, "tiers", k as f64, &network, cfg, series, *exhaustive, *simulate)?;
            }
        }
        SweepSpec::SatelliteCount { gateways, layouts, satellite_counts, simulate } => {
            let mut point = 0;
            for layout in layouts {
                let label = layout_label(layout);
                for &n in satellite_counts {
                    let network = layout_network(*gateways, layout, n)?;
                    let p = tier_interruption_matrix_with(&network, &c, cfg.own_tier_exponent);
                    let s = stationary_optimal(&p)?;
                    let a = analyze(&network, &c, &s, cfg.own_tier_exponent)?;
                    out.push(point, "satellites", n as f64, &label, "analytic_interruption", a.multihop);
                    if *simulate {
                        let e = simulate_mode(StrategyMode::StationaryOptimal, &s, &network, cfg, &p, a.hops.theta_bar)?;
                        out.push(point, "satellites", n as f64, &label, "simulated_interruption", e.interruption_probability);
                    }
                    point += 1;
                }
            }
        }
        SweepSpec::GatewayTradeoff { gateway_counts, layouts, target, tolerance, max_satellites } => {
            let mut point = 0;
            for layout in layouts {
                let label = layout_label(layout);
                for &g in gateway_counts {
                    let (n, p) = required_satellites(g, layout, *target, *tolerance, *max_satellites, cfg)?;
                    out.push(point, "gateways", g as f64, &label, "required_satellites", n as f64);
                    out.push(point, "gateways", g as f64, &label, "analytic_interruption", p);
                    point += 1;
                }
            }
        }
        SweepSpec::DeviceCount { device_counts, heights_km, gamma_db, tau_s, simulate } => {
            let budget = cfg.link_budget().ok_or_else(|| {
                Error::Config(vec!["the device_count sweep needs a link_budget block".to_string()])
            })?;
            for (point, &total) in device_counts.iter().enumerate() {
                let counts = split_evenly(total, heights_km.len());
                let network = Network::new(heights_km.iter().zip(counts).map(|(&h, n)| TierSpec::new(h, n)).collect())?;
                let p = tier_interruption_matrix_with(&network, &c, cfg.own_tier_exponent);
                let s = stationary_optimal(&p)?;
                let x = total as f64;
                let label = "stationary_optimal";
                out.push(point, "devices", x, label, "availability", availability(&network, &c, &s, cfg.own_tier_exponent)?);
                let model = CoverageModel::new(
                    &network,
                    &c,
                    &s,
                    cfg.own_tier_exponent,
                    &budget,
                    cfg.metrics.fading_samples,
                    cfg.seed,
                )?;
                let gamma = crate::link_metrics::db_to_linear(*gamma_db);
                out.push(point, "devices", x, label, "coverage", model.coverage(gamma)?);
                out.push(point, "devices", x, label, "urllc", model.urllc(gamma, *tau_s, UrllcMode::Latency)?);
                out.push(point, "devices", x, label, "analytic_interruption", model.analysis().multihop);
                if *simulate {
                    let theta_bar = model.analysis().hops.theta_bar;
                    let e = simulate_mode(StrategyMode::StationaryOptimal, &s, &network, cfg, &p, theta_bar)?;
                    out.push(point, "devices", x, label, "simulated_interruption", e.interruption_probability);
                }
            }
        }
    }
    Ok(out.rows)
}

/// Smallest satellite count (split over `layout`) whose analytic
/// interruption is at most `target`, found by bisection. Stops early once
/// the interruption is within `tolerance` of the target.
pub fn required_satellites(
    gateways: u64,
    layout: &[f64],
    target: f64,
    tolerance: f64,
    max_satellites: u64,
    cfg: &ExperimentConfig,
) -> Result<(u64, f64)> {
    let eval = |n: u64| -> f64 {
        layout_network(gateways, layout, n)
            .and_then(|net| analytic_for(&net, cfg))
            .unwrap_or(1.0)
    };
    let mut hi = layout.len() as u64;
    let mut p_hi = eval(hi);
    while p_hi > target {
        if hi >= max_satellites {
            return Ok((max_satellites, p_hi));
        }
        hi = (hi * 2).min(max_satellites);
        p_hi = eval(hi);
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        if (p_hi - target).abs() <= tolerance {
            break;
        }
        let mid = lo + (hi - lo) / 2;
        let p = eval(mid);
        if p > target {
            lo = mid;
        } else {
            hi = mid;
            p_hi = p;
        }
    }
    Ok((hi, p_hi))
}
