//! JSON experiment configuration.
//!
//! Angles may be given in radians or as strings like `"pi/6"`, `"2*pi/3"` or
//! `"30deg"`. Distances accept `"inf"` for no limit. Everything except the
//! tier list has a default.

use std::f64::consts::PI;
use std::path::Path;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::analytic::OwnTierExponent;
use crate::error::{Error, Result};
use crate::geometry::{ConstraintSet, Network, TierSpec};
use crate::link_metrics::{db_to_linear, linear_to_db, FlowSpec, LinkBudget, ShadowedRician, UrllcMode};
use crate::markov::PriorityStrategy;
use crate::strategy::StrategyMode;
use crate::sweep::SweepSpec;

/// Parses `"pi"`, `"pi/6"`, `"2pi/3"`, `"2*pi/3"`, `"-pi/4"`, `"30deg"` or a
/// plain number of radians.
pub fn parse_angle(text: &str) -> Result<f64> {
    let bad = || Error::Config(vec![format!("cannot parse angle {text:?}")]);
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
    if let Some(deg) = t.strip_suffix("deg") {
        return deg.parse::<f64>().map(f64::to_radians).map_err(|_| bad());
    }
    if let Ok(x) = t.parse::<f64>() {
        return Ok(x);
    }
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().map_err(|_| bad())?),
        None => (t.as_str(), 1.0),
    };
    let coef = num.strip_suffix("pi").ok_or_else(bad)?;
    let coef = coef.strip_suffix('*').unwrap_or(coef);
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(coef * PI / den)
}

fn de_angle<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(x) => Ok(x),
        Raw::Text(s) => parse_angle(&s).map_err(de::Error::custom),
    }
}

fn de_angles<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    struct Wrapped(#[serde(deserialize_with = "de_angle")] f64);
    Ok(Vec::<Wrapped>::deserialize(d)?.into_iter().map(|w| w.0).collect())
}

fn de_distance<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(x) => Ok(x),
        Raw::Text(s) if matches!(s.trim().to_ascii_lowercase().as_str(), "inf" | "infinity" | "none") => {
            Ok(f64::INFINITY)
        }
        Raw::Text(s) => Err(de::Error::custom(format!("cannot parse distance {s:?}"))),
    }
}

fn ser_distance<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*x)
    }
}

/// Constraint block of a configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintSpec {
    #[serde(deserialize_with = "de_angle")]
    pub theta_r: f64,
    #[serde(deserialize_with = "de_angle")]
    pub theta_s: f64,
    #[serde(rename = "d_th_km", deserialize_with = "de_distance", serialize_with = "ser_distance")]
    pub d_th: f64,
    #[serde(deserialize_with = "de_angle")]
    pub theta_m: f64,
}

impl Default for ConstraintSpec {
    fn default() -> Self {
        let c = ConstraintSet::default();
        Self { theta_r: c.theta_r, theta_s: c.theta_s, d_th: c.d_th, theta_m: c.theta_m }
    }
}

impl From<ConstraintSpec> for ConstraintSet {
    fn from(c: ConstraintSpec) -> Self {
        ConstraintSet { theta_r: c.theta_r, theta_s: c.theta_s, d_th: c.d_th, theta_m: c.theta_m }
    }
}

/// Link budget block, in the units radio engineers quote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkBudgetSpec {
    pub carrier_frequency_hz: f64,
    pub transmit_power_dbw: f64,
    pub antenna_gain_dbi: f64,
    pub bandwidth_hz: f64,
    pub noise_power_w: f64,
    pub rain_attenuation_db: f64,
    pub package_size_bits: f64,
    pub fading: ShadowedRician,
    pub snr_threshold_db: f64,
    pub latency_threshold_s: f64,
}

impl Default for LinkBudgetSpec {
    fn default() -> Self {
        Self::from(LinkBudget::ka_band())
    }
}

impl From<LinkBudget> for LinkBudgetSpec {
    fn from(b: LinkBudget) -> Self {
        Self {
            carrier_frequency_hz: b.carrier_frequency_hz,
            transmit_power_dbw: linear_to_db(b.transmit_power_w),
            antenna_gain_dbi: linear_to_db(b.antenna_gain),
            bandwidth_hz: b.bandwidth_hz,
            noise_power_w: b.noise_power_w,
            rain_attenuation_db: linear_to_db(b.rain_attenuation),
            package_size_bits: b.package_size_bits,
            fading: b.fading,
            snr_threshold_db: linear_to_db(b.snr_threshold),
            latency_threshold_s: b.latency_threshold_s,
        }
    }
}

impl From<LinkBudgetSpec> for LinkBudget {
    fn from(b: LinkBudgetSpec) -> Self {
        Self {
            carrier_frequency_hz: b.carrier_frequency_hz,
            transmit_power_w: db_to_linear(b.transmit_power_dbw),
            antenna_gain: db_to_linear(b.antenna_gain_dbi),
            bandwidth_hz: b.bandwidth_hz,
            noise_power_w: b.noise_power_w,
            rain_attenuation: db_to_linear(b.rain_attenuation_db),
            package_size_bits: b.package_size_bits,
            fading: b.fading,
            snr_threshold: db_to_linear(b.snr_threshold_db),
            latency_threshold_s: b.latency_threshold_s,
        }
    }
}

/// Flow block: dihedral angles of parallel flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowsSpec {
    #[serde(deserialize_with = "de_angles")]
    pub dihedral_angles: Vec<f64>,
}

/// Evaluation grids of the `metrics` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSpec {
    pub gamma_db: Vec<f64>,
    pub tau_s: Vec<f64>,
    #[serde(deserialize_with = "de_angles")]
    pub dihedral_angles: Vec<f64>,
    pub fading_samples: usize,
    pub urllc_mode: UrllcMode,
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self {
            gamma_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            tau_s: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            dihedral_angles: (0..6).map(|i| i as f64 * PI / 12.0).collect(),
            fading_samples: crate::link_metrics::DEFAULT_FADING_SAMPLES,
            urllc_mode: UrllcMode::Latency,
        }
    }
}

fn default_iterations() -> u64 {
    100_000
}

fn default_horizons() -> Vec<usize> {
    vec![6]
}

/// A complete, validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub tiers: Vec<TierSpec>,
    #[serde(default)]
    pub constraints: ConstraintSpec,
    #[serde(default)]
    pub strategy_mode: StrategyMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_strategy: Option<PriorityStrategy>,
    /// Demote tiers that cannot deliver to the receiver near the end of the
    /// route in every strategy mode (simulation only). Stationary-optimal
    /// mode always applies it.
    #[serde(default)]
    pub penultimate_adjustment: bool,
    #[serde(default)]
    pub own_tier_exponent: OwnTierExponent,
    #[serde(default = "default_iterations")]
    pub iterations: u64,
    #[serde(default)]
    pub seed: u64,
    /// Horizons `N_e` of the cumulative interruption curve.
    #[serde(default = "default_horizons")]
    pub cumulative_horizons: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_budget: Option<LinkBudgetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flows: Option<FlowsSpec>,
    #[serde(default)]
    pub metrics: MetricsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    /// A configuration with defaults everywhere except the tiers.
    pub fn for_tiers(tiers: Vec<TierSpec>) -> Self {
        Self {
            tiers,
            constraints: ConstraintSpec::default(),
            strategy_mode: StrategyMode::default(),
            explicit_strategy: None,
            penultimate_adjustment: false,
            own_tier_exponent: OwnTierExponent::default(),
            iterations: default_iterations(),
            seed: 0,
            cumulative_horizons: default_horizons(),
            link_budget: None,
            flows: None,
            metrics: MetricsSpec::default(),
            sweep: None,
        }
    }

    /// Parses and validates JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Every invariant the configuration breaks.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Network::violations(&self.tiers);
        out.extend(ConstraintSet::from(self.constraints).violations());
        match (self.strategy_mode, &self.explicit_strategy) {
            (StrategyMode::Explicit, None) => {
                out.push("strategy_mode \"explicit\" requires explicit_strategy".to_string())
            }
            (StrategyMode::Explicit, Some(s)) if s.k() != self.tiers.len() => out.push(format!(
                "explicit_strategy {s} ranks {} tiers but {} are configured",
                s.k(),
                self.tiers.len()
            )),
            (mode, Some(_)) if mode != StrategyMode::Explicit => {
                out.push(format!("explicit_strategy is only allowed with strategy_mode \"explicit\", not {:?}", mode.name()))
            }
            _ => {}
        }
        if self.iterations < 1 {
            out.push("iterations must be at least 1".to_string());
        }
        for &h in &self.cumulative_horizons {
            if h < 2 {
                out.push(format!("cumulative horizon {h} must be at least 2"));
            }
        }
        if let Some(b) = self.link_budget {
            out.extend(LinkBudget::from(b).violations());
        }
        if let Some(f) = &self.flows {
            out.extend(FlowSpec { dihedral_angles: f.dihedral_angles.clone() }.violations());
        }
        for (i, &a) in self.metrics.dihedral_angles.iter().enumerate() {
            if !(0.0..PI / 2.0).contains(&a) {
                out.push(format!("metrics.dihedral_angles[{i}] = {a} must lie in [0, pi/2)"));
            }
        }
        for (i, &t) in self.metrics.tau_s.iter().enumerate() {
            if !(t > 0.0) {
                out.push(format!("metrics.tau_s[{i}] = {t} must be positive"));
            }
        }
        if let Some(s) = &self.sweep {
            out.extend(s.violations());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.violations();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn network(&self) -> Result<Network> {
        Network::new(self.tiers.clone())
    }

    pub fn constraint_set(&self) -> ConstraintSet {
        self.constraints.into()
    }

    pub fn link_budget(&self) -> Option<LinkBudget> {
        self.link_budget.map(Into::into)
    }

    pub fn flow_spec(&self) -> Option<FlowSpec> {
        self.flows.as_ref().map(|f| FlowSpec { dihedral_angles: f.dihedral_angles.clone() })
    }
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    ExperimentConfig::from_json(&text).map_err(|e| match e {
        Error::Config(list) => Error::Config(list.into_iter().map(|m| format!("{}: {m}", path.display())).collect()),
        other => other,
    })
}

/// The three-tier reference network: 300 gateways, 140 satellites at
/// 575 km and 720 at 1200 km.
pub fn case_study_tiers() -> Vec<TierSpec> {
    vec![TierSpec::new(0.0, 300), TierSpec::new(575.0, 140), TierSpec::new(1200.0, 720)]
}
