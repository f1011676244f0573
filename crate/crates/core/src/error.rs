use thiserror::Error;

/// Errors produced by the analysis and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid constraints: {0}")]
    InvalidConstraints(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("tier {tier} cannot reach the absorbing state")]
    NonAbsorbing { tier: usize },

    #[error("no stationary distribution: {0}")]
    NoStationary(String),

    #[error("no priority strategy routes out of the gateway tier")]
    NoFeasibleStrategy,

    #[error("exhaustive search over {tiers} tiers exceeds the limit of {limit}")]
    TooManyTiers { tiers: usize, limit: usize },

    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),
}

pub type Result<T> = std::result::Result<T, Error>;
