//! Reliability analysis of multi-hop routing in multi-tier
//! satellite-terrestrial relay networks.
//!
//! Devices of each tier form a binomial point process on a sphere concentric
//! with the Earth. A route hops from relay to relay under direction, minimum
//! hop length and maximum link length constraints. This crate computes the
//! probability that a route is interrupted in closed form, through an
//! absorbing Markov chain over tiers, and checks it with a Monte Carlo
//! router.
//!
//! ```
//! use tierlink::prelude::*;
//!
//! let network = Network::new(tierlink::config::case_study_tiers()).unwrap();
//! let c = ConstraintSet::default();
//! let p = tier_interruption_matrix(&network, &c);
//! let best = stationary_optimal(&p).unwrap();
//! assert_eq!(best.ranks(), &[3, 2, 1]);
//!
//! let a = analyze(&network, &c, &best, OwnTierExponent::Others).unwrap();
//! assert!(a.multihop > 0.05 && a.multihop < 0.2);
//! ```

pub mod analytic;
pub mod config;
pub mod error;
pub mod geometry;
pub mod link_metrics;
pub mod markov;
pub mod simulator;
pub mod strategy;
pub mod sweep;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::analytic::{
        single_hop_vector, tier_interruption_matrix, tier_interruption_matrix_with, InterruptionMatrix,
        OwnTierExponent, SingleHopVector,
    };
    pub use crate::error::{Error, Result};
    pub use crate::geometry::{max_dome_angle, ConstraintSet, Network, SpherePoint, TierSpec, EARTH_RADIUS_KM};
    pub use crate::markov::{analyze, Analysis, PriorityStrategy, TransitionMatrices};
    pub use crate::simulator::{estimate, Router, SimulationEstimate};
    pub use crate::strategy::{stationary_optimal, StrategyMode};
}
