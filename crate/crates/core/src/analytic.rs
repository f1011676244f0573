//! Closed-form single-hop reliability.
//!
//! A relay in tier `i` finds no admissible relay in tier `j` when the
//! admissible region (an annular sector of the tier-`j` sphere) is empty. For
//! a binomial point process of `N_j` points the void probability is
//! `(1 - A/(4 pi))^N_j` with `A/(4 pi) = (theta_r / 4 pi)(cos theta_s - cos theta_ij)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geometry::{max_dome_angle, ConstraintSet, Network};

/// Exponents above this are evaluated through `ln_1p`.
const LOG_SPACE_EXPONENT: u64 = 1000;

/// How many devices of its own tier a relay competes with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OwnTierExponent {
    /// `N_i - 1`: the relay itself is not a candidate.
    #[default]
    Others,
    /// `N_i`: the own tier is treated like any other tier.
    All,
}

impl OwnTierExponent {
    pub fn exponent(self, network: &Network, i: usize, j: usize) -> u64 {
        let n = network.count(j);
        match self {
            OwnTierExponent::Others if i == j => n.saturating_sub(1),
            _ => n,
        }
    }
}

/// `K x K` tier-to-tier interruption probabilities `P^I`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterruptionMatrix {
    entries: DMatrix<f64>,
    /// Whether a relay of each tier can hand over to the ground receiver.
    delivers: Vec<bool>,
}

impl InterruptionMatrix {
    /// Wraps a square matrix of probabilities. Tier `j` is taken to reach
    /// the receiver whenever `P^I_{j,1} != 1`.
    pub fn from_matrix(entries: DMatrix<f64>) -> Self {
        assert!(entries.is_square(), "interruption matrix must be square");
        let delivers = (0..entries.nrows()).map(|j| entries[(j, 0)] != 1.0).collect();
        Self { entries, delivers }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let k = rows.len();
        Self::from_matrix(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
    }

    pub fn k(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// True when tier `j` can never be reached from tier `i`.
    pub fn is_blocked(&self, i: usize, j: usize) -> bool {
        self.entries[(i, j)] == 1.0
    }

    /// Whether a relay in tier `j` can deliver to the ground receiver.
    pub fn delivers(&self, j: usize) -> bool {
        self.delivers[j]
    }

    /// Replaces the delivery mask.
    pub fn with_delivery(mut self, delivers: Vec<bool>) -> Self {
        assert_eq!(delivers.len(), self.k(), "one delivery flag per tier");
        self.delivers = delivers;
        self
    }

    /// Single-hop interruption vector: the row products.
    pub fn single_hop(&self) -> SingleHopVector {
        let k = self.k();
        SingleHopVector {
            entries: DVector::from_fn(k, |i, _| (0..k).map(|j| self.entries[(i, j)]).product()),
        }
    }
}

/// Length-`K` single-hop interruption probabilities `P^S`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleHopVector {
    entries: DVector<f64>,
}

impl SingleHopVector {
    pub fn get(&self, i: usize) -> f64 {
        self.entries[i]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.entries.as_slice()
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.entries
    }
}

/// Probability that a relay in tier `i` has no admissible relay in tier `j`.
pub fn pair_interruption(i: usize, j: usize, network: &Network, c: &ConstraintSet, own: OwnTierExponent) -> f64 {
    let theta = max_dome_angle(i, j, network, c);
    if theta == c.theta_s {
        return 1.0;
    }
    let area = (c.theta_r / (4.0 * PI)) * (c.theta_s.cos() - theta.cos());
    let n = own.exponent(network, i, j);
    if n == 0 {
        return 1.0;
    }
    if n > LOG_SPACE_EXPONENT {
        (n as f64 * (-area).ln_1p()).exp()
    } else {
        (1.0 - area).powi(n as i32)
    }
}

/// `P^I` with the relay itself excluded from its own tier.
pub fn tier_interruption_matrix(network: &Network, c: &ConstraintSet) -> InterruptionMatrix {
    tier_interruption_matrix_with(network, c, OwnTierExponent::Others)
}

/// `P^I` under an explicit own-tier convention. The delivery mask is
/// geometric, so it stays meaningful when the gateway tier is empty.
pub fn tier_interruption_matrix_with(network: &Network, c: &ConstraintSet, own: OwnTierExponent) -> InterruptionMatrix {
    let k = network.len();
    let delivers = (0..k).map(|j| max_dome_angle(j, 0, network, c) > c.theta_s).collect();
    InterruptionMatrix::from_matrix(DMatrix::from_fn(k, k, |i, j| pair_interruption(i, j, network, c, own)))
        .with_delivery(delivers)
}

/// `P^S` with the relay itself excluded from its own tier.
pub fn single_hop_vector(network: &Network, c: &ConstraintSet) -> SingleHopVector {
    tier_interruption_matrix(network, c).single_hop()
}
