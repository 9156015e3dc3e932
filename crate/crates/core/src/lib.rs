//! Adversarial representative selection.
//!
//! Two parties with opposed (or merely different) ordinal preferences over a
//! ranked population jointly pick `k` items. This crate plays the selection
//! mechanisms at equilibrium, measures how representative the resulting
//! sample is with exact KS / L1 / CvM statistics, and ships brute-force
//! oracles plus a seeded Monte Carlo harness to check the optimality claims.
//!
//! Positions are 1-based indices into the population's ascending sort
//! throughout the crate.

pub mod error;
pub mod gametheory;
pub mod mechanisms;
pub mod oracle;
pub mod population;
pub mod rng;
pub mod simulation;
pub mod stats;

mod par;

pub use error::{Error, Result};
pub use population::{Cdf, Population, Preference, Sample};
pub use stats::{ExactStat, StatKind};
