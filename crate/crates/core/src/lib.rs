//! Private aid allocation at the individual and unit level.
//!
//! Individual-level allocation ([`alloc::ila_private`]) releases a noisy cumulative histogram
//! of welfare scores and treats everyone below a private threshold. Unit-level allocation
//! ([`alloc::ula_private_public_membership`]) ranks geographic units by their noisy share of
//! high-welfare members. [`budget`] adds the cost of measuring welfare, and [`learn`]
//! replaces measurement with a privately trained predictor.

pub mod alloc;
pub mod bounds;
pub mod budget;
pub mod dp;
pub mod error;
pub mod learn;
pub mod model;
mod num;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    allocation_value, brute_force_opt_value, gini, gini_pairwise, optimal_allocation, random_allocation, regret,
    treatment_effect, Allocation, Partition, Population, RegretReport, UnitProfile,
};
pub use rng::{derive_seed, seeded, SimRng};
