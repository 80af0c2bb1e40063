//! Allocation algorithms: individual-level (ILA) and unit-level (ULA) targeting.

mod ila;
mod ula;

pub use ila::{
    ila_nonprivate, ila_params_adversarial, ila_params_stochastic, ila_private, ila_private_on_scores,
    BinGrid, IlaOutcome, IlaParams, DEFAULT_MAX_BINS,
};
pub use ula::{
    psi_split, ula_nonprivate, ula_nonprivate_on_scores, ula_private_membership_on_scores,
    ula_private_private_membership, ula_private_public_membership, PsiSplit, UlaOutcome,
};
