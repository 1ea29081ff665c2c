//! Masked-language-model guided protein sequence search.
//!
//! The model is a black box behind [`provider::MaskedLogitProvider`]: masked
//! positions in, logit rows out. On top of it this crate scores whole
//! single-substitution neighborhoods by approximate pseudo-log-likelihood
//! ([`pll`]), searches with Gumbel-perturbed beam search and mutation
//! baselines ([`samplers`]), ranks by several black-box objectives
//! ([`guidance`]), and evaluates outputs ([`metrics`]).
//!
//! The crate is `no_std` and needs only `alloc`.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod exec;
pub mod guidance;
pub mod metrics;
pub mod pll;
pub mod provider;
pub mod rng;
pub mod samplers;
pub mod seq;

pub use error::{Error, Result};
pub use pll::{Approximation, ConditionalProfile, PllScore};
pub use provider::{CoupledParams, CoupledProvider, LogitRow, MaskedLogitProvider, PssmProvider};
pub use seq::{CandidateSequence, Edit, PositionMask, ProteinSequence, Residue, ALPHABET};
