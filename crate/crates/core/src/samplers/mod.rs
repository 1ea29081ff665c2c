//! Sequence generators: stochastic beam search over single-substitution
//! neighborhoods, and the mutation-centric baselines (Gibbs and denoising)
//! that query the model one masked step at a time.
//!
//! Every sampler produces candidates at Hamming distance exactly `E` from
//! their seed with all edits inside the mask.

mod batch;
mod beam;
mod mutation;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pll::{check_tau, PllScore};
use crate::seq::{CandidateSequence, PositionMask, ProteinSequence};

pub use batch::{batch_generate, SeedInput};
pub use beam::{beam_search, beam_search_with};
pub use mutation::{decode_position, denoise_sample, entropy, gibbs_sample, run_chain};

pub const DEFAULT_BEAM_SIZE: usize = 5;
pub const DEFAULT_GUIDED_BEAM_SIZE: usize = 20;
pub const DEFAULT_TAU: f64 = 1.5;
pub const DEFAULT_GUMBEL_SCALE: f64 = 1.0;
/// Attempts allowed per requested unique sequence before giving up.
pub const DEFAULT_RETRY_FACTOR: usize = 10;

fn check_budget(edit_budget: usize, mask: &PositionMask, len: usize) -> Result<()> {
    if edit_budget == 0 {
        return Err(Error::InvalidConfig("edit budget must be at least 1".into()));
    }
    mask.check_bounds(len)?;
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if edit_budget > mask.len() {
        return Err(Error::EditBudgetExceedsMask {
            budget: edit_budget,
            eligible: mask.len(),
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub beam_size: usize,
    pub edit_budget: usize,
    pub tau: f64,
    /// Multiplier on the Gumbel(0, 1) perturbation; 0 gives plain beam search.
    pub gumbel_scale: f64,
    pub rng_seed: u64,
    pub mask: PositionMask,
    pub dedup: bool,
}

impl BeamConfig {
    pub fn new(edit_budget: usize, mask: PositionMask) -> Self {
        BeamConfig {
            beam_size: DEFAULT_BEAM_SIZE,
            edit_budget,
            tau: DEFAULT_TAU,
            gumbel_scale: DEFAULT_GUMBEL_SCALE,
            rng_seed: 0,
            mask,
            dedup: true,
        }
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        if self.beam_size == 0 {
            return Err(Error::InvalidConfig("beam size must be at least 1".into()));
        }
        check_tau(self.tau)?;
        if !(self.gumbel_scale >= 0.0 && self.gumbel_scale.is_finite()) {
            return Err(Error::InvalidConfig("gumbel scale must be finite and non-negative".into()));
        }
        check_budget(self.edit_budget, &self.mask, len)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionStrategy {
    Random,
    LowestEntropy,
    MaxProbability,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decode {
    Sample,
    Argmax,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutationSamplerConfig {
    pub edit_budget: usize,
    pub tau: f64,
    pub rng_seed: u64,
    pub mask: PositionMask,
    pub position_strategy: PositionStrategy,
    pub decode: Decode,
}

impl MutationSamplerConfig {
    pub fn new(edit_budget: usize, mask: PositionMask) -> Self {
        MutationSamplerConfig {
            edit_budget,
            tau: DEFAULT_TAU,
            rng_seed: 0,
            mask,
            position_strategy: PositionStrategy::Random,
            decode: Decode::Sample,
        }
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        check_tau(self.tau)?;
        check_budget(self.edit_budget, &self.mask, len)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    Gibbs,
    Denoise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sampler", rename_all = "snake_case")]
pub enum SamplerConfig {
    Beam(BeamConfig),
    Gibbs(MutationSamplerConfig),
    Denoise(MutationSamplerConfig),
}

impl SamplerConfig {
    pub fn edit_budget(&self) -> usize {
        match self {
            SamplerConfig::Beam(c) => c.edit_budget,
            SamplerConfig::Gibbs(c) | SamplerConfig::Denoise(c) => c.edit_budget,
        }
    }

    pub fn rng_seed(&self) -> u64 {
        match self {
            SamplerConfig::Beam(c) => c.rng_seed,
            SamplerConfig::Gibbs(c) | SamplerConfig::Denoise(c) => c.rng_seed,
        }
    }

    pub fn mask(&self) -> &PositionMask {
        match self {
            SamplerConfig::Beam(c) => &c.mask,
            SamplerConfig::Gibbs(c) | SamplerConfig::Denoise(c) => &c.mask,
        }
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        match self {
            SamplerConfig::Beam(c) => c.validate(len),
            SamplerConfig::Gibbs(c) | SamplerConfig::Denoise(c) => c.validate(len),
        }
    }
}

/// A generated candidate and whatever scores its sampler produced.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredCandidate {
    pub candidate: CandidateSequence,
    /// Search step (edit count) at which the candidate was scored.
    pub step: usize,
    /// Approximate PLL against the template it was expanded from.
    pub clean: Option<PllScore>,
    pub perturbed: Option<f64>,
    pub guidance: Option<f64>,
}

impl ScoredCandidate {
    pub fn unscored(candidate: CandidateSequence) -> Self {
        ScoredCandidate {
            step: candidate.edit_count(),
            candidate,
            clean: None,
            perturbed: None,
            guidance: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedTally {
    pub seed_id: String,
    pub requested: usize,
    pub achieved: usize,
    pub attempts: usize,
    pub exhausted: bool,
}

/// Everything needed to reproduce and audit a generation call.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRun {
    pub seeds: Vec<(String, ProteinSequence)>,
    pub config: SamplerConfig,
    pub provider: String,
    /// Delivered candidates (exactly `E` edits each), best first per seed.
    pub outputs: Vec<ScoredCandidate>,
    /// Beam candidates scored at steps before the last.
    pub intermediate: Vec<ScoredCandidate>,
    pub tallies: Vec<SeedTally>,
    /// Logical forward passes issued by this run.
    pub forward_passes: u64,
    /// Distinct sequences sent to external objective scorers.
    pub scored_sequences: u64,
}

impl GenerationRun {
    /// True when some seed fell short of its requested count.
    pub fn retry_budget_exhausted(&self) -> bool {
        self.tallies.iter().any(|t| t.exhausted)
    }
}

/// Sequences delivered for one seed.
pub fn outputs_for<'a>(run: &'a GenerationRun, seed_id: &'a str) -> impl Iterator<Item = &'a ScoredCandidate> + 'a {
    run.outputs
        .iter()
        .filter(move |c| c.candidate.seed_id() == seed_id)
}
