use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use super::beam::run_beam;
use super::mutation::run_chain;
use super::{GenerationRun, MutationKind, SamplerConfig, ScoredCandidate, SeedTally, DEFAULT_RETRY_FACTOR};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::guidance::{ObjectiveMemo, ObjectiveSet};
use crate::provider::{MaskedLogitProvider, Metered};
use crate::rng::{derive_seed, stream};
use crate::seq::{CandidateSequence, ProteinSequence};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedInput {
    pub id: String,
    pub sequence: ProteinSequence,
}

impl SeedInput {
    pub fn new(id: impl Into<String>, sequence: ProteinSequence) -> Self {
        SeedInput {
            id: id.into(),
            sequence,
        }
    }
}

/// Generates up to `per_seed_count` unique candidates for every seed.
///
/// Beam runs once per seed and delivers the best of its final-step pool.
/// Mutation samplers run independent chains (chain `c` of seed `s` draws
/// from the stream keyed `(rng_seed, s, c)`) until enough unique sequences
/// exist or `10 * per_seed_count` chains have been spent. A shortfall is
/// recorded in the seed's tally rather than raised.
///
/// Beam seeds use `derive_seed(rng_seed, [s])` as their noise key, so seed
/// index 0 of a batch is not the same run as a direct `beam_search` call.
pub fn batch_generate<P, E>(
    provider: &P,
    seeds: &[SeedInput],
    per_seed_count: usize,
    config: &SamplerConfig,
    objectives: Option<&ObjectiveSet>,
    exec: &E,
) -> Result<GenerationRun>
where
    P: MaskedLogitProvider + ?Sized,
    E: Executor,
{
    if per_seed_count == 0 {
        return Err(Error::InvalidConfig("per-seed count must be at least 1".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("no seeds given".into()));
    }
    let mut ids = BTreeSet::new();
    for seed in seeds {
        if !ids.insert(seed.id.as_str()) {
            return Err(Error::InvalidConfig(alloc::format!("duplicate seed id {}", seed.id)));
        }
        config.validate(seed.sequence.len())?;
    }

    let metered = Metered::new(provider);
    let mut memo = ObjectiveMemo::new();
    let mut outputs = Vec::new();
    let mut intermediate = Vec::new();
    let mut tallies = Vec::new();

    for (s, seed) in seeds.iter().enumerate() {
        match config {
            SamplerConfig::Beam(beam) => {
                let mut cfg = beam.clone();
                cfg.rng_seed = derive_seed(beam.rng_seed, &[s as u64]);
                let outcome = run_beam(&metered, &seed.id, &seed.sequence, &cfg, objectives, &mut memo, exec)?;
                let achieved = outcome.outputs.len().min(per_seed_count);
                outputs.extend(outcome.outputs.into_iter().take(per_seed_count));
                intermediate.extend(outcome.intermediate);
                tallies.push(SeedTally {
                    seed_id: seed.id.clone(),
                    requested: per_seed_count,
                    achieved,
                    attempts: 1,
                    exhausted: achieved < per_seed_count,
                });
            }
            SamplerConfig::Gibbs(cfg) | SamplerConfig::Denoise(cfg) => {
                let kind = match config {
                    SamplerConfig::Gibbs(_) => MutationKind::Gibbs,
                    _ => MutationKind::Denoise,
                };
                let start = CandidateSequence::from_seed(seed.id.as_str(), seed.sequence.clone());
                let budget = per_seed_count.saturating_mul(DEFAULT_RETRY_FACTOR);
                let mut seen = BTreeSet::new();
                let mut attempts = 0usize;
                while seen.len() < per_seed_count && attempts < budget {
                    let chunk = (per_seed_count - seen.len()).min(budget - attempts);
                    let chains: Vec<u64> = (attempts..attempts + chunk).map(|c| c as u64).collect();
                    let results = exec.map(&chains, |&c| {
                        let mut rng = stream(cfg.rng_seed, &[s as u64, c]);
                        run_chain(kind, &metered, &start, cfg, &mut rng)
                    });
                    attempts += chunk;
                    for result in results {
                        let candidate = result?;
                        if seen.len() < per_seed_count && seen.insert(candidate.sequence().clone()) {
                            outputs.push(ScoredCandidate::unscored(candidate));
                        }
                    }
                }
                tallies.push(SeedTally {
                    seed_id: seed.id.clone(),
                    requested: per_seed_count,
                    achieved: seen.len(),
                    attempts,
                    exhausted: seen.len() < per_seed_count,
                });
            }
        }
    }

    Ok(GenerationRun {
        seeds: seeds.iter().map(|s| (s.id.clone(), s.sequence.clone())).collect(),
        config: config.clone(),
        provider: String::from(provider.name()),
        outputs,
        intermediate,
        tallies,
        forward_passes: metered.passes(),
        scored_sequences: memo.scored_sequences(),
    })
}
