//! Mutation-centric baselines. Both samplers edit exactly `E` distinct
//! positions: a decoded residue equal to the current one is replaced by a
//! draw from the 19 remaining residues, and decoded positions are retired.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    Decode, GenerationRun, MutationKind, MutationSamplerConfig, PositionStrategy, SamplerConfig,
    ScoredCandidate, SeedTally,
};
use crate::error::Result;
use crate::pll::{softmax, ProbRow};
use crate::provider::{LogitRow, MaskedLogitProvider, Metered};
use crate::rng::stream;
use crate::seq::{CandidateSequence, ProteinSequence, Residue, ALPHABET_SIZE};

/// Shannon entropy in nats.
pub fn entropy(probs: &ProbRow) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * libm::log(p))
        .sum::<f64>()
}

/// Decodes one position from its tempered distribution, excluding `current`.
pub fn decode_position(probs: &ProbRow, current: Residue, decode: Decode, rng: &mut ChaCha8Rng) -> Residue {
    let allowed = || Residue::all().filter(move |&r| r != current);
    match decode {
        Decode::Argmax => allowed()
            .fold(None::<Residue>, |best, r| match best {
                Some(b) if probs[b.index()] >= probs[r.index()] => Some(b),
                _ => Some(r),
            })
            .expect("19 residues remain"),
        Decode::Sample => {
            let total: f64 = allowed().map(|r| probs[r.index()]).sum();
            if !(total > 0.0) {
                let pick = rng.gen_range(0..ALPHABET_SIZE - 1);
                return allowed().nth(pick).expect("index below 19");
            }
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut last = current;
            for r in allowed() {
                acc += probs[r.index()];
                last = r;
                if target < acc {
                    return r;
                }
            }
            last
        }
    }
}

/// Picks an index into `candidates` according to the strategy. `rows` holds
/// the logit row for each candidate position; strategies read them at
/// temperature 1.
fn pick_position(
    strategy: PositionStrategy,
    candidates: &[usize],
    rows: &[LogitRow],
    rng: &mut ChaCha8Rng,
) -> usize {
    if candidates.len() == 1 {
        return 0;
    }
    let key = |row: &LogitRow| {
        let probs = softmax(row, 1.0);
        match strategy {
            PositionStrategy::LowestEntropy => entropy(&probs),
            PositionStrategy::MaxProbability => -probs.iter().copied().fold(0.0, f64::max),
            PositionStrategy::Random => 0.0,
        }
    };
    match strategy {
        PositionStrategy::Random => rng.gen_range(0..candidates.len()),
        _ => {
            let mut best = 0;
            let mut best_key = key(&rows[0]);
            for (i, row) in rows.iter().enumerate().skip(1) {
                let k = key(row);
                if k < best_key {
                    best = i;
                    best_key = k;
                }
            }
            best
        }
    }
}

fn gibbs_chain<P: MaskedLogitProvider + ?Sized>(
    provider: &P,
    seed: &CandidateSequence,
    config: &MutationSamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<CandidateSequence> {
    let mut current = seed.clone();
    let mut eligible: Vec<usize> = config.mask.iter().collect();
    for _ in 0..config.edit_budget {
        let pick = match config.position_strategy {
            PositionStrategy::Random => pick_position(PositionStrategy::Random, &eligible, &[], rng),
            strategy => {
                // confidence read from one unmasked pass over the current sequence
                let rows = provider.query_report(current.sequence(), &[], &eligible)?;
                pick_position(strategy, &eligible, &rows, rng)
            }
        };
        let position = eligible.remove(pick);
        let row = provider.query(current.sequence(), &[position])?[0];
        let probs = softmax(&row, config.tau);
        let here = current.sequence().residues()[position];
        let to = decode_position(&probs, here, config.decode, rng);
        current = current.apply_edit(position, to)?;
    }
    Ok(current)
}

fn denoise_chain<P: MaskedLogitProvider + ?Sized>(
    provider: &P,
    seed: &CandidateSequence,
    config: &MutationSamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<CandidateSequence> {
    let mut pool: Vec<usize> = config.mask.iter().collect();
    let n = pool.len();
    for i in 0..config.edit_budget {
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
    }
    let mut masked: Vec<usize> = pool[..config.edit_budget].to_vec();
    masked.sort_unstable();
    let mut current = seed.clone();
    while !masked.is_empty() {
        let rows = provider.query(current.sequence(), &masked)?;
        let pick = pick_position(config.position_strategy, &masked, &rows, rng);
        let position = masked.remove(pick);
        let probs = softmax(&rows[pick], config.tau);
        let here = current.sequence().residues()[position];
        let to = decode_position(&probs, here, config.decode, rng);
        current = current.apply_edit(position, to)?;
    }
    Ok(current)
}

/// One chain of the chosen sampler, drawing from `rng`.
pub fn run_chain<P: MaskedLogitProvider + ?Sized>(
    kind: MutationKind,
    provider: &P,
    seed: &CandidateSequence,
    config: &MutationSamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<CandidateSequence> {
    match kind {
        MutationKind::Gibbs => gibbs_chain(provider, seed, config, rng),
        MutationKind::Denoise => denoise_chain(provider, seed, config, rng),
    }
}

fn single<P: MaskedLogitProvider + ?Sized>(
    kind: MutationKind,
    provider: &P,
    seed_id: &str,
    seed: &ProteinSequence,
    config: &MutationSamplerConfig,
) -> Result<GenerationRun> {
    config.validate(seed.len())?;
    let metered = Metered::new(provider);
    let mut rng = stream(config.rng_seed, &[0, 0]);
    let start = CandidateSequence::from_seed(seed_id, seed.clone());
    let out = run_chain(kind, &metered, &start, config, &mut rng)?;
    let sampler = match kind {
        MutationKind::Gibbs => SamplerConfig::Gibbs(config.clone()),
        MutationKind::Denoise => SamplerConfig::Denoise(config.clone()),
    };
    Ok(GenerationRun {
        seeds: vec![(String::from(seed_id), seed.clone())],
        config: sampler,
        provider: String::from(provider.name()),
        outputs: vec![ScoredCandidate::unscored(out)],
        intermediate: Vec::new(),
        tallies: vec![SeedTally {
            seed_id: String::from(seed_id),
            requested: 1,
            achieved: 1,
            attempts: 1,
            exhausted: false,
        }],
        forward_passes: metered.passes(),
        scored_sequences: 0,
    })
}

/// Gibbs-style sampling: `E` rounds of mask one position, decode, retire.
/// Random position choice costs exactly `E` passes; the confidence-based
/// strategies add one unmasked pass per round.
pub fn gibbs_sample<P: MaskedLogitProvider + ?Sized>(
    provider: &P,
    seed_id: &str,
    seed: &ProteinSequence,
    config: &MutationSamplerConfig,
) -> Result<GenerationRun> {
    single(MutationKind::Gibbs, provider, seed_id, seed, config)
}

/// Denoising: mask `E` randomly chosen positions at once, then unmask them
/// one per pass in the order the position strategy picks.
pub fn denoise_sample<P: MaskedLogitProvider + ?Sized>(
    provider: &P,
    seed_id: &str,
    seed: &ProteinSequence,
    config: &MutationSamplerConfig,
) -> Result<GenerationRun> {
    single(MutationKind::Denoise, provider, seed_id, seed, config)
}
