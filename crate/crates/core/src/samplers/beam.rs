use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{BeamConfig, GenerationRun, SamplerConfig, ScoredCandidate, SeedTally};
use crate::error::Result;
use crate::exec::{Executor, Sequential};
use crate::guidance::{guided_rank, ObjectiveMemo, ObjectiveSet};
use crate::pll::{build_profile, expand_neighborhood, PllScore};
use crate::provider::{MaskedLogitProvider, Metered};
use crate::rng::keyed_gumbel;
use crate::seq::{CandidateSequence, ProteinSequence, ALPHABET_SIZE};

struct StepChild {
    candidate: CandidateSequence,
    key: String,
    clean: PllScore,
    perturbed: f64,
}

pub(super) struct BeamOutcome {
    pub outputs: Vec<ScoredCandidate>,
    pub intermediate: Vec<ScoredCandidate>,
}

/// Gumbel noise for one child, keyed by the run seed, the step, and the
/// child's full edit set.
fn child_noise(rng_seed: u64, step: usize, candidate: &CandidateSequence) -> f64 {
    let keys: Vec<u64> = core::iter::once(step as u64)
        .chain(
            candidate
                .edits()
                .iter()
                .map(|e| (e.position * ALPHABET_SIZE + e.to.index()) as u64),
        )
        .collect();
    keyed_gumbel(rng_seed, &keys)
}

pub(super) fn run_beam<P, E>(
    provider: &P,
    seed_id: &str,
    seed: &ProteinSequence,
    config: &BeamConfig,
    objectives: Option<&ObjectiveSet>,
    memo: &mut ObjectiveMemo,
    exec: &E,
) -> Result<BeamOutcome>
where
    P: MaskedLogitProvider + ?Sized,
    E: Executor,
{
    config.validate(seed.len())?;
    let mut beam = vec![CandidateSequence::from_seed(seed_id, seed.clone())];
    let mut intermediate = Vec::new();
    let mut outputs = Vec::new();

    for step in 1..=config.edit_budget {
        let expansions = exec.map(&beam, |template| {
            let profile = build_profile(provider, template.sequence(), config.tau)?;
            expand_neighborhood(&profile, template, &config.mask)
        });

        let mut children: Vec<StepChild> = Vec::new();
        let mut index_of: BTreeMap<String, usize> = BTreeMap::new();
        for expansion in expansions {
            for (candidate, clean) in expansion? {
                let key = candidate.sequence().to_code_string();
                if config.dedup {
                    if let Some(&i) = index_of.get(&key) {
                        if clean.sum_log > children[i].clean.sum_log {
                            children[i].candidate = candidate;
                            children[i].clean = clean;
                        }
                        continue;
                    }
                    index_of.insert(key.clone(), children.len());
                }
                children.push(StepChild {
                    candidate,
                    key,
                    clean,
                    perturbed: 0.0,
                });
            }
        }
        for child in &mut children {
            let noise = if config.gumbel_scale > 0.0 {
                config.gumbel_scale * child_noise(config.rng_seed, step, &child.candidate)
            } else {
                0.0
            };
            child.perturbed = child.clean.sum_log + noise;
        }

        let (order, guidance) = match objectives {
            Some(objectives) => {
                let seqs: Vec<ProteinSequence> =
                    children.iter().map(|c| c.candidate.sequence().clone()).collect();
                let perturbed: Vec<f64> = children.iter().map(|c| c.perturbed).collect();
                let ranking = guided_rank(&seqs, &perturbed, objectives, memo)?;
                (ranking.order, Some(ranking.scores))
            }
            None => {
                let mut order: Vec<usize> = (0..children.len()).collect();
                order.sort_by(|&a, &b| {
                    children[b]
                        .perturbed
                        .total_cmp(&children[a].perturbed)
                        .then_with(|| children[a].key.cmp(&children[b].key))
                });
                (order, None)
            }
        };

        beam = order
            .iter()
            .take(config.beam_size)
            .map(|&i| children[i].candidate.clone())
            .collect();

        let mut scored: Vec<ScoredCandidate> = order
            .iter()
            .map(|&i| ScoredCandidate {
                candidate: children[i].candidate.clone(),
                step,
                clean: Some(children[i].clean),
                perturbed: Some(children[i].perturbed),
                guidance: guidance.as_ref().map(|g| g[i]),
            })
            .collect();

        if step == config.edit_budget {
            if objectives.is_none() {
                // delivery order: clean score, best first
                scored.sort_by(|a, b| {
                    let (sa, sb) = (a.clean.unwrap().sum_log, b.clean.unwrap().sum_log);
                    sb.total_cmp(&sa).then_with(|| a.candidate.sequence().cmp(b.candidate.sequence()))
                });
            }
            outputs = scored;
        } else {
            intermediate.extend(scored);
        }
    }
    Ok(BeamOutcome {
        outputs,
        intermediate,
    })
}

/// Temperature-annealed stochastic beam search from one seed.
///
/// Each step expands every surviving template: its single-mask profile is
/// built (`L` passes) and all single substitutions at eligible, not yet
/// edited positions are scored with the wild-type marginal PLL at the
/// configured temperature. Children are ranked by that score plus scaled
/// Gumbel noise (or by `objectives`, when given) and the top `beam_size`
/// become the next templates. Total passes: `L * (1 + B * (E - 1))`.
pub fn beam_search<P: MaskedLogitProvider + ?Sized>(
    provider: &P,
    seed_id: &str,
    seed: &ProteinSequence,
    config: &BeamConfig,
    objectives: Option<&ObjectiveSet>,
) -> Result<GenerationRun> {
    beam_search_with(provider, seed_id, seed, config, objectives, &Sequential)
}

pub fn beam_search_with<P, E>(
    provider: &P,
    seed_id: &str,
    seed: &ProteinSequence,
    config: &BeamConfig,
    objectives: Option<&ObjectiveSet>,
    exec: &E,
) -> Result<GenerationRun>
where
    P: MaskedLogitProvider + ?Sized,
    E: Executor,
{
    let metered = Metered::new(provider);
    let mut memo = ObjectiveMemo::new();
    let outcome = run_beam(&metered, seed_id, seed, config, objectives, &mut memo, exec)?;
    let achieved = outcome.outputs.len();
    Ok(GenerationRun {
        seeds: vec![(String::from(seed_id), seed.clone())],
        config: SamplerConfig::Beam(config.clone()),
        provider: String::from(provider.name()),
        outputs: outcome.outputs,
        intermediate: outcome.intermediate,
        tallies: vec![SeedTally {
            seed_id: String::from(seed_id),
            requested: achieved,
            achieved,
            attempts: 1,
            exhausted: false,
        }],
        forward_passes: metered.passes(),
        scored_sequences: memo.scored_sequences(),
    })
}
