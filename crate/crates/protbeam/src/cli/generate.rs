use std::path::PathBuf;

use clap::{Args, ValueEnum};
use protbeam_core::samplers::{
    batch_generate, BeamConfig, Decode, MutationSamplerConfig, PositionStrategy, SamplerConfig, SeedInput,
    DEFAULT_BEAM_SIZE, DEFAULT_GUIDED_BEAM_SIZE,
};
use serde::Serialize;

use super::{load_mask, load_pka, with_suffix, AggregationArg, Context, ProviderArgs};
use crate::error::{AppError, AppResult};
use crate::exec::Rayon;
use crate::io::{format_edits, read_seeds, write_fasta, write_tsv, CandidateRow, FastaRecord};
use crate::objectives::load_objective_set;

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Beam,
    Gibbs,
    GibbsArgmax,
    Denoise,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    Random,
    LowestEntropy,
    MaxProbability,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeArg {
    Sample,
    Argmax,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub seeds: PathBuf,
    /// Editable positions (defaults to every position).
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Substitutions per variant.
    #[arg(long)]
    pub edits: usize,
    #[arg(long, value_enum, default_value_t = SamplerKind::Beam)]
    pub sampler: SamplerKind,
    /// Beam width (5, or 20 with objectives).
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long, default_value_t = 1.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gumbel_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Unique variants requested per seed.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, value_enum, default_value_t = StrategyArg::Random)]
    pub position_strategy: StrategyArg,
    #[arg(long, value_enum, default_value_t = DecodeArg::Sample)]
    pub decode: DecodeArg,
    /// Keep duplicate children reached from different templates.
    #[arg(long)]
    pub no_dedup: bool,
    /// Objective file; turns on guided beam search.
    #[arg(long)]
    pub objectives: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AggregationArg::Sts)]
    pub aggregation: AggregationArg,
    #[arg(long)]
    pub tie_break: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub pll_weight: f64,
    /// pKa table for the builtin pI objective.
    #[arg(long)]
    pub pka: Option<PathBuf>,
    /// Output prefix: writes PREFIX.tsv, PREFIX.fasta and PREFIX.manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

impl GenerateArgs {
    fn sampler_config(&self, mask: protbeam_core::PositionMask) -> SamplerConfig {
        match self.sampler {
            SamplerKind::Beam => {
                let mut cfg = BeamConfig::new(self.edits, mask);
                cfg.beam_size = self.beam.unwrap_or(if self.objectives.is_some() {
                    DEFAULT_GUIDED_BEAM_SIZE
                } else {
                    DEFAULT_BEAM_SIZE
                });
                cfg.tau = self.tau;
                cfg.gumbel_scale = self.gumbel_scale;
                cfg.rng_seed = self.rng_seed;
                cfg.dedup = !self.no_dedup;
                SamplerConfig::Beam(cfg)
            }
            kind => {
                let mut cfg = MutationSamplerConfig::new(self.edits, mask);
                cfg.tau = self.tau;
                cfg.rng_seed = self.rng_seed;
                cfg.position_strategy = match self.position_strategy {
                    StrategyArg::Random => PositionStrategy::Random,
                    StrategyArg::LowestEntropy => PositionStrategy::LowestEntropy,
                    StrategyArg::MaxProbability => PositionStrategy::MaxProbability,
                };
                cfg.decode = match (kind, self.decode) {
                    (SamplerKind::GibbsArgmax, _) | (_, DecodeArg::Argmax) => Decode::Argmax,
                    _ => Decode::Sample,
                };
                if kind == SamplerKind::Denoise {
                    SamplerConfig::Denoise(cfg)
                } else {
                    SamplerConfig::Gibbs(cfg)
                }
            }
        }
    }
}

pub(super) fn run(ctx: &Context, name: &str, args: &GenerateArgs) -> AppResult<()> {
    let mut manifest = ctx.manifest(name, args);
    let records = read_seeds(&args.seeds)?;
    manifest.record_input(&args.seeds)?;
    let mask = load_mask(args.mask.as_deref(), records.iter().map(|r| r.sequence.len()))?;
    if let Some(m) = &args.mask {
        manifest.record_input(m)?;
    }
    let config = args.sampler_config(mask);
    for r in &records {
        config
            .validate(r.sequence.len())
            .map_err(|e| AppError::config(format!("seed {}: {e}", r.id)))?;
    }
    let objectives = match &args.objectives {
        Some(path) if args.sampler != SamplerKind::Beam => {
            return Err(AppError::config(format!(
                "--objectives {} needs --sampler beam",
                path.display()
            )))
        }
        Some(path) => {
            manifest.record_input(path)?;
            let pka = load_pka(args.pka.as_deref())?;
            Some(load_objective_set(
                Some(path),
                args.aggregation.into(),
                args.pll_weight,
                args.tie_break.as_deref(),
                &pka,
            )?)
        }
        None => None,
    };
    let loaded = args.provider.load()?;
    let seeds: Vec<SeedInput> = records.iter().map(|r| SeedInput::new(r.id.clone(), r.sequence.clone())).collect();
    let run = batch_generate(&loaded.provider, &seeds, args.count, &config, objectives.as_ref(), &Rayon)?;

    let mut rows = Vec::with_capacity(run.outputs.len());
    let mut fasta = Vec::with_capacity(run.outputs.len());
    let mut rank = 0;
    for (i, out) in run.outputs.iter().enumerate() {
        let seed_id = out.candidate.seed_id();
        rank = if i > 0 && run.outputs[i - 1].candidate.seed_id() == seed_id {
            rank + 1
        } else {
            1
        };
        let id = format!("{seed_id}_{rank}");
        let edits = format_edits(out.candidate.edits());
        rows.push(CandidateRow {
            id: id.clone(),
            seed_id: seed_id.to_string(),
            sequence: out.candidate.sequence().to_string(),
            edits: edits.clone(),
            step: Some(out.step),
            sum_log: out.clean.map(|c| c.sum_log),
            per_residue: out.clean.map(|c| c.per_residue),
            pseudo_perplexity: out.clean.map(|c| c.pseudo_perplexity),
            perturbed: out.perturbed,
            guidance: out.guidance,
            rank: Some(rank),
        });
        fasta.push(FastaRecord {
            id: seed_id.to_string(),
            description: format!("id={id} edits={edits}"),
            sequence: out.candidate.sequence().clone(),
        });
    }
    let tsv = write_tsv(&rows)?;
    ctx.emit(&mut manifest, &with_suffix(&args.out, "tsv"), &tsv)?;
    let mut fa = Vec::new();
    write_fasta(&mut fa, &fasta)?;
    ctx.emit(&mut manifest, &with_suffix(&args.out, "fasta"), &fa)?;

    manifest.rng_seed = Some(args.rng_seed);
    manifest.tallies = run.tallies.clone();
    manifest.retry_budget_exhausted = run.retry_budget_exhausted();
    manifest.scored_sequences = objectives.as_ref().map(|_| run.scored_sequences);
    manifest.config["resolved"] = serde_json::to_value(&run.config)?;
    ctx.finish(manifest, &args.out, Some(&loaded))?;
    if run.retry_budget_exhausted() {
        let short: Vec<String> = run
            .tallies
            .iter()
            .filter(|t| t.exhausted)
            .map(|t| format!("{} ({}/{})", t.seed_id, t.achieved, t.requested))
            .collect();
        return Err(AppError::Exhausted(format!("seeds short of --count: {}", short.join(", "))));
    }
    Ok(())
}
