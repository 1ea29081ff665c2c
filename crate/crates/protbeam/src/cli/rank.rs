use std::path::PathBuf;

use clap::Args;
use protbeam_core::guidance::{guided_rank, ObjectiveMemo};
use protbeam_core::ProteinSequence;
use serde::Serialize;

use super::{load_pka, with_suffix, AggregationArg, Context};
use crate::error::{AppError, AppResult};
use crate::io::{read_candidate_file, write_tsv};
use crate::objectives::load_objective_set;

/// Candidates handed to a ranker in the reference workflow.
pub const DEFAULT_TOP_K: usize = 1000;

#[derive(Args, Debug, Clone, Serialize)]
pub struct RankArgs {
    /// Candidate TSV with a sum_log column.
    #[arg(long)]
    pub candidates: PathBuf,
    /// Objective file; without one, candidates are ranked by pseudo-perplexity.
    #[arg(long)]
    pub objectives: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AggregationArg::Sts)]
    pub aggregation: AggregationArg,
    #[arg(long)]
    pub tie_break: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub pll_weight: f64,
    /// Only the first K input rows are ranked.
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub top_k: usize,
    #[arg(long)]
    pub pka: Option<PathBuf>,
    /// Output prefix: writes PREFIX.tsv and PREFIX.manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

pub(super) fn run(ctx: &Context, name: &str, args: &RankArgs) -> AppResult<()> {
    let mut manifest = ctx.manifest(name, args);
    let mut rows = read_candidate_file(&args.candidates)?;
    manifest.record_input(&args.candidates)?;
    if let Some(p) = &args.objectives {
        manifest.record_input(p)?;
    }
    if args.top_k == 0 {
        return Err(AppError::config("--top-k must be at least 1"));
    }
    rows.truncate(args.top_k);
    let pka = load_pka(args.pka.as_deref())?;
    let set = load_objective_set(
        args.objectives.as_deref(),
        args.aggregation.into(),
        args.pll_weight,
        args.tie_break.as_deref(),
        &pka,
    )?;
    let seqs: Vec<ProteinSequence> = rows.iter().map(|r| r.parse_sequence()).collect::<AppResult<_>>()?;
    let logs: Vec<f64> = rows
        .iter()
        .map(|r| {
            r.sum_log
                .ok_or_else(|| AppError::config(format!("candidate {} has no sum_log; run score first", r.id)))
        })
        .collect::<AppResult<_>>()?;
    let mut memo = ObjectiveMemo::new();
    let ranked = if rows.is_empty() {
        Vec::new()
    } else {
        let ranking = guided_rank(&seqs, &logs, &set, &mut memo)?;
        ranking
            .order
            .iter()
            .enumerate()
            .map(|(pos, &i)| {
                let mut row = rows[i].clone();
                row.guidance = Some(ranking.scores[i]);
                row.rank = Some(pos + 1);
                row
            })
            .collect()
    };
    let tsv = write_tsv(&ranked)?;
    ctx.emit(&mut manifest, &with_suffix(&args.out, "tsv"), &tsv)?;
    manifest.scored_sequences = Some(memo.scored_sequences());
    ctx.finish(manifest, &args.out, None)?;
    Ok(())
}
