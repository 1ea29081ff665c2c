use std::path::PathBuf;

use clap::Args;
use protbeam_core::exec::Executor;
use protbeam_core::metrics::{
    germline_delta, isoelectric_point, liability_count, liability_scan, pairwise_diversity, region_mutation_count,
    DiversityMode, Liability,
};
use serde::Serialize;

use super::{load_pka, with_suffix, Context};
use crate::error::AppResult;
use crate::exec::Rayon;
use crate::io::{
    format_edits, parse_frequency_table, parse_mask, read_candidate_file, read_seeds, read_text, resolve_candidates,
    seed_map, write_tsv,
};

#[derive(Args, Debug, Clone, Serialize)]
pub struct MetricsArgs {
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub seeds: PathBuf,
    /// Region of interest for inside/outside edit counts.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Germline frequency table.
    #[arg(long)]
    pub germline: Option<PathBuf>,
    #[arg(long)]
    pub pka: Option<PathBuf>,
    /// Output prefix: writes PREFIX.tsv, PREFIX.liabilities.json and
    /// PREFIX.manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub id: String,
    pub seed_id: String,
    pub edits: String,
    pub edit_count: usize,
    pub intra_seed_diversity: Option<f64>,
    pub inter_seed_diversity: Option<f64>,
    pub isoelectric_point: f64,
    pub liability_count: usize,
    pub introduced_liabilities: usize,
    pub germline_delta: Option<f64>,
    pub edits_in_mask: Option<usize>,
    pub edits_outside_mask: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct LiabilityEntry {
    id: String,
    seed_id: String,
    introduced: Vec<Liability>,
}

pub(super) fn run(ctx: &Context, name: &str, args: &MetricsArgs) -> AppResult<()> {
    let mut manifest = ctx.manifest(name, args);
    let rows = read_candidate_file(&args.candidates)?;
    manifest.record_input(&args.candidates)?;
    let records = read_seeds(&args.seeds)?;
    manifest.record_input(&args.seeds)?;
    let cands = resolve_candidates(&rows, &seed_map(&records))?;
    let pka = load_pka(args.pka.as_deref())?;
    let mask = match &args.mask {
        Some(p) => {
            manifest.record_input(p)?;
            Some(parse_mask(&read_text(p)?)?)
        }
        None => None,
    };
    let germline = match &args.germline {
        Some(p) => {
            manifest.record_input(p)?;
            Some(parse_frequency_table(&read_text(p)?)?)
        }
        None => None,
    };
    let intra = pairwise_diversity(&cands, DiversityMode::IntraSeed)?;
    let inter = pairwise_diversity(&cands, DiversityMode::InterSeed)?;
    let per_child = Rayon.map(&cands, |c| -> AppResult<_> {
        let report = liability_scan(&c.seed_sequence(), c.sequence())?;
        let delta = germline.as_ref().map(|t| germline_delta(c, t)).transpose()?;
        Ok((isoelectric_point(c.sequence(), &pka), liability_count(c.sequence()), report, delta))
    });
    let mut table = Vec::with_capacity(cands.len());
    let mut sidecar = Vec::with_capacity(cands.len());
    for (i, (c, result)) in cands.iter().zip(per_child).enumerate() {
        let (pi, count, report, delta) = result?;
        let region = mask.as_ref().map(|m| region_mutation_count(c, m));
        table.push(MetricsRow {
            id: rows[i].id.clone(),
            seed_id: rows[i].seed_id.clone(),
            edits: format_edits(c.edits()),
            edit_count: c.edit_count(),
            intra_seed_diversity: intra[i],
            inter_seed_diversity: inter[i],
            isoelectric_point: pi,
            liability_count: count,
            introduced_liabilities: report.introduced.len(),
            germline_delta: delta,
            edits_in_mask: region.map(|r| r.0),
            edits_outside_mask: region.map(|r| r.1),
        });
        sidecar.push(LiabilityEntry {
            id: rows[i].id.clone(),
            seed_id: rows[i].seed_id.clone(),
            introduced: report.introduced,
        });
    }
    let tsv = write_tsv(&table)?;
    ctx.emit(&mut manifest, &with_suffix(&args.out, "tsv"), &tsv)?;
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    ctx.emit(&mut manifest, &with_suffix(&args.out, "liabilities.json"), json.as_bytes())?;
    ctx.finish(manifest, &args.out, None)?;
    Ok(())
}
