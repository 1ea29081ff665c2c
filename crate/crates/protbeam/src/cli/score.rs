use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use protbeam_core::exec::Executor;
use protbeam_core::pll::{
    approx_pll_double_mask, approx_pll_nomask_child, approx_pll_wt, build_profile, exact_pll, single_substitution,
    DoubleMaskTerms, NoMaskTemplate,
};
use protbeam_core::provider::Metered;
use protbeam_core::seq::Edit;
use protbeam_core::{Approximation, CandidateSequence, MaskedLogitProvider, PllScore, PositionMask, ProteinSequence, Residue};
use serde::Serialize;

use super::{load_mask, with_suffix, Context, ProviderArgs};
use crate::error::{AppError, AppResult};
use crate::exec::Rayon;
use crate::io::{format_edits, read_candidate_file, read_seeds, resolve_candidates, seed_map, write_tsv};

fn parse_approximation(s: &str) -> Result<Approximation, String> {
    s.parse().map_err(|e: protbeam_core::Error| e.to_string())
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ScoreArgs {
    /// Templates. Without --candidates every single substitution inside the
    /// mask is scored.
    #[arg(long)]
    pub seeds: PathBuf,
    /// Candidate TSV or FASTA to score against their seeds.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// exact, double-mask, wt, nomask-child or nomask-template; repeatable
    /// (defaults to all five).
    #[arg(long = "approximation", value_parser = parse_approximation)]
    pub approximations: Vec<Approximation>,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Output prefix: writes PREFIX.tsv and PREFIX.manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

/// One row of the score table. `forward_passes` is what scoring this row
/// added to the ledger; work shared across a template's children is charged
/// to its first row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreRow {
    pub id: String,
    pub edits: String,
    pub sum_log: f64,
    pub per_residue: f64,
    pub pseudo_perplexity: f64,
    pub approximation_name: &'static str,
    pub forward_passes: u64,
}

struct Scored {
    score: PllScore,
    passes: u64,
}

fn metered<P, T>(provider: &P, f: impl FnOnce(&Metered<'_, P>) -> protbeam_core::Result<T>) -> AppResult<(T, u64)>
where
    P: MaskedLogitProvider + ?Sized,
{
    let m = Metered::new(provider);
    let value = f(&m)?;
    Ok((value, m.passes()))
}

/// Scores `children` (all derived from `template`) with one approximation.
/// `with_template` also scores the template itself under `exact`, which is
/// what a full neighborhood sweep costs.
fn score_children<P: MaskedLogitProvider + ?Sized>(
    provider: &P,
    template: &ProteinSequence,
    children: &[CandidateSequence],
    tau: f64,
    approx: Approximation,
    with_template: bool,
) -> AppResult<Vec<Scored>> {
    if children.is_empty() {
        return Ok(Vec::new());
    }
    let single = |c: &CandidateSequence| -> protbeam_core::Result<Option<(usize, Residue)>> {
        single_substitution(template, c.sequence())
    };
    let mut shared = 0;
    let mut out: Vec<Scored> = match approx {
        Approximation::Exact => {
            if with_template {
                shared = metered(provider, |m| build_profile(m, template, tau))?.1;
            }
            Rayon
                .map(children, |c| metered(provider, |m| exact_pll(m, c.sequence(), tau)))
                .into_iter()
                .map(|r| r.map(|(score, passes)| Scored { score, passes }))
                .collect::<AppResult<_>>()?
        }
        Approximation::WildType => {
            let (profile, passes) = metered(provider, |m| build_profile(m, template, tau))?;
            shared = passes;
            children
                .iter()
                .map(|c| {
                    Ok(Scored {
                        score: approx_pll_wt(&profile, c.sequence())?,
                        passes: 0,
                    })
                })
                .collect::<AppResult<_>>()?
        }
        Approximation::DoubleMask => {
            let (profile, passes) = metered(provider, |m| build_profile(m, template, tau))?;
            shared = passes;
            let sites: Vec<Option<usize>> = children
                .iter()
                .map(|c| Ok(single(c)?.map(|(k, _)| k)))
                .collect::<AppResult<_>>()?;
            // one set of pair passes per distinct site, charged to its first child
            let mut distinct: Vec<usize> = sites.iter().flatten().copied().collect();
            distinct.sort_unstable();
            distinct.dedup();
            let terms = Rayon.map(&distinct, |&k| metered(provider, |m| DoubleMaskTerms::compute(m, template, k, tau)));
            let mut by_site = BTreeMap::new();
            for (k, t) in distinct.iter().zip(terms) {
                by_site.insert(*k, t?);
            }
            let mut charged = std::collections::BTreeSet::new();
            children
                .iter()
                .zip(&sites)
                .map(|(c, site)| match site {
                    None => Ok(Scored {
                        score: approx_pll_double_mask(provider, &profile, c.sequence())?,
                        passes: 0,
                    }),
                    Some(k) => {
                        let (terms, passes) = &by_site[k];
                        let (_, r) = single(c)?.unwrap_or((*k, template.residues()[*k]));
                        Ok(Scored {
                            score: terms.score(&profile, r),
                            passes: if charged.insert(*k) { *passes } else { 0 },
                        })
                    }
                })
                .collect::<AppResult<_>>()?
        }
        Approximation::NomaskChild => Rayon
            .map(children, |c| metered(provider, |m| approx_pll_nomask_child(m, c.sequence(), tau)))
            .into_iter()
            .map(|r| r.map(|(score, passes)| Scored { score, passes }))
            .collect::<AppResult<_>>()?,
        Approximation::NomaskTemplate => {
            let (rows, passes) = metered(provider, |m| NoMaskTemplate::compute(m, template, tau))?;
            shared = passes;
            children
                .iter()
                .map(|c| {
                    Ok(Scored {
                        score: rows.score(c.sequence())?,
                        passes: 0,
                    })
                })
                .collect::<AppResult<_>>()?
        }
    };
    out[0].passes += shared;
    Ok(out)
}

fn neighborhood(seed_id: &str, seed: &ProteinSequence, mask: &PositionMask) -> AppResult<Vec<CandidateSequence>> {
    mask.check_bounds(seed.len())?;
    if mask.is_empty() {
        return Err(AppError::config("empty mask"));
    }
    let start = CandidateSequence::from_seed(seed_id, seed.clone());
    let mut out = Vec::new();
    for k in mask.iter() {
        for r in Residue::all().filter(|&r| r != seed.residues()[k]) {
            out.push(start.apply_edit(k, r)?);
        }
    }
    Ok(out)
}

fn neighbor_id(seed_id: &str, e: &Edit) -> String {
    format!("{seed_id}_{}{}", e.position + 1, e.to.code())
}

pub(super) fn run(ctx: &Context, name: &str, args: &ScoreArgs) -> AppResult<()> {
    let mut manifest = ctx.manifest(name, args);
    let records = read_seeds(&args.seeds)?;
    manifest.record_input(&args.seeds)?;
    let approximations = if args.approximations.is_empty() {
        Approximation::ALL.to_vec()
    } else {
        args.approximations.clone()
    };
    protbeam_core::pll::check_tau(args.tau)?;

    // (seed, children, ids) groups in output order
    let mut groups: Vec<(ProteinSequence, Vec<CandidateSequence>, Vec<String>)> = Vec::new();
    match &args.candidates {
        Some(path) => {
            manifest.record_input(path)?;
            let rows = read_candidate_file(path)?;
            let seeds = seed_map(&records);
            let cands = resolve_candidates(&rows, &seeds)?;
            for r in &records {
                let (ids, kids): (Vec<String>, Vec<CandidateSequence>) = rows
                    .iter()
                    .zip(&cands)
                    .filter(|(row, _)| row.seed_id == r.id)
                    .map(|(row, c)| (row.id.clone(), c.clone()))
                    .unzip();
                if !kids.is_empty() {
                    groups.push((r.sequence.clone(), kids, ids));
                }
            }
        }
        None => {
            let mask = load_mask(args.mask.as_deref(), records.iter().map(|r| r.sequence.len()))?;
            if let Some(m) = &args.mask {
                manifest.record_input(m)?;
            }
            for r in &records {
                let kids = neighborhood(&r.id, &r.sequence, &mask)?;
                let ids = kids.iter().map(|c| neighbor_id(&r.id, &c.edits()[0])).collect();
                groups.push((r.sequence.clone(), kids, ids));
            }
        }
    }

    let loaded = args.provider.load()?;
    let mut rows = Vec::new();
    for (template, kids, ids) in &groups {
        for &approx in &approximations {
            let scored = score_children(&loaded.provider, template, kids, args.tau, approx, args.candidates.is_none())?;
            for ((c, id), s) in kids.iter().zip(ids).zip(scored) {
                rows.push(ScoreRow {
                    id: id.clone(),
                    edits: format_edits(c.edits()),
                    sum_log: s.score.sum_log,
                    per_residue: s.score.per_residue,
                    pseudo_perplexity: s.score.pseudo_perplexity,
                    approximation_name: approx.name(),
                    forward_passes: s.passes,
                });
            }
        }
    }
    let tsv = write_tsv(&rows)?;
    ctx.emit(&mut manifest, &with_suffix(&args.out, "tsv"), &tsv)?;
    ctx.finish(manifest, &args.out, Some(&loaded))?;
    Ok(())
}
