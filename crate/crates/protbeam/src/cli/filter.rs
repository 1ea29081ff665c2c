use std::path::PathBuf;

use clap::Args;
use protbeam_core::guidance::Direction;
use protbeam_core::metrics::{isoelectric_point, liability_scan, MotifClass};
use protbeam_core::ProteinSequence;
use serde::Serialize;

use super::{load_pka, with_suffix, Context};
use crate::error::{AppError, AppResult};
use crate::io::{read_candidate_file, read_seeds, resolve_candidates, seed_map, write_tsv};
use crate::objectives::{build_objectives, load_objective_configs};

#[derive(Args, Debug, Clone, Serialize)]
pub struct FilterArgs {
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub seeds: PathBuf,
    /// Reject candidates whose isoelectric point exceeds this value.
    #[arg(long)]
    pub max_pi: Option<f64>,
    #[arg(long)]
    pub pka: Option<PathBuf>,
    /// Liability classes to reject when introduced (comma separated, or
    /// `all`): asp_pro, deamidation, isomerization, n_glycosylation,
    /// oxidation_met_trp, unpaired_cysteine.
    #[arg(long, value_delimiter = ',')]
    pub exclude_liabilities: Vec<String>,
    /// Objective file holding the thresholded objective.
    #[arg(long, requires = "threshold_objective")]
    pub objectives: Option<PathBuf>,
    #[arg(long, requires_all = ["objectives", "threshold"])]
    pub threshold_objective: Option<String>,
    /// Survivors score strictly above (maximize) or below (minimize) this.
    #[arg(long, requires = "threshold_objective")]
    pub threshold: Option<f64>,
    /// Output prefix: writes PREFIX.tsv, PREFIX.rejections.tsv and
    /// PREFIX.manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rejection {
    pub id: String,
    pub seed_id: String,
    pub sequence: String,
    pub reason: String,
    pub detail: String,
}

fn excluded_classes(names: &[String]) -> AppResult<Vec<MotifClass>> {
    let mut out = Vec::new();
    for n in names.iter().map(|n| n.trim()).filter(|n| !n.is_empty()) {
        if n == "all" {
            out.extend(MotifClass::ALL);
            continue;
        }
        let class = MotifClass::ALL
            .into_iter()
            .find(|c| c.name() == n)
            .ok_or_else(|| AppError::config(format!("unknown liability class {n:?}")))?;
        out.push(class);
    }
    out.sort();
    out.dedup();
    Ok(out)
}

pub(super) fn run(ctx: &Context, name: &str, args: &FilterArgs) -> AppResult<()> {
    let mut manifest = ctx.manifest(name, args);
    let rows = read_candidate_file(&args.candidates)?;
    manifest.record_input(&args.candidates)?;
    let records = read_seeds(&args.seeds)?;
    manifest.record_input(&args.seeds)?;
    let cands = resolve_candidates(&rows, &seed_map(&records))?;
    let pka = load_pka(args.pka.as_deref())?;
    let classes = excluded_classes(&args.exclude_liabilities)?;
    let threshold = match (&args.objectives, &args.threshold_objective, args.threshold) {
        (Some(path), Some(obj), Some(t)) => {
            manifest.record_input(path)?;
            let base = path.parent().unwrap_or(std::path::Path::new("."));
            let configs: Vec<_> = load_objective_configs(path)?
                .into_iter()
                .filter(|c| &c.name == obj)
                .collect();
            if configs.is_empty() {
                return Err(AppError::config(format!("objective {obj:?} not in {}", path.display())));
            }
            Some((build_objectives(&configs, base, &pka)?.remove(0), t))
        }
        _ => None,
    };

    let mut alive: Vec<usize> = Vec::new();
    let mut rejections = Vec::new();
    let reject = |i: usize, reason: String, detail: String| Rejection {
        id: rows[i].id.clone(),
        seed_id: rows[i].seed_id.clone(),
        sequence: rows[i].sequence.clone(),
        reason,
        detail,
    };
    for (i, cand) in cands.iter().enumerate() {
        if let Some(max) = args.max_pi {
            let pi = isoelectric_point(cand.sequence(), &pka);
            if pi > max {
                rejections.push((i, reject(i, "pi".into(), format!("pI={pi:.3}>{max}"))));
                continue;
            }
        }
        if !classes.is_empty() {
            let report = liability_scan(&cand.seed_sequence(), cand.sequence())?;
            let hits: Vec<_> = report.introduced.iter().filter(|l| classes.contains(&l.class)).collect();
            if !hits.is_empty() {
                let mut names: Vec<&str> = hits.iter().map(|l| l.class.name()).collect();
                names.dedup();
                let detail = hits
                    .iter()
                    .map(|l| format!("{}@{}-{}:{}", l.class.name(), l.start, l.end, l.text))
                    .collect::<Vec<_>>()
                    .join(";");
                rejections.push((i, reject(i, names.join(","), detail)));
                continue;
            }
        }
        alive.push(i);
    }
    if let Some((spec, t)) = &threshold {
        let seqs: Vec<ProteinSequence> = alive.iter().map(|&i| cands[i].sequence().clone()).collect();
        let scores = spec.evaluate(&seqs)?;
        let mut survivors = Vec::with_capacity(alive.len());
        for (&i, &score) in alive.iter().zip(&scores) {
            let pass = match spec.direction {
                Direction::Maximize => score > *t,
                Direction::Minimize => score < *t,
            };
            if pass {
                survivors.push(i);
            } else {
                rejections.push((i, reject(i, spec.name.clone(), format!("{}={score} vs threshold {t}", spec.name))));
            }
        }
        alive = survivors;
    }

    let kept: Vec<_> = alive.iter().map(|&i| rows[i].clone()).collect();
    rejections.sort_by_key(|(i, _)| *i);
    let rejections: Vec<Rejection> = rejections.into_iter().map(|(_, r)| r).collect();
    let tsv = write_tsv(&kept)?;
    ctx.emit(&mut manifest, &with_suffix(&args.out, "tsv"), &tsv)?;
    let log = write_tsv(&rejections)?;
    ctx.emit(&mut manifest, &with_suffix(&args.out, "rejections.tsv"), &log)?;
    ctx.finish(manifest, &args.out, None)?;
    Ok(())
}
