//! Objective configuration files and the scorers they name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use protbeam_core::guidance::{Aggregation, Direction, ObjectiveSet, ObjectiveSpec, SequenceScorer, TableScorer};
use protbeam_core::metrics::{LiabilityCountScorer, PiScorer, PkaSet};
use protbeam_core::ProteinSequence;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::io::read_text;
use crate::wire::{ScoreRequest, ScoreResponse};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScorerConfig {
    Remote { url: String },
    /// TSV of `sequence<TAB>score`; relative paths resolve against the
    /// objective file's directory.
    Table { file: PathBuf },
    BuiltinPi,
    BuiltinLiabilityCount,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub name: String,
    pub direction: Direction,
    #[serde(default = "one")]
    pub weight: f64,
    pub scorer: ScorerConfig,
}

fn one() -> f64 {
    1.0
}

/// `POST {url}/score` with `{"sequences": [...]}`.
pub struct RemoteScorer {
    url: String,
    agent: ureq::Agent,
}

impl RemoteScorer {
    pub fn new(url: &str) -> Self {
        RemoteScorer {
            url: url.trim_end_matches('/').to_string(),
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(120)).build(),
        }
    }
}

impl SequenceScorer for RemoteScorer {
    fn score_batch(&self, sequences: &[ProteinSequence]) -> Result<Vec<f64>, String> {
        let body = ScoreRequest {
            sequences: sequences.iter().map(ProteinSequence::to_code_string).collect(),
        };
        let value = serde_json::to_value(&body).map_err(|e| e.to_string())?;
        let resp: ScoreResponse = self
            .agent
            .post(&format!("{}/score", self.url))
            .send_json(value)
            .map_err(|e| e.to_string())?
            .into_json()
            .map_err(|e| format!("undecodable body: {e}"))?;
        Ok(resp.scores)
    }
}

pub fn parse_score_table(text: &str) -> AppResult<BTreeMap<ProteinSequence, f64>> {
    let mut table = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(AppError::config(format!("score table line {}: expected two columns", n + 1)));
        }
        let Ok(score) = fields[1].trim().parse::<f64>() else {
            if n == 0 {
                continue;
            }
            return Err(AppError::config(format!("score table line {}: bad score", n + 1)));
        };
        let seq = fields[0]
            .trim()
            .parse()
            .map_err(|e| AppError::config(format!("score table line {}: {e}", n + 1)))?;
        table.insert(seq, score);
    }
    Ok(table)
}

pub fn build_scorer(config: &ScorerConfig, base: &Path, pka: &PkaSet) -> AppResult<Arc<dyn SequenceScorer>> {
    Ok(match config {
        ScorerConfig::Remote { url } => Arc::new(RemoteScorer::new(url)),
        ScorerConfig::Table { file } => {
            let path = if file.is_absolute() { file.clone() } else { base.join(file) };
            Arc::new(TableScorer::new(parse_score_table(&read_text(&path)?)?))
        }
        ScorerConfig::BuiltinPi => Arc::new(PiScorer { pka: *pka }),
        ScorerConfig::BuiltinLiabilityCount => Arc::new(LiabilityCountScorer),
    })
}

pub fn load_objective_configs(path: &Path) -> AppResult<Vec<ObjectiveConfig>> {
    serde_json::from_str(&read_text(path)?).map_err(|e| AppError::config(format!("{}: {e}", path.display())))
}

pub fn build_objectives(configs: &[ObjectiveConfig], base: &Path, pka: &PkaSet) -> AppResult<Vec<ObjectiveSpec>> {
    configs
        .iter()
        .map(|c| {
            Ok(ObjectiveSpec::new(
                c.name.clone(),
                c.direction,
                c.weight,
                build_scorer(&c.scorer, base, pka)?,
            ))
        })
        .collect()
}

/// Loads an objective file into a ranking set.
pub fn load_objective_set(
    path: Option<&Path>,
    aggregation: Aggregation,
    pll_weight: f64,
    tie_break: Option<&str>,
    pka: &PkaSet,
) -> AppResult<ObjectiveSet> {
    let objectives = match path {
        Some(p) => {
            let base = p.parent().unwrap_or(Path::new("."));
            build_objectives(&load_objective_configs(p)?, base, pka)?
        }
        None => Vec::new(),
    };
    let mut set = ObjectiveSet::new(objectives, aggregation)?.with_pll_weight(pll_weight)?;
    if let Some(name) = tie_break {
        set = set.with_tie_break(name)?;
    }
    Ok(set)
}
