//! Black-box multi-objective ranking of candidate neighborhoods.
//!
//! Objectives are oriented so lower is better, standardized per column over
//! the candidate set, then aggregated either by weighted smooth Tchebycheff
//! scalarization (`log sum_i c_i exp(z_i)`) or by non-dominated sorting with a
//! tie-break column. The language-model objective is always present under the
//! name [`PLL_OBJECTIVE`] and carries the pseudo-perplexity of the (possibly
//! Gumbel-perturbed) summed log score.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::ProteinSequence;

pub const PLL_OBJECTIVE: &str = "pseudo_perplexity";

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    #[inline]
    fn orient(self, value: f64) -> f64 {
        match self {
            Direction::Minimize => value,
            Direction::Maximize => -value,
        }
    }
}

/// A pure function from clean sequences to finite reals.
pub trait SequenceScorer: Send + Sync {
    /// One score per input sequence, in order. Errors carry a reason string.
    fn score_batch(&self, sequences: &[ProteinSequence]) -> core::result::Result<Vec<f64>, String>;
}

/// Looks sequences up in a fixed table.
#[derive(Clone, Debug, Default)]
pub struct TableScorer {
    table: BTreeMap<ProteinSequence, f64>,
}

impl TableScorer {
    pub fn new(table: BTreeMap<ProteinSequence, f64>) -> Self {
        TableScorer { table }
    }
}

impl SequenceScorer for TableScorer {
    fn score_batch(&self, sequences: &[ProteinSequence]) -> core::result::Result<Vec<f64>, String> {
        sequences
            .iter()
            .map(|s| {
                self.table
                    .get(s)
                    .copied()
                    .ok_or_else(|| alloc::format!("sequence {s} not in table"))
            })
            .collect()
    }
}

impl<F> SequenceScorer for F
where
    F: Fn(&ProteinSequence) -> f64 + Send + Sync,
{
    fn score_batch(&self, sequences: &[ProteinSequence]) -> core::result::Result<Vec<f64>, String> {
        Ok(sequences.iter().map(self).collect())
    }
}

#[derive(Clone)]
pub struct ObjectiveSpec {
    pub name: String,
    pub direction: Direction,
    pub weight: f64,
    pub scorer: Arc<dyn SequenceScorer>,
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("name", &self.name)
            .field("direction", &self.direction)
            .field("weight", &self.weight)
            .finish_non_exhaustive()
    }
}

impl ObjectiveSpec {
    pub fn new(
        name: impl Into<String>,
        direction: Direction,
        weight: f64,
        scorer: Arc<dyn SequenceScorer>,
    ) -> Self {
        ObjectiveSpec {
            name: name.into(),
            direction,
            weight,
            scorer,
        }
    }

    /// Scores `sequences`, turning any failure or non-finite value into
    /// [`Error::ScorerFailure`].
    pub fn evaluate(&self, sequences: &[ProteinSequence]) -> Result<Vec<f64>> {
        if sequences.is_empty() {
            return Ok(Vec::new());
        }
        let failure = |sequence: &ProteinSequence, reason: String| Error::ScorerFailure {
            name: self.name.clone(),
            sequence: sequence.to_code_string(),
            reason,
        };
        let scores = self
            .scorer
            .score_batch(sequences)
            .map_err(|reason| failure(&sequences[0], reason))?;
        if scores.len() != sequences.len() {
            return Err(failure(
                &sequences[0],
                alloc::format!("returned {} scores for {} sequences", scores.len(), sequences.len()),
            ));
        }
        if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
            return Err(failure(&sequences[i], "non-finite score".to_string()));
        }
        Ok(scores)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sts,
    Nds,
}

/// External objectives plus the implicit pseudo-perplexity objective.
#[derive(Clone, Debug)]
pub struct ObjectiveSet {
    objectives: Vec<ObjectiveSpec>,
    pll_weight: f64,
    aggregation: Aggregation,
    tie_break: String,
}

fn check_weight(name: &str, weight: f64) -> Result<()> {
    if weight > 0.0 && weight.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(alloc::format!(
            "objective {name} needs a positive weight, got {weight}"
        )))
    }
}

impl ObjectiveSet {
    pub fn new(objectives: Vec<ObjectiveSpec>, aggregation: Aggregation) -> Result<Self> {
        let mut names = BTreeSet::new();
        names.insert(PLL_OBJECTIVE);
        for o in &objectives {
            if !names.insert(o.name.as_str()) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "duplicate objective name {:?}",
                    o.name
                )));
            }
            check_weight(&o.name, o.weight)?;
        }
        Ok(ObjectiveSet {
            objectives,
            pll_weight: 1.0,
            aggregation,
            tie_break: PLL_OBJECTIVE.to_string(),
        })
    }

    pub fn with_pll_weight(mut self, weight: f64) -> Result<Self> {
        check_weight(PLL_OBJECTIVE, weight)?;
        self.pll_weight = weight;
        Ok(self)
    }

    pub fn with_tie_break(mut self, name: &str) -> Result<Self> {
        if name != PLL_OBJECTIVE && !self.objectives.iter().any(|o| o.name == name) {
            return Err(Error::InvalidConfig(alloc::format!(
                "tie-break {name:?} is not an objective"
            )));
        }
        self.tie_break = name.to_string();
        Ok(self)
    }

    pub fn objectives(&self) -> &[ObjectiveSpec] {
        &self.objectives
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation
    }

    pub fn tie_break(&self) -> &str {
        &self.tie_break
    }

    /// Column names, with the PLL objective first.
    pub fn column_names(&self) -> Vec<&str> {
        core::iter::once(PLL_OBJECTIVE)
            .chain(self.objectives.iter().map(|o| o.name.as_str()))
            .collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        core::iter::once(self.pll_weight)
            .chain(self.objectives.iter().map(|o| o.weight))
            .collect()
    }

    pub fn directions(&self) -> Vec<Direction> {
        core::iter::once(Direction::Minimize)
            .chain(self.objectives.iter().map(|o| o.direction))
            .collect()
    }

    fn tie_break_column(&self) -> usize {
        self.column_names()
            .iter()
            .position(|&n| n == self.tie_break)
            .unwrap_or(0)
    }
}

/// Raw, oriented and standardized objective values, one row per candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    pub raw: Vec<Vec<f64>>,
    pub oriented: Vec<Vec<f64>>,
    pub standardized: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn rows(&self) -> usize {
        self.raw.len()
    }

    pub fn columns(&self) -> usize {
        self.raw.first().map_or(0, Vec::len)
    }
}

/// Population z-scores of one column. Columns whose spread is negligible
/// relative to their magnitude map to all zeros.
pub fn zscore(column: &[f64]) -> Vec<f64> {
    let n = column.len() as f64;
    let mean = column.iter().sum::<f64>() / n;
    let var = column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = libm::sqrt(var);
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return vec![0.0; column.len()];
    }
    column.iter().map(|v| (v - mean) / sd).collect()
}

/// Negates maximize columns and standardizes every column over exactly these
/// rows.
pub fn orient_and_zscore(raw: Vec<Vec<f64>>, directions: &[Direction]) -> Result<ScoreMatrix> {
    if raw.is_empty() {
        return Err(Error::InvalidConfig("no candidates to standardize".to_string()));
    }
    let m = directions.len();
    if let Some(row) = raw.iter().find(|r| r.len() != m) {
        return Err(Error::LengthMismatch {
            expected: m,
            found: row.len(),
        });
    }
    let oriented: Vec<Vec<f64>> = raw
        .iter()
        .map(|row| row.iter().zip(directions).map(|(&v, d)| d.orient(v)).collect())
        .collect();
    let mut standardized = vec![vec![0.0; m]; raw.len()];
    for c in 0..m {
        let column: Vec<f64> = oriented.iter().map(|row| row[c]).collect();
        for (row, z) in standardized.iter_mut().zip(zscore(&column)) {
            row[c] = z;
        }
    }
    Ok(ScoreMatrix {
        raw,
        oriented,
        standardized,
    })
}

/// `log sum_i c_i exp(z_i)` per candidate; lower is better.
pub fn sts_scalarize(matrix: &ScoreMatrix, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != matrix.columns() {
        return Err(Error::LengthMismatch {
            expected: matrix.columns(),
            found: weights.len(),
        });
    }
    for (i, &w) in weights.iter().enumerate() {
        check_weight(&alloc::format!("#{i}"), w)?;
    }
    Ok(matrix
        .standardized
        .iter()
        .map(|z| {
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = z
                .iter()
                .zip(weights)
                .map(|(&v, &c)| c * libm::exp(v - max))
                .sum();
            max + libm::log(total)
        })
        .collect())
}

/// `a` dominates `b`: no worse anywhere, strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Front index of each row (0 = non-dominated), by repeated peeling.
pub fn nds_fronts(rows: &[Vec<f64>]) -> Vec<usize> {
    let n = rows.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&rows[i], &rows[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&rows[j], &rows[i]) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut front = vec![usize::MAX; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut level = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            front[i] = level;
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        current = next;
        level += 1;
    }
    front
}

/// `(front, rank within front)` for each row. Within a front, rows are
/// ordered by the tie-break column ascending, then by input index.
pub fn nds_rank(matrix: &ScoreMatrix, tie_break_column: usize) -> Result<Vec<(usize, usize)>> {
    if tie_break_column >= matrix.columns() {
        return Err(Error::InvalidConfig(alloc::format!(
            "tie-break column {tie_break_column} out of range"
        )));
    }
    let fronts = nds_fronts(&matrix.oriented);
    let mut order: Vec<usize> = (0..matrix.rows()).collect();
    order.sort_by(|&a, &b| {
        fronts[a]
            .cmp(&fronts[b])
            .then(matrix.oriented[a][tie_break_column].total_cmp(&matrix.oriented[b][tie_break_column]))
            .then(a.cmp(&b))
    });
    let mut out = vec![(0, 0); matrix.rows()];
    let mut within = 0;
    for (pos, &i) in order.iter().enumerate() {
        if pos > 0 && fronts[order[pos - 1]] != fronts[i] {
            within = 0;
        }
        out[i] = (fronts[i], within);
        within += 1;
    }
    Ok(out)
}

/// Run-wide memo of external objective values per sequence.
#[derive(Clone, Debug, Default)]
pub struct ObjectiveMemo {
    values: BTreeMap<ProteinSequence, Vec<f64>>,
    scorer_calls: u64,
}

impl ObjectiveMemo {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of distinct sequences sent to scorers so far.
    pub fn scored_sequences(&self) -> u64 {
        self.scorer_calls
    }

    /// External objective values for each candidate (one row per candidate,
    /// one column per external objective). Each scorer sees every unseen
    /// sequence once.
    pub fn evaluate(
        &mut self,
        objectives: &ObjectiveSet,
        candidates: &[ProteinSequence],
    ) -> Result<Vec<Vec<f64>>> {
        let missing: Vec<ProteinSequence> = candidates
            .iter()
            .filter(|s| !self.values.contains_key(*s))
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if !missing.is_empty() {
            let columns = objectives
                .objectives()
                .iter()
                .map(|o| o.evaluate(&missing))
                .collect::<Result<Vec<_>>>()?;
            for (i, seq) in missing.into_iter().enumerate() {
                let row = columns.iter().map(|col| col[i]).collect();
                self.values.insert(seq, row);
                self.scorer_calls += 1;
            }
        }
        Ok(candidates.iter().map(|s| self.values[s].clone()).collect())
    }
}

/// Ordering produced by [`guided_rank`].
#[derive(Clone, Debug, PartialEq)]
pub struct GuidedRanking {
    /// Candidate indices, best first.
    pub order: Vec<usize>,
    /// STS score, or NDS front index, per candidate (input order).
    pub scores: Vec<f64>,
    pub matrix: ScoreMatrix,
}

/// Ranks candidates by the configured aggregation. `log_scores` are the
/// summed (already perturbed, when applicable) log scores, converted here to
/// pseudo-perplexity for the implicit PLL objective. Ties fall back to the
/// sequence string.
pub fn guided_rank(
    candidates: &[ProteinSequence],
    log_scores: &[f64],
    objectives: &ObjectiveSet,
    memo: &mut ObjectiveMemo,
) -> Result<GuidedRanking> {
    if candidates.len() != log_scores.len() {
        return Err(Error::LengthMismatch {
            expected: candidates.len(),
            found: log_scores.len(),
        });
    }
    let external = memo.evaluate(objectives, candidates)?;
    let raw: Vec<Vec<f64>> = candidates
        .iter()
        .zip(log_scores)
        .zip(external)
        .map(|((seq, &sum), ext)| {
            let ppl = libm::exp(-sum / seq.len() as f64);
            core::iter::once(ppl).chain(ext).collect()
        })
        .collect();
    let matrix = orient_and_zscore(raw, &objectives.directions())?;
    let keys: Vec<_> = candidates.iter().map(ProteinSequence::to_code_string).collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    let scores = match objectives.aggregation() {
        Aggregation::Sts => {
            let scores = sts_scalarize(&matrix, &objectives.weights())?;
            order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then_with(|| keys[a].cmp(&keys[b])));
            scores
        }
        Aggregation::Nds => {
            let fronts = nds_fronts(&matrix.oriented);
            let tb = objectives.tie_break_column();
            order.sort_by(|&a, &b| {
                fronts[a]
                    .cmp(&fronts[b])
                    .then(matrix.oriented[a][tb].total_cmp(&matrix.oriented[b][tb]))
                    .then_with(|| keys[a].cmp(&keys[b]))
            });
            fronts.iter().map(|&f| f as f64).collect()
        }
    };
    Ok(GuidedRanking {
        order,
        scores,
        matrix,
    })
}

/// Indices of candidates whose score strictly passes `threshold`: above it
/// when maximizing, below it when minimizing. Input order is preserved.
pub fn threshold_filter(
    candidates: &[ProteinSequence],
    scorer: &ObjectiveSpec,
    threshold: f64,
) -> Result<Vec<usize>> {
    let scores = scorer.evaluate(candidates)?;
    Ok(scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| match scorer.direction {
            Direction::Maximize => s > threshold,
            Direction::Minimize => s < threshold,
        })
        .map(|(i, _)| i)
        .collect())
}

/// Total-order helper for sorting descending by an `f64` key.
#[inline]
pub fn desc(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}
