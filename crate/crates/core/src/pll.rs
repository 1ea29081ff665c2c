//! Pseudo-log-likelihood scoring of a template and of its single-substitution
//! neighbors.
//!
//! Scores use the summed convention internally; [`PllScore`] also carries the
//! per-residue mean and the pseudo-perplexity. Five ways to score a child that
//! differs from its template at one position `k` are provided, from most to
//! least faithful:
//!
//! | approximation     | row `i` sees at `i` | row `i` sees at `k` | passes for all children |
//! |-------------------|---------------------|---------------------|-------------------------|
//! | exact             | mask                | child residue       | `19 L * L + L`          |
//! | double-mask       | mask                | mask                | `L + L(L-1)/2`          |
//! | wild-type marginal| mask                | template residue    | `L`                     |
//! | no-mask child     | child residue       | child residue       | `19 L`                  |
//! | no-mask template  | template residue    | template residue    | `1`                     |

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provider::{LogitRequest, LogitRow, MaskedLogitProvider};
use crate::seq::{CandidateSequence, PositionMask, ProteinSequence, Residue, ALPHABET_SIZE};

/// Probabilities are clamped to this before taking logs.
pub const PROB_FLOOR: f64 = 1e-300;

pub type ProbRow = [f64; ALPHABET_SIZE];

/// `softmax(row / tau)`, shifted by the row maximum.
pub fn softmax(row: &LogitRow, tau: f64) -> ProbRow {
    let values = row.values();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; ALPHABET_SIZE];
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(values) {
        *o = libm::exp((v - max) / tau);
        total += *o;
    }
    for o in &mut out {
        *o /= total;
    }
    out
}

#[inline]
pub fn floored_log(p: f64) -> f64 {
    libm::log(p.max(PROB_FLOOR))
}

pub fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(alloc::format!(
            "temperature must be positive and finite, got {tau}"
        )))
    }
}

/// Summed log score with its two derived forms.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct PllScore {
    pub sum_log: f64,
    pub per_residue: f64,
    pub pseudo_perplexity: f64,
}

impl PllScore {
    pub fn from_sum(sum_log: f64, len: usize) -> Self {
        let per_residue = sum_log / len as f64;
        PllScore {
            sum_log,
            per_residue,
            pseudo_perplexity: libm::exp(-per_residue),
        }
    }
}

/// Single-mask conditional probabilities of a template at one temperature.
#[derive(Clone, Debug)]
pub struct ConditionalProfile {
    template: ProteinSequence,
    tau: f64,
    rows: Vec<ProbRow>,
}

impl ConditionalProfile {
    pub fn from_logits(template: ProteinSequence, tau: f64, logits: &[LogitRow]) -> Result<Self> {
        check_tau(tau)?;
        if logits.len() != template.len() {
            return Err(Error::LengthMismatch {
                expected: template.len(),
                found: logits.len(),
            });
        }
        let rows = logits.iter().map(|row| softmax(row, tau)).collect();
        Ok(ConditionalProfile {
            template,
            tau,
            rows,
        })
    }

    pub fn template(&self) -> &ProteinSequence {
        &self.template
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn rows(&self) -> &[ProbRow] {
        &self.rows
    }

    #[inline]
    pub fn prob(&self, position: usize, residue: Residue) -> f64 {
        self.rows[position][residue.index()]
    }

    #[inline]
    pub fn log_prob(&self, position: usize, residue: Residue) -> f64 {
        floored_log(self.prob(position, residue))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Exact PLL of the template itself.
    pub fn template_pll(&self) -> PllScore {
        let sum = self
            .template
            .residues()
            .iter()
            .enumerate()
            .map(|(i, &r)| self.log_prob(i, r))
            .sum();
        PllScore::from_sum(sum, self.len())
    }

    /// Wild-type marginal score of the template with `position` set to `residue`.
    pub fn wt_score(&self, position: usize, residue: Residue) -> PllScore {
        let sum = self
            .template
            .residues()
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                if i == position {
                    self.log_prob(i, residue)
                } else {
                    self.log_prob(i, r)
                }
            })
            .sum();
        PllScore::from_sum(sum, self.len())
    }
}

/// `L` single-mask passes over `template`.
pub fn build_profile<P: MaskedLogitProvider + ?Sized>(
    provider: &P,
    template: &ProteinSequence,
    tau: f64,
) -> Result<ConditionalProfile> {
    check_tau(tau)?;
    let requests: Vec<_> = (0..template.len())
        .map(|i| LogitRequest::masked(template.clone(), vec![i]))
        .collect();
    let logits = provider
        .query_batch(&requests)?
        .into_iter()
        .map(|rows| rows.into_iter().next())
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::InvalidResponse("missing row".to_string()))?;
    ConditionalProfile::from_logits(template.clone(), tau, &logits)
}

pub fn exact_pll<P: MaskedLogitProvider + ?Sized>(
    provider: &P,
    sequence: &ProteinSequence,
    tau: f64,
) -> Result<PllScore> {
    Ok(build_profile(provider, sequence, tau)?.template_pll())
}

/// Locates the one substituted position between `template` and `child`.
/// `Ok(None)` means the two are identical.
pub fn single_substitution(
    template: &ProteinSequence,
    child: &ProteinSequence,
) -> Result<Option<(usize, Residue)>> {
    if template.len() != child.len() {
        return Err(Error::LengthMismatch {
            expected: template.len(),
            found: child.len(),
        });
    }
    let mut diffs = template
        .residues()
        .iter()
        .zip(child.residues())
        .enumerate()
        .filter(|(_, (a, b))| a != b);
    let first = diffs.next();
    let rest = diffs.count();
    if rest > 0 {
        return Err(Error::NotSingleSubstitution { count: rest + 1 });
    }
    Ok(first.map(|(k, (_, &r))| (k, r)))
}

/// Wild-type marginal approximation: no provider calls beyond the profile.
pub fn approx_pll_wt(profile: &ConditionalProfile, child: &ProteinSequence) -> Result<PllScore> {
    match single_substitution(profile.template(), child)? {
        None => Ok(profile.template_pll()),
        Some((k, r)) => Ok(profile.wt_score(k, r)),
    }
}

/// Double-mask log terms for one substitution site `k`: entry `i != k` is the
/// log probability of the template residue at `i` with both `i` and `k`
/// masked. These do not depend on the residue placed at `k`.
#[derive(Clone, Debug)]
pub struct DoubleMaskTerms {
    site: usize,
    terms: Vec<f64>,
}

impl DoubleMaskTerms {
    /// `L - 1` passes, one per mask pair `{i, site}`.
    pub fn compute<P: MaskedLogitProvider + ?Sized>(
        provider: &P,
        template: &ProteinSequence,
        site: usize,
        tau: f64,
    ) -> Result<Self> {
        check_tau(tau)?;
        let len = template.len();
        if site >= len {
            return Err(Error::PositionOutOfRange {
                position: site,
                len,
            });
        }
        let others: Vec<usize> = (0..len).filter(|&i| i != site).collect();
        let requests: Vec<_> = others
            .iter()
            .map(|&i| LogitRequest {
                sequence: template.clone(),
                masked: vec![i, site],
                report: vec![i],
            })
            .collect();
        let responses = provider.query_batch(&requests)?;
        let mut terms = vec![0.0; len];
        for (&i, rows) in others.iter().zip(responses) {
            let row = rows
                .first()
                .ok_or_else(|| Error::InvalidResponse("missing row".to_string()))?;
            let x_i = template.residues()[i];
            terms[i] = floored_log(softmax(row, tau)[x_i.index()]);
        }
        Ok(DoubleMaskTerms { site, terms })
    }

    pub fn site(&self) -> usize {
        self.site
    }

    /// Score of the child carrying `residue` at the site. The site term comes
    /// from the single-mask profile.
    pub fn score(&self, profile: &ConditionalProfile, residue: Residue) -> PllScore {
        let sum = (0..self.terms.len())
            .map(|i| {
                if i == self.site {
                    profile.log_prob(i, residue)
                } else {
                    self.terms[i]
                }
            })
            .sum();
        PllScore::from_sum(sum, self.terms.len())
    }
}

/// Double-mask terms for every site, from `L(L-1)/2` pair passes that each
/// report both masked rows.
#[derive(Clone, Debug)]
pub struct PairwiseDoubleMask {
    len: usize,
    // terms[i * len + k]: log p(x_i | mask {i, k})
    terms: Vec<f64>,
}

impl PairwiseDoubleMask {
    pub fn compute<P: MaskedLogitProvider + ?Sized>(
        provider: &P,
        template: &ProteinSequence,
        tau: f64,
    ) -> Result<Self> {
        check_tau(tau)?;
        let len = template.len();
        let pairs: Vec<(usize, usize)> = (0..len)
            .flat_map(|i| ((i + 1)..len).map(move |k| (i, k)))
            .collect();
        let requests: Vec<_> = pairs
            .iter()
            .map(|&(i, k)| LogitRequest::masked(template.clone(), vec![i, k]))
            .collect();
        let responses = provider.query_batch(&requests)?;
        let mut terms = vec![0.0; len * len];
        let residues = template.residues();
        for (&(i, k), rows) in pairs.iter().zip(responses) {
            if rows.len() != 2 {
                return Err(Error::InvalidResponse("expected two rows".to_string()));
            }
            terms[i * len + k] = floored_log(softmax(&rows[0], tau)[residues[i].index()]);
            terms[k * len + i] = floored_log(softmax(&rows[1], tau)[residues[k].index()]);
        }
        Ok(PairwiseDoubleMask { len, terms })
    }

    pub fn for_site(&self, site: usize) -> DoubleMaskTerms {
        let terms = (0..self.len)
            .map(|i| if i == site { 0.0 } else { self.terms[i * self.len + site] })
            .collect();
        DoubleMaskTerms { site, terms }
    }
}

/// Double-mask approximation for one child (`L - 1` passes).
pub fn approx_pll_double_mask<P: MaskedLogitProvider + ?Sized>(
    provider: &P,
    profile: &ConditionalProfile,
    child: &ProteinSequence,
) -> Result<PllScore> {
    match single_substitution(profile.template(), child)? {
        None => Ok(profile.template_pll()),
        Some((k, r)) => {
            Ok(DoubleMaskTerms::compute(provider, profile.template(), k, profile.tau())?.score(profile, r))
        }
    }
}

fn unmasked_sum(rows: &[LogitRow], scored: &ProteinSequence, tau: f64) -> f64 {
    rows.iter()
        .zip(scored.residues())
        .map(|(row, &r)| floored_log(softmax(row, tau)[r.index()]))
        .sum()
}

/// One unmasked pass over the child, scored at the child's own residues.
pub fn approx_pll_nomask_child<P: MaskedLogitProvider + ?Sized>(
    provider: &P,
    child: &ProteinSequence,
    tau: f64,
) -> Result<PllScore> {
    check_tau(tau)?;
    let report: Vec<usize> = (0..child.len()).collect();
    let rows = provider.query_report(child, &[], &report)?;
    Ok(PllScore::from_sum(unmasked_sum(&rows, child, tau), child.len()))
}

/// Unmasked rows of a template, shared by all of its children.
#[derive(Clone, Debug)]
pub struct NoMaskTemplate {
    template: ProteinSequence,
    tau: f64,
    rows: Vec<LogitRow>,
}

impl NoMaskTemplate {
    /// One pass.
    pub fn compute<P: MaskedLogitProvider + ?Sized>(
        provider: &P,
        template: &ProteinSequence,
        tau: f64,
    ) -> Result<Self> {
        check_tau(tau)?;
        let report: Vec<usize> = (0..template.len()).collect();
        let rows = provider.query_report(template, &[], &report)?;
        Ok(NoMaskTemplate {
            template: template.clone(),
            tau,
            rows,
        })
    }

    pub fn score(&self, child: &ProteinSequence) -> Result<PllScore> {
        single_substitution(&self.template, child)?;
        Ok(PllScore::from_sum(
            unmasked_sum(&self.rows, child, self.tau),
            child.len(),
        ))
    }
}

/// Scores a single-substitution child against the template's unmasked rows.
pub fn approx_pll_nomask_template(
    rows: &NoMaskTemplate,
    child: &ProteinSequence,
) -> Result<PllScore> {
    rows.score(child)
}

/// Every single substitution of `candidate` at eligible positions, scored by
/// the wild-type marginal approximation. Positions already edited in
/// `candidate` are skipped. Entries are ordered by position, then residue.
pub fn expand_neighborhood(
    profile: &ConditionalProfile,
    candidate: &CandidateSequence,
    mask: &PositionMask,
) -> Result<Vec<(CandidateSequence, PllScore)>> {
    if profile.template() != candidate.sequence() {
        return Err(Error::InvalidConfig(
            "profile template differs from candidate".to_string(),
        ));
    }
    mask.check_bounds(profile.len())?;
    let eligible: Vec<usize> = mask.iter().filter(|&p| !candidate.is_edited(p)).collect();
    if eligible.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut out = Vec::with_capacity(eligible.len() * (ALPHABET_SIZE - 1));
    for k in eligible {
        let current = profile.template().residues()[k];
        for r in Residue::all().filter(|&r| r != current) {
            let child = candidate.apply_edit(k, r)?;
            out.push((child, profile.wt_score(k, r)));
        }
    }
    Ok(out)
}

/// The five scoring routes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approximation {
    Exact,
    DoubleMask,
    #[serde(rename = "wt")]
    WildType,
    NomaskChild,
    NomaskTemplate,
}

impl Approximation {
    pub const ALL: [Approximation; 5] = [
        Approximation::Exact,
        Approximation::DoubleMask,
        Approximation::WildType,
        Approximation::NomaskChild,
        Approximation::NomaskTemplate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Approximation::Exact => "exact",
            Approximation::DoubleMask => "double-mask",
            Approximation::WildType => "wt",
            Approximation::NomaskChild => "nomask-child",
            Approximation::NomaskTemplate => "nomask-template",
        }
    }
}

impl fmt::Display for Approximation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Approximation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Approximation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown approximation {s:?}")))
    }
}

/// One scored neighbor.
#[derive(Clone, Debug)]
pub struct NeighborScore {
    pub position: usize,
    pub residue: Residue,
    pub score: PllScore,
}

/// Scores every single-substitution child of `template` at the masked
/// positions with one approximation, sharing template-level work the way
/// each approximation allows.
pub fn score_neighborhood<P: MaskedLogitProvider + ?Sized>(
    provider: &P,
    template: &ProteinSequence,
    mask: &PositionMask,
    tau: f64,
    approximation: Approximation,
) -> Result<Vec<NeighborScore>> {
    check_tau(tau)?;
    mask.check_bounds(template.len())?;
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let children = || {
        mask.iter().flat_map(move |k| {
            let current = template.residues()[k];
            Residue::all()
                .filter(move |&r| r != current)
                .map(move |r| (k, r))
        })
    };
    let mut out = Vec::new();
    match approximation {
        Approximation::Exact => {
            build_profile(provider, template, tau)?;
            for (k, r) in children() {
                let child = template.substituted(k, r)?;
                out.push((k, r, exact_pll(provider, &child, tau)?));
            }
        }
        Approximation::DoubleMask => {
            let profile = build_profile(provider, template, tau)?;
            let pairs = PairwiseDoubleMask::compute(provider, template, tau)?;
            for k in mask.iter() {
                let terms = pairs.for_site(k);
                let current = template.residues()[k];
                for r in Residue::all().filter(|&r| r != current) {
                    out.push((k, r, terms.score(&profile, r)));
                }
            }
        }
        Approximation::WildType => {
            let profile = build_profile(provider, template, tau)?;
            for (k, r) in children() {
                out.push((k, r, profile.wt_score(k, r)));
            }
        }
        Approximation::NomaskChild => {
            for (k, r) in children() {
                let child = template.substituted(k, r)?;
                out.push((k, r, approx_pll_nomask_child(provider, &child, tau)?));
            }
        }
        Approximation::NomaskTemplate => {
            let rows = NoMaskTemplate::compute(provider, template, tau)?;
            for (k, r) in children() {
                out.push((k, r, rows.score(&template.substituted(k, r)?)?));
            }
        }
    }
    Ok(out
        .into_iter()
        .map(|(position, residue, score)| NeighborScore {
            position,
            residue,
            score,
        })
        .collect())
}
