//! Post-hoc developability and diversity metrics for generated variants.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guidance::SequenceScorer;
use crate::seq::{hamming, CandidateSequence, PositionMask, ProteinSequence, Residue, ALPHABET_SIZE};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversityMode {
    IntraSeed,
    InterSeed,
}

/// Mean Hamming distance from each child to its peers: children of the same
/// seed (`IntraSeed`) or of every other seed (`InterSeed`). A child without
/// peers gets `None`.
pub fn pairwise_diversity(children: &[CandidateSequence], mode: DiversityMode) -> Result<Vec<Option<f64>>> {
    let mut out = Vec::with_capacity(children.len());
    for (i, child) in children.iter().enumerate() {
        let mut total = 0usize;
        let mut peers = 0usize;
        for (j, other) in children.iter().enumerate() {
            let same_seed = child.seed_id() == other.seed_id();
            let peer = match mode {
                DiversityMode::IntraSeed => i != j && same_seed,
                DiversityMode::InterSeed => !same_seed,
            };
            if peer {
                total += hamming(child.sequence(), other.sequence())?;
                peers += 1;
            }
        }
        out.push((peers > 0).then(|| total as f64 / peers as f64));
    }
    Ok(out)
}

/// Per-position residue frequencies (0-based positions, alphabet order).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrequencyTable {
    rows: BTreeMap<usize, [f64; ALPHABET_SIZE]>,
}

impl FrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, position: usize, freqs: [f64; ALPHABET_SIZE]) -> Result<()> {
        if freqs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidConfig(format!(
                "frequencies at position {} must lie in [0, 1]",
                position + 1
            )));
        }
        let total: f64 = freqs.iter().sum();
        if total > 1.0 + 1e-6 {
            return Err(Error::InvalidConfig(format!(
                "frequencies at position {} sum to {total} > 1",
                position + 1
            )));
        }
        self.rows.insert(position, freqs);
        Ok(())
    }

    pub fn get(&self, position: usize, residue: Residue) -> Option<f64> {
        self.rows.get(&position).map(|row| row[residue.index()])
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.keys().copied()
    }

    pub fn row(&self, position: usize) -> Option<&[f64; ALPHABET_SIZE]> {
        self.rows.get(&position)
    }
}

/// Sum over edits of `freq[pos][to] - freq[pos][from]`. Positive values mean
/// the child moved toward germline-typical residues.
pub fn germline_delta(child: &CandidateSequence, table: &FrequencyTable) -> Result<f64> {
    child.edits().iter().try_fold(0.0, |acc, e| {
        match (table.get(e.position, e.to), table.get(e.position, e.from)) {
            (Some(to), Some(from)) => Ok(acc + (to - from)),
            _ => Err(Error::PositionNotInTable { position: e.position }),
        }
    })
}

/// Ionizable group pKa values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PkaSet {
    pub n_term: f64,
    pub c_term: f64,
    pub k: f64,
    pub r: f64,
    pub h: f64,
    pub d: f64,
    pub e: f64,
    pub c: f64,
    pub y: f64,
}

impl Default for PkaSet {
    /// Bjellqvist-style defaults as tabulated by Biopython's `IsoelectricPoint`.
    fn default() -> Self {
        PkaSet {
            n_term: 7.5,
            c_term: 3.55,
            k: 10.0,
            r: 12.0,
            h: 5.98,
            d: 4.05,
            e: 4.45,
            c: 9.0,
            y: 10.0,
        }
    }
}

impl PkaSet {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.entries() {
            if !(v > 0.0 && v < 14.0) {
                return Err(Error::InvalidConfig(format!("pKa {name}={v} outside (0, 14)")));
            }
        }
        Ok(())
    }

    /// `(group, pKa)` pairs in a fixed order; group names match the data file.
    pub fn entries(&self) -> [(&'static str, f64); 9] {
        [
            ("N_term", self.n_term),
            ("C_term", self.c_term),
            ("K", self.k),
            ("R", self.r),
            ("H", self.h),
            ("D", self.d),
            ("E", self.e),
            ("C", self.c),
            ("Y", self.y),
        ]
    }

    pub fn set(&mut self, group: &str, value: f64) -> Result<()> {
        let slot = match group {
            "N_term" => &mut self.n_term,
            "C_term" => &mut self.c_term,
            "K" => &mut self.k,
            "R" => &mut self.r,
            "H" => &mut self.h,
            "D" => &mut self.d,
            "E" => &mut self.e,
            "C" => &mut self.c,
            "Y" => &mut self.y,
            other => return Err(Error::InvalidConfig(format!("unknown ionizable group {other}"))),
        };
        *slot = value;
        Ok(())
    }
}

fn count(seq: &ProteinSequence, code: char) -> f64 {
    seq.count(Residue::from_code(code).expect("canonical code")) as f64
}

/// Net charge at `ph` by Henderson-Hasselbalch, termini included.
pub fn net_charge(seq: &ProteinSequence, ph: f64, pka: &PkaSet) -> f64 {
    let pos = |n: f64, pk: f64| n / (1.0 + libm::pow(10.0, ph - pk));
    let neg = |n: f64, pk: f64| n / (1.0 + libm::pow(10.0, pk - ph));
    pos(1.0, pka.n_term) + pos(count(seq, 'K'), pka.k) + pos(count(seq, 'R'), pka.r) + pos(count(seq, 'H'), pka.h)
        - neg(1.0, pka.c_term)
        - neg(count(seq, 'D'), pka.d)
        - neg(count(seq, 'E'), pka.e)
        - neg(count(seq, 'C'), pka.c)
        - neg(count(seq, 'Y'), pka.y)
}

pub const PI_TOLERANCE: f64 = 1e-3;

/// pH of zero net charge, by bisection on [0, 14].
pub fn isoelectric_point(seq: &ProteinSequence, pka: &PkaSet) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 14.0f64);
    if net_charge(seq, lo, pka) <= 0.0 {
        return lo;
    }
    if net_charge(seq, hi, pka) >= 0.0 {
        return hi;
    }
    while hi - lo > PI_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if net_charge(seq, mid, pka) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotifClass {
    AspPro,
    Deamidation,
    Isomerization,
    NGlycosylation,
    OxidationMetTrp,
    UnpairedCysteine,
}

impl MotifClass {
    pub const ALL: [MotifClass; 6] = [
        MotifClass::AspPro,
        MotifClass::Deamidation,
        MotifClass::Isomerization,
        MotifClass::NGlycosylation,
        MotifClass::OxidationMetTrp,
        MotifClass::UnpairedCysteine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MotifClass::AspPro => "asp_pro",
            MotifClass::Deamidation => "deamidation",
            MotifClass::Isomerization => "isomerization",
            MotifClass::NGlycosylation => "n_glycosylation",
            MotifClass::OxidationMetTrp => "oxidation_met_trp",
            MotifClass::UnpairedCysteine => "unpaired_cysteine",
        }
    }
}

impl fmt::Display for MotifClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One introduced liability. `start`/`end` are 1-based and inclusive.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Liability {
    pub class: MotifClass,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct LiabilityReport {
    pub introduced: Vec<Liability>,
}

impl LiabilityReport {
    pub fn is_empty(&self) -> bool {
        self.introduced.is_empty()
    }

    /// Distinct classes present, in declaration order.
    pub fn classes(&self) -> Vec<MotifClass> {
        let mut out: Vec<MotifClass> = self.introduced.iter().map(|l| l.class).collect();
        out.sort();
        out.dedup();
        out
    }
}

fn codes(seq: &ProteinSequence) -> Vec<u8> {
    seq.residues().iter().map(|r| r.code() as u8).collect()
}

/// Fixed-width windows `(class, width, predicate)`.
type Window = (MotifClass, usize, fn(&[u8]) -> bool);

const WINDOWS: [Window; 5] = [
    (MotifClass::AspPro, 2, |w| w == b"DP"),
    (MotifClass::Deamidation, 2, |w| w[0] == b'N' && b"GHNST".contains(&w[1])),
    (MotifClass::Isomerization, 2, |w| w[0] == b'D' && b"GDHST".contains(&w[1])),
    (MotifClass::NGlycosylation, 3, |w| w[0] == b'N' && w[1] != b'P' && (w[2] == b'S' || w[2] == b'T')),
    (MotifClass::OxidationMetTrp, 1, |w| w[0] == b'M' || w[0] == b'W'),
];

/// Liabilities present in `child` at spans where `seed` lacks the same class.
///
/// Met/Trp oxidation is flagged for any introduced M or W (exposure needs
/// structure). Cysteines are flagged when introduced at a position, and the
/// whole sequence is flagged when its cysteine count turns odd.
pub fn liability_scan(seed: &ProteinSequence, child: &ProteinSequence) -> Result<LiabilityReport> {
    if seed.len() != child.len() {
        return Err(Error::LengthMismatch {
            expected: seed.len(),
            found: child.len(),
        });
    }
    let (s, c) = (codes(seed), codes(child));
    let mut introduced = Vec::new();
    for (class, width, matches) in WINDOWS {
        for start in 0..c.len().saturating_sub(width - 1) {
            let span = start..start + width;
            if matches(&c[span.clone()]) && !matches(&s[span.clone()]) {
                introduced.push(Liability {
                    class,
                    start: start + 1,
                    end: start + width,
                    text: String::from_utf8(c[span].to_vec()).expect("ascii"),
                });
            }
        }
    }
    for i in 0..c.len() {
        if c[i] == b'C' && s[i] != b'C' {
            introduced.push(Liability {
                class: MotifClass::UnpairedCysteine,
                start: i + 1,
                end: i + 1,
                text: String::from("C"),
            });
        }
    }
    let cys = |v: &[u8]| v.iter().filter(|&&b| b == b'C').count();
    let (seed_cys, child_cys) = (cys(&s), cys(&c));
    if child_cys % 2 == 1 && seed_cys % 2 == 0 {
        introduced.push(Liability {
            class: MotifClass::UnpairedCysteine,
            start: 1,
            end: c.len(),
            text: format!("odd_cys_count={child_cys}"),
        });
    }
    Ok(LiabilityReport { introduced })
}

/// Occurrences of every liability class in `seq`, measured against nothing
/// (so every M/W and every C counts).
pub fn liability_count(seq: &ProteinSequence) -> usize {
    let c = codes(seq);
    let windows: usize = WINDOWS
        .iter()
        .map(|(_, width, matches)| c.windows(*width).filter(|w| matches(w)).count())
        .sum();
    let cys = c.iter().filter(|&&b| b == b'C').count();
    windows + cys + cys % 2
}

/// Edits inside and outside `mask`.
pub fn region_mutation_count(child: &CandidateSequence, mask: &PositionMask) -> (usize, usize) {
    let inside = child.edits().iter().filter(|e| mask.contains(e.position)).count();
    (inside, child.edit_count() - inside)
}

/// Isoelectric point as an objective.
#[derive(Clone, Copy, Debug, Default)]
pub struct PiScorer {
    pub pka: PkaSet,
}

impl SequenceScorer for PiScorer {
    fn score_batch(&self, sequences: &[ProteinSequence]) -> core::result::Result<Vec<f64>, String> {
        Ok(sequences.iter().map(|s| isoelectric_point(s, &self.pka)).collect())
    }
}

/// Absolute liability count ([`liability_count`]) as an objective.
#[derive(Clone, Copy, Debug, Default)]
pub struct LiabilityCountScorer;

impl SequenceScorer for LiabilityCountScorer {
    fn score_batch(&self, sequences: &[ProteinSequence]) -> core::result::Result<Vec<f64>, String> {
        Ok(sequences.iter().map(|s| liability_count(s) as f64).collect())
    }
}
