//! Amino-acid alphabet, sequences, position masks, and edit-traced candidates.
//!
//! Positions are 0-based everywhere in this crate. File formats that expose
//! positions to users convert to 1-based at the IO boundary.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Canonical residue ordering. Logit rows from every provider are aligned to it.
pub const ALPHABET: &str = "ACDEFGHIKLMNPQRSTVWY";
pub const ALPHABET_SIZE: usize = 20;

const CODES: &[u8; ALPHABET_SIZE] = b"ACDEFGHIKLMNPQRSTVWY";

const LOOKUP: [u8; 256] = {
    let mut table = [u8::MAX; 256];
    let mut i = 0;
    while i < ALPHABET_SIZE {
        table[CODES[i] as usize] = i as u8;
        table[CODES[i].to_ascii_lowercase() as usize] = i as u8;
        i += 1;
    }
    table
};

/// One of the 20 canonical amino acids, stored as its alphabet index.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Residue(u8);

impl Residue {
    pub fn from_index(index: usize) -> Option<Self> {
        (index < ALPHABET_SIZE).then_some(Residue(index as u8))
    }

    pub fn from_code(code: char) -> Option<Self> {
        if !code.is_ascii() {
            return None;
        }
        match LOOKUP[code as usize] {
            u8::MAX => None,
            i => Some(Residue(i)),
        }
    }

    #[inline]
    pub const fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn code(self) -> char {
        CODES[self.0 as usize] as char
    }

    pub fn all() -> impl Iterator<Item = Residue> + Clone {
        (0..ALPHABET_SIZE as u8).map(Residue)
    }
}

impl fmt::Display for Residue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Checks that an externally declared residue ordering matches [`ALPHABET`].
pub fn verify_alphabet(order: &str) -> Result<()> {
    if order == ALPHABET {
        Ok(())
    } else {
        Err(Error::AlphabetMismatch {
            found: String::from(order),
        })
    }
}

/// A nonempty protein sequence over the canonical alphabet.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ProteinSequence(Vec<Residue>);

impl ProteinSequence {
    pub fn new(residues: Vec<Residue>) -> Result<Self> {
        if residues.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(ProteinSequence(residues))
    }

    #[inline]
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn residues(&self) -> &[Residue] {
        &self.0
    }

    #[inline]
    pub fn get(&self, position: usize) -> Option<Residue> {
        self.0.get(position).copied()
    }

    /// Copy of `self` with one residue replaced.
    pub fn substituted(&self, position: usize, to: Residue) -> Result<Self> {
        if position >= self.len() {
            return Err(Error::PositionOutOfRange {
                position,
                len: self.len(),
            });
        }
        let mut residues = self.0.clone();
        residues[position] = to;
        Ok(ProteinSequence(residues))
    }

    pub fn count(&self, residue: Residue) -> usize {
        self.0.iter().filter(|&&r| r == residue).count()
    }

    pub fn to_code_string(&self) -> String {
        self.0.iter().map(|r| r.code()).collect()
    }
}

impl FromStr for ProteinSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let residues = s
            .chars()
            .enumerate()
            .map(|(position, code)| {
                Residue::from_code(code).ok_or(Error::InvalidResidue { code, position })
            })
            .collect::<Result<Vec<_>>>()?;
        ProteinSequence::new(residues)
    }
}

impl fmt::Display for ProteinSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.0 {
            write!(f, "{}", r.code())?;
        }
        Ok(())
    }
}

impl Serialize for ProteinSequence {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProteinSequence {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Hamming distance between two equal-length sequences.
pub fn hamming(a: &ProteinSequence, b: &ProteinSequence) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(a.0.iter().zip(&b.0).filter(|(x, y)| x != y).count())
}

/// Set of positions eligible for substitution.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct PositionMask(BTreeSet<usize>);

impl PositionMask {
    pub fn full(len: usize) -> Self {
        PositionMask((0..len).collect())
    }

    pub fn empty() -> Self {
        PositionMask(BTreeSet::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, position: usize) -> bool {
        self.0.contains(&position)
    }

    pub fn insert(&mut self, position: usize) -> bool {
        self.0.insert(position)
    }

    /// Ascending positions.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    /// Errors if any position falls outside a sequence of length `len`.
    pub fn check_bounds(&self, len: usize) -> Result<()> {
        match self.0.iter().next_back() {
            Some(&position) if position >= len => Err(Error::PositionOutOfRange { position, len }),
            _ => Ok(()),
        }
    }
}

impl FromIterator<usize> for PositionMask {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        PositionMask(iter.into_iter().collect())
    }
}

/// A single substitution.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Edit {
    pub position: usize,
    pub from: Residue,
    pub to: Residue,
}

/// A sequence together with its substitution trace relative to a named seed.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CandidateSequence {
    seed_id: String,
    sequence: ProteinSequence,
    // sorted by position
    edits: Vec<Edit>,
}

impl CandidateSequence {
    pub fn from_seed(seed_id: impl Into<String>, seed: ProteinSequence) -> Self {
        CandidateSequence {
            seed_id: seed_id.into(),
            sequence: seed,
            edits: Vec::new(),
        }
    }

    /// Reconstructs the edit trace from a seed and a same-length variant.
    pub fn from_variant(
        seed_id: impl Into<String>,
        seed: &ProteinSequence,
        sequence: ProteinSequence,
    ) -> Result<Self> {
        hamming(seed, &sequence)?;
        let edits = seed
            .residues()
            .iter()
            .zip(sequence.residues())
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(position, (&from, &to))| Edit { position, from, to })
            .collect();
        Ok(CandidateSequence {
            seed_id: seed_id.into(),
            sequence,
            edits,
        })
    }

    pub fn seed_id(&self) -> &str {
        &self.seed_id
    }

    pub fn sequence(&self) -> &ProteinSequence {
        &self.sequence
    }

    pub fn edits(&self) -> &[Edit] {
        &self.edits
    }

    pub fn edit_count(&self) -> usize {
        self.edits.len()
    }

    pub fn is_edited(&self, position: usize) -> bool {
        self.edits
            .binary_search_by_key(&position, |e| e.position)
            .is_ok()
    }

    /// The seed, recovered by reverting every edit.
    pub fn seed_sequence(&self) -> ProteinSequence {
        let mut residues = self.sequence.residues().to_vec();
        for e in &self.edits {
            residues[e.position] = e.from;
        }
        ProteinSequence(residues)
    }

    /// Returns a new candidate with one more substitution. `self` is unchanged.
    pub fn apply_edit(&self, position: usize, to: Residue) -> Result<Self> {
        let current = self.sequence.get(position).ok_or(Error::PositionOutOfRange {
            position,
            len: self.sequence.len(),
        })?;
        let slot = match self.edits.binary_search_by_key(&position, |e| e.position) {
            Ok(_) => return Err(Error::PositionAlreadyEdited { position }),
            Err(slot) => slot,
        };
        if current == to {
            return Err(Error::IdentitySubstitution { position });
        }
        let mut edits = self.edits.clone();
        edits.insert(
            slot,
            Edit {
                position,
                from: current,
                to,
            },
        );
        Ok(CandidateSequence {
            seed_id: self.seed_id.clone(),
            sequence: self.sequence.substituted(position, to)?,
            edits,
        })
    }
}
