//! File formats. Positions are 1-based in every file and 0-based in memory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use protbeam_core::metrics::{FrequencyTable, PkaSet};
use protbeam_core::provider::{CoupledProvider, PssmProvider};
use protbeam_core::seq::{verify_alphabet, Edit};
use protbeam_core::{CandidateSequence, LogitRow, PositionMask, ProteinSequence, Residue};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

pub fn read_text(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::config(format!("{}: {e}", path.display())))
}

fn bad(path_or_kind: &str, line: usize, msg: impl std::fmt::Display) -> AppError {
    AppError::config(format!("{path_or_kind} line {line}: {msg}"))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FastaRecord {
    pub id: String,
    pub description: String,
    pub sequence: ProteinSequence,
}

impl FastaRecord {
    /// The `edits=` token of the description, if any.
    pub fn edits(&self) -> AppResult<Option<Vec<Edit>>> {
        self.description
            .split_whitespace()
            .find_map(|tok| tok.strip_prefix("edits="))
            .map(parse_edits)
            .transpose()
    }
}

pub fn parse_fasta(text: &str) -> AppResult<Vec<FastaRecord>> {
    let mut records = Vec::new();
    let mut header: Option<(String, String, usize)> = None;
    let mut body = String::new();
    let mut finish = |header: Option<(String, String, usize)>, body: &mut String| -> AppResult<()> {
        if let Some((id, description, line)) = header {
            let sequence = body
                .parse::<ProteinSequence>()
                .map_err(|e| bad("fasta", line, format!("record {id}: {e}")))?;
            records.push(FastaRecord {
                id,
                description,
                sequence,
            });
        }
        body.clear();
        Ok(())
    };
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('>') {
            finish(header.take(), &mut body)?;
            let (id, description) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
            if id.is_empty() {
                return Err(bad("fasta", n + 1, "empty record id"));
            }
            header = Some((id.to_string(), description.trim().to_string(), n + 1));
        } else if header.is_none() {
            return Err(bad("fasta", n + 1, "sequence data before first header"));
        } else {
            body.push_str(line);
        }
    }
    finish(header, &mut body)?;
    drop(finish);
    Ok(records)
}

/// Seed files need unique ids; candidate files repeat the seed id.
pub fn check_unique_ids(records: &[FastaRecord]) -> AppResult<()> {
    let mut seen = std::collections::BTreeSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(AppError::config(format!("fasta: duplicate record id {}", r.id)));
        }
    }
    Ok(())
}

pub fn read_seeds(path: &Path) -> AppResult<Vec<FastaRecord>> {
    let records = parse_fasta(&read_text(path)?)?;
    if records.is_empty() {
        return Err(AppError::config(format!("{}: no sequences", path.display())));
    }
    check_unique_ids(&records)?;
    Ok(records)
}

pub fn write_fasta<W: Write>(out: &mut W, records: &[FastaRecord]) -> std::io::Result<()> {
    for r in records {
        if r.description.is_empty() {
            writeln!(out, ">{}", r.id)?;
        } else {
            writeln!(out, ">{} {}", r.id, r.description)?;
        }
        writeln!(out, "{}", r.sequence)?;
    }
    Ok(())
}

/// `POS:FROM>TO;...`, 1-based. The empty string means no edits.
pub fn format_edits(edits: &[Edit]) -> String {
    let mut s = String::new();
    for (i, e) in edits.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        let _ = write!(s, "{}:{}>{}", e.position + 1, e.from.code(), e.to.code());
    }
    s
}

pub fn parse_edits(text: &str) -> AppResult<Vec<Edit>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let residue = |c: &str| -> AppResult<Residue> {
        let mut chars = c.chars();
        match (chars.next(), chars.next()) {
            (Some(ch), None) => Residue::from_code(ch).ok_or_else(|| AppError::config(format!("bad residue {c:?}"))),
            _ => Err(AppError::config(format!("bad residue {c:?}"))),
        }
    };
    let mut edits: Vec<Edit> = text
        .split(';')
        .map(|tok| {
            let err = || AppError::config(format!("bad edit {tok:?}; expected POS:FROM>TO"));
            let (pos, change) = tok.split_once(':').ok_or_else(err)?;
            let (from, to) = change.split_once('>').ok_or_else(err)?;
            let pos: usize = pos.trim().parse().map_err(|_| err())?;
            if pos == 0 {
                return Err(err());
            }
            Ok(Edit {
                position: pos - 1,
                from: residue(from.trim())?,
                to: residue(to.trim())?,
            })
        })
        .collect::<AppResult<_>>()?;
    edits.sort();
    Ok(edits)
}

/// Checks that `edits` turns `seed` into `sequence` and builds the candidate.
pub fn candidate_from_parts(
    seed_id: &str,
    seed: &ProteinSequence,
    sequence: ProteinSequence,
    edits: Option<&[Edit]>,
) -> AppResult<CandidateSequence> {
    let cand = CandidateSequence::from_variant(seed_id, seed, sequence)?;
    if let Some(edits) = edits {
        if cand.edits() != edits {
            return Err(AppError::config(format!(
                "edit trace {:?} does not match seed {seed_id} (expected {:?})",
                format_edits(edits),
                format_edits(cand.edits())
            )));
        }
    }
    Ok(cand)
}

/// One 1-based position or inclusive range per line; `#` starts a comment.
pub fn parse_mask(text: &str) -> AppResult<PositionMask> {
    let mut mask = PositionMask::empty();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let num = |s: &str| -> AppResult<usize> {
            match s.trim().parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(bad("mask", n + 1, format!("expected a 1-based position, got {s:?}"))),
            }
        };
        let (lo, hi) = match line.split_once('-') {
            Some((a, b)) => (num(a)?, num(b)?),
            None => {
                let v = num(line)?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(bad("mask", n + 1, format!("empty range {line}")));
        }
        for p in lo..=hi {
            mask.insert(p - 1);
        }
    }
    Ok(mask)
}

pub fn format_mask(mask: &PositionMask) -> String {
    let mut s = String::new();
    for p in mask.iter() {
        let _ = writeln!(s, "{}", p + 1);
    }
    s
}

fn is_header(fields: &[&str]) -> bool {
    fields.first().is_some_and(|f| f.parse::<f64>().is_err())
}

/// `position` then 20 frequencies in alphabet order; an optional header row.
pub fn parse_frequency_table(text: &str) -> AppResult<FrequencyTable> {
    let mut table = FrequencyTable::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if n == 0 && is_header(&fields) {
            continue;
        }
        if fields.len() != 21 {
            return Err(bad("frequency table", n + 1, format!("expected 21 columns, found {}", fields.len())));
        }
        let pos: usize = fields[0]
            .trim()
            .parse()
            .ok()
            .filter(|&p| p >= 1)
            .ok_or_else(|| bad("frequency table", n + 1, "bad position"))?;
        let mut row = [0.0; 20];
        for (slot, f) in row.iter_mut().zip(&fields[1..]) {
            *slot = f.trim().parse().map_err(|_| bad("frequency table", n + 1, format!("bad number {f:?}")))?;
        }
        table.insert(pos - 1, row).map_err(|e| bad("frequency table", n + 1, e))?;
    }
    Ok(table)
}

/// `group<TAB>pKa` rows (groups: N_term, C_term, K, R, H, D, E, C, Y).
/// Groups not listed keep their default value.
pub fn parse_pka_table(text: &str) -> AppResult<PkaSet> {
    let mut set = PkaSet::default();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(bad("pKa table", n + 1, "expected two columns"));
        }
        if fields[0] == "group" {
            continue;
        }
        let v: f64 = fields[1].parse().map_err(|_| bad("pKa table", n + 1, "bad number"))?;
        set.set(fields[0], v).map_err(|e| bad("pKa table", n + 1, e))?;
    }
    set.validate()?;
    Ok(set)
}

pub fn format_pka_table(set: &PkaSet) -> String {
    let mut s = String::from("group\tpKa\n");
    for (g, v) in set.entries() {
        let _ = writeln!(s, "{g}\t{v}");
    }
    s
}

/// Context-independent logit table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PssmFile {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_alphabet")]
    pub alphabet: String,
    pub logits: Vec<Vec<f64>>,
}

/// Pairwise model: fields plus a sparse list of couplings (1-based
/// positions). Each coupling is applied symmetrically.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoupledFile {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_alphabet")]
    pub alphabet: String,
    pub fields: Vec<Vec<f64>>,
    #[serde(default)]
    pub visible_bias: f64,
    #[serde(default)]
    pub couplings: Vec<CouplingEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CouplingEntry {
    pub i: usize,
    pub a: char,
    pub j: usize,
    pub b: char,
    pub value: f64,
}

fn default_name() -> String {
    "model".to_string()
}

fn default_alphabet() -> String {
    protbeam_core::ALPHABET.to_string()
}

fn row20(values: &[f64]) -> AppResult<[f64; 20]> {
    Ok(*LogitRow::from_slice(values)?.values())
}

impl PssmFile {
    pub fn into_provider(self) -> AppResult<PssmProvider> {
        verify_alphabet(&self.alphabet)?;
        let rows = self
            .logits
            .iter()
            .map(|r| LogitRow::from_slice(r))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PssmProvider::new(self.name, rows)?)
    }

    pub fn from_provider(p: &PssmProvider) -> Self {
        use protbeam_core::MaskedLogitProvider;
        PssmFile {
            name: p.name().to_string(),
            alphabet: default_alphabet(),
            logits: p.table().iter().map(|r| r.values().to_vec()).collect(),
        }
    }
}

impl CoupledFile {
    pub fn into_provider(self) -> AppResult<CoupledProvider> {
        verify_alphabet(&self.alphabet)?;
        let fields = self.fields.iter().map(|r| row20(r)).collect::<AppResult<Vec<_>>>()?;
        let mut p = CoupledProvider::new(self.name, fields, self.visible_bias)?;
        let res = |c: char| Residue::from_code(c).ok_or_else(|| AppError::config(format!("bad residue {c:?}")));
        for c in &self.couplings {
            if c.i == 0 || c.j == 0 {
                return Err(AppError::config("coupling positions are 1-based"));
            }
            p.set_coupling(c.i - 1, res(c.a)?, c.j - 1, res(c.b)?, c.value)?;
        }
        Ok(p)
    }

    /// Dense export of every nonzero coupling with `i < j`.
    pub fn from_provider(p: &CoupledProvider) -> Self {
        use protbeam_core::MaskedLogitProvider;
        let len = p.len();
        let fields = (0..len)
            .map(|i| Residue::all().map(|r| p.field(i, r)).collect())
            .collect();
        let mut couplings = Vec::new();
        for i in 0..len {
            for j in i + 1..len {
                for a in Residue::all() {
                    for b in Residue::all() {
                        let value = p.coupling(i, a, j, b);
                        if value != 0.0 {
                            couplings.push(CouplingEntry {
                                i: i + 1,
                                a: a.code(),
                                j: j + 1,
                                b: b.code(),
                                value,
                            });
                        }
                    }
                }
            }
        }
        CoupledFile {
            name: p.name().to_string(),
            alphabet: default_alphabet(),
            fields,
            visible_bias: p.visible_bias(),
            couplings,
        }
    }
}

/// One row of the candidates TSV shared by every subcommand.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub id: String,
    pub seed_id: String,
    pub sequence: String,
    #[serde(default)]
    pub edits: String,
    #[serde(default)]
    pub step: Option<usize>,
    #[serde(default)]
    pub sum_log: Option<f64>,
    #[serde(default)]
    pub per_residue: Option<f64>,
    #[serde(default)]
    pub pseudo_perplexity: Option<f64>,
    #[serde(default)]
    pub perturbed: Option<f64>,
    #[serde(default)]
    pub guidance: Option<f64>,
    #[serde(default)]
    pub rank: Option<usize>,
}

impl CandidateRow {
    pub fn parse_sequence(&self) -> AppResult<ProteinSequence> {
        self.sequence
            .parse()
            .map_err(|e| AppError::config(format!("candidate {}: {e}", self.id)))
    }
}

fn tsv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .comment(Some(b'#'))
        .from_reader(input)
}

pub fn tsv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .delimiter(b'\t')
        .quote_style(csv::QuoteStyle::Never)
        .from_writer(out)
}

/// Candidates from a TSV or a FASTA file whose record ids are seed ids and
/// whose descriptions carry `id=` and `edits=` tokens.
pub fn read_candidate_file(path: &Path) -> AppResult<Vec<CandidateRow>> {
    let text = read_text(path)?;
    if text.trim_start().starts_with('>') {
        let records = parse_fasta(&text)?;
        let mut rows = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let token = |key: &str| {
                r.description
                    .split_whitespace()
                    .find_map(|t| t.strip_prefix(key))
                    .map(str::to_string)
            };
            rows.push(CandidateRow {
                id: token("id=").unwrap_or_else(|| format!("{}_{}", r.id, i + 1)),
                seed_id: r.id.clone(),
                sequence: r.sequence.to_string(),
                edits: token("edits=").unwrap_or_default(),
                ..Default::default()
            });
        }
        Ok(rows)
    } else {
        read_candidates(&text)
    }
}

pub fn read_candidates(text: &str) -> AppResult<Vec<CandidateRow>> {
    let mut rows = Vec::new();
    for row in tsv_reader(text.as_bytes()).deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub fn write_tsv<T: Serialize>(rows: &[T]) -> AppResult<Vec<u8>> {
    let mut w = tsv_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| AppError::config(e.to_string()))
}

/// Seeds keyed by id.
pub fn seed_map(records: &[FastaRecord]) -> BTreeMap<String, ProteinSequence> {
    records.iter().map(|r| (r.id.clone(), r.sequence.clone())).collect()
}

/// Rebuilds each row's candidate against its seed, checking any edit trace.
pub fn resolve_candidates(
    rows: &[CandidateRow],
    seeds: &BTreeMap<String, ProteinSequence>,
) -> AppResult<Vec<CandidateSequence>> {
    rows.iter()
        .map(|row| {
            let seed = seeds
                .get(&row.seed_id)
                .ok_or_else(|| AppError::config(format!("candidate {}: unknown seed {:?}", row.id, row.seed_id)))?;
            let edits = if row.edits.is_empty() {
                None
            } else {
                Some(parse_edits(&row.edits)?)
            };
            candidate_from_parts(&row.seed_id, seed, row.parse_sequence()?, edits.as_deref())
                .map_err(|e| AppError::config(format!("candidate {}: {e}", row.id)))
        })
        .collect()
}
