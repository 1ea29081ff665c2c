//! The masked-logit provider contract and the two built-in desk-scale models.
//!
//! A provider takes a sequence, a set of positions to replace with the mask
//! token, and a list of positions to report, and returns one logit row per
//! reported position. Every call to [`MaskedLogitProvider::query_report`] is
//! one logical forward pass in the provider's [`Ledger`], however many
//! positions are masked.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::{ProteinSequence, Residue, ALPHABET, ALPHABET_SIZE};

/// Twenty finite logits aligned to [`ALPHABET`].
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct LogitRow([f64; ALPHABET_SIZE]);

impl LogitRow {
    pub fn new(values: [f64; ALPHABET_SIZE]) -> Result<Self> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(LogitRow(values))
        } else {
            Err(Error::InvalidResponse("non-finite logit".to_string()))
        }
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; ALPHABET_SIZE] = values.try_into().map_err(|_| {
            Error::InvalidResponse(alloc::format!(
                "logit row has {} entries, expected {ALPHABET_SIZE}",
                values.len()
            ))
        })?;
        LogitRow::new(arr)
    }

    pub fn zeros() -> Self {
        LogitRow([0.0; ALPHABET_SIZE])
    }

    #[inline]
    pub fn values(&self) -> &[f64; ALPHABET_SIZE] {
        &self.0
    }

    #[inline]
    pub fn get(&self, residue: Residue) -> f64 {
        self.0[residue.index()]
    }
}

/// Forward-pass counters. Logical passes count every query; physical passes
/// count the ones that actually reached the model (they differ only behind a
/// memoizing wrapper).
#[derive(Debug, Default)]
pub struct Ledger {
    logical: AtomicU64,
    physical: AtomicU64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub logical_passes: u64,
    pub physical_passes: u64,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, physical: bool) {
        self.logical.fetch_add(1, Ordering::Relaxed);
        if physical {
            self.physical.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn logical(&self) -> u64 {
        self.logical.load(Ordering::Relaxed)
    }

    pub fn physical(&self) -> u64 {
        self.physical.load(Ordering::Relaxed)
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            logical_passes: self.logical(),
            physical_passes: self.physical(),
        }
    }

    pub fn reset(&self) {
        self.logical.store(0, Ordering::Relaxed);
        self.physical.store(0, Ordering::Relaxed);
    }
}

/// An owned query, used for batched submission.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LogitRequest {
    pub sequence: ProteinSequence,
    pub masked: Vec<usize>,
    pub report: Vec<usize>,
}

impl LogitRequest {
    /// Masks `masked` and reports the same positions.
    pub fn masked(sequence: ProteinSequence, masked: Vec<usize>) -> Self {
        LogitRequest {
            report: masked.clone(),
            sequence,
            masked,
        }
    }
}

/// Black-box masked language model.
pub trait MaskedLogitProvider: Send + Sync {
    fn name(&self) -> &str;

    fn alphabet_order(&self) -> &str {
        ALPHABET
    }

    /// The only sequence length the model accepts, if it is length-fixed.
    fn fixed_length(&self) -> Option<usize> {
        None
    }

    fn max_length(&self) -> Option<usize> {
        self.fixed_length()
    }

    fn ledger(&self) -> &Ledger;

    /// Evaluates the model once. No validation or bookkeeping happens here;
    /// callers go through [`query_report`](Self::query_report).
    fn forward(
        &self,
        sequence: &ProteinSequence,
        masked: &[usize],
        report: &[usize],
    ) -> Result<Vec<LogitRow>>;

    /// One counted forward pass: rows for `report`, in order, computed with
    /// `masked` replaced by the mask token.
    fn query_report(
        &self,
        sequence: &ProteinSequence,
        masked: &[usize],
        report: &[usize],
    ) -> Result<Vec<LogitRow>> {
        validate_query(self, sequence, masked, report)?;
        self.ledger().record(true);
        let rows = self.forward(sequence, masked, report)?;
        check_row_count(&rows, report.len())?;
        Ok(rows)
    }

    fn query(&self, sequence: &ProteinSequence, masked: &[usize]) -> Result<Vec<LogitRow>> {
        self.query_report(sequence, masked, masked)
    }

    /// Several independent queries. Each request counts as one pass.
    fn query_batch(&self, requests: &[LogitRequest]) -> Result<Vec<Vec<LogitRow>>> {
        requests
            .iter()
            .map(|r| self.query_report(&r.sequence, &r.masked, &r.report))
            .collect()
    }

    fn forward_pass_count(&self) -> u64 {
        self.ledger().logical()
    }
}

/// Pre-flight checks shared by every provider implementation.
pub fn validate_query<P: MaskedLogitProvider + ?Sized>(
    provider: &P,
    sequence: &ProteinSequence,
    masked: &[usize],
    report: &[usize],
) -> Result<()> {
    let len = sequence.len();
    if let Some(expected) = provider.fixed_length() {
        if expected != len {
            return Err(Error::LengthMismatch {
                expected,
                found: len,
            });
        }
    } else if let Some(max) = provider.max_length() {
        if len > max {
            return Err(Error::LengthMismatch {
                expected: max,
                found: len,
            });
        }
    }
    let mut seen = vec![false; len];
    for &position in masked {
        if position >= len {
            return Err(Error::PositionOutOfRange { position, len });
        }
        if core::mem::replace(&mut seen[position], true) {
            return Err(Error::InvalidConfig(alloc::format!(
                "position {position} masked twice"
            )));
        }
    }
    if let Some(&position) = report.iter().find(|&&p| p >= len) {
        return Err(Error::PositionOutOfRange { position, len });
    }
    Ok(())
}

pub fn check_row_count(rows: &[LogitRow], expected: usize) -> Result<()> {
    if rows.len() == expected {
        Ok(())
    } else {
        Err(Error::InvalidResponse(alloc::format!(
            "expected {expected} rows, got {}",
            rows.len()
        )))
    }
}

/// Borrows a provider and counts the passes issued through it in a private
/// ledger, on top of the provider's own.
pub struct Metered<'a, P: ?Sized> {
    inner: &'a P,
    ledger: Ledger,
}

impl<'a, P: MaskedLogitProvider + ?Sized> Metered<'a, P> {
    pub fn new(inner: &'a P) -> Self {
        Metered {
            inner,
            ledger: Ledger::new(),
        }
    }

    pub fn passes(&self) -> u64 {
        self.ledger.logical()
    }
}

impl<P: MaskedLogitProvider + ?Sized> MaskedLogitProvider for Metered<'_, P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn alphabet_order(&self) -> &str {
        self.inner.alphabet_order()
    }

    fn fixed_length(&self) -> Option<usize> {
        self.inner.fixed_length()
    }

    fn max_length(&self) -> Option<usize> {
        self.inner.max_length()
    }

    fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    fn forward(
        &self,
        sequence: &ProteinSequence,
        masked: &[usize],
        report: &[usize],
    ) -> Result<Vec<LogitRow>> {
        self.inner.forward(sequence, masked, report)
    }

    fn query_report(
        &self,
        sequence: &ProteinSequence,
        masked: &[usize],
        report: &[usize],
    ) -> Result<Vec<LogitRow>> {
        let rows = self.inner.query_report(sequence, masked, report)?;
        self.ledger.record(false);
        Ok(rows)
    }

    fn query_batch(&self, requests: &[LogitRequest]) -> Result<Vec<Vec<LogitRow>>> {
        let rows = self.inner.query_batch(requests)?;
        for _ in requests {
            self.ledger.record(false);
        }
        Ok(rows)
    }
}

impl<P: MaskedLogitProvider + ?Sized> MaskedLogitProvider for alloc::boxed::Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn alphabet_order(&self) -> &str {
        (**self).alphabet_order()
    }

    fn fixed_length(&self) -> Option<usize> {
        (**self).fixed_length()
    }

    fn max_length(&self) -> Option<usize> {
        (**self).max_length()
    }

    fn ledger(&self) -> &Ledger {
        (**self).ledger()
    }

    fn forward(
        &self,
        sequence: &ProteinSequence,
        masked: &[usize],
        report: &[usize],
    ) -> Result<Vec<LogitRow>> {
        (**self).forward(sequence, masked, report)
    }

    fn query_report(
        &self,
        sequence: &ProteinSequence,
        masked: &[usize],
        report: &[usize],
    ) -> Result<Vec<LogitRow>> {
        (**self).query_report(sequence, masked, report)
    }

    fn query_batch(&self, requests: &[LogitRequest]) -> Result<Vec<Vec<LogitRow>>> {
        (**self).query_batch(requests)
    }
}

/// Context-independent model: row `i` is a fixed table row, whatever the
/// sequence content or mask set.
#[derive(Debug)]
pub struct PssmProvider {
    name: String,
    table: Vec<LogitRow>,
    ledger: Ledger,
}

impl PssmProvider {
    pub fn new(name: impl Into<String>, table: Vec<LogitRow>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(PssmProvider {
            name: name.into(),
            table,
            ledger: Ledger::new(),
        })
    }

    pub fn zeros(len: usize) -> Self {
        PssmProvider {
            name: "pssm:zeros".to_string(),
            table: vec![LogitRow::zeros(); len.max(1)],
            ledger: Ledger::new(),
        }
    }

    /// Logits drawn uniformly from `[-scale, scale]`.
    pub fn random(len: usize, seed: u64, scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = (0..len.max(1))
            .map(|_| {
                let mut row = [0.0; ALPHABET_SIZE];
                for v in &mut row {
                    *v = rng.gen_range(-scale..=scale);
                }
                LogitRow(row)
            })
            .collect();
        PssmProvider {
            name: alloc::format!("pssm:random:{len}:{seed}"),
            table,
            ledger: Ledger::new(),
        }
    }

    pub fn table(&self) -> &[LogitRow] {
        &self.table
    }
}

impl MaskedLogitProvider for PssmProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn fixed_length(&self) -> Option<usize> {
        Some(self.table.len())
    }

    fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    fn forward(
        &self,
        _sequence: &ProteinSequence,
        _masked: &[usize],
        report: &[usize],
    ) -> Result<Vec<LogitRow>> {
        Ok(report.iter().map(|&i| self.table[i]).collect())
    }
}

/// Pairwise (Potts-style) model with fields `h[i][r]` and symmetric couplings
/// `J[i][r][j][s]`.
///
/// The logit of residue `r` at position `i` is
/// `h[i][r] + sum over unmasked j != i of J[i][r][j][x_j]`. Masked positions
/// contribute nothing to any row. When `i` itself is left visible the row also
/// gains `visible_bias` at the residue currently at `i`, which is how an
/// unmasked language model leaks the observed token into its own prediction.
#[derive(Debug)]
pub struct CoupledProvider {
    name: String,
    len: usize,
    fields: Vec<[f64; ALPHABET_SIZE]>,
    couplings: Vec<f64>,
    visible_bias: f64,
    ledger: Ledger,
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct CoupledParams {
    pub field_scale: f64,
    pub coupling_scale: f64,
    pub visible_bias: f64,
}

impl Default for CoupledParams {
    fn default() -> Self {
        CoupledParams {
            field_scale: 2.0,
            coupling_scale: 0.5,
            visible_bias: 3.0,
        }
    }
}

impl CoupledProvider {
    /// Zero couplings; `fields` fixes the length.
    pub fn new(
        name: impl Into<String>,
        fields: Vec<[f64; ALPHABET_SIZE]>,
        visible_bias: f64,
    ) -> Result<Self> {
        let len = fields.len();
        if len == 0 {
            return Err(Error::EmptySequence);
        }
        if !fields.iter().flatten().all(|v| v.is_finite()) || !visible_bias.is_finite() {
            return Err(Error::InvalidConfig("non-finite model parameter".to_string()));
        }
        Ok(CoupledProvider {
            name: name.into(),
            len,
            fields,
            couplings: vec![0.0; len * ALPHABET_SIZE * len * ALPHABET_SIZE],
            visible_bias,
            ledger: Ledger::new(),
        })
    }

    pub fn random(len: usize, seed: u64, params: CoupledParams) -> Self {
        let len = len.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fields = (0..len)
            .map(|_| {
                let mut row = [0.0; ALPHABET_SIZE];
                for v in &mut row {
                    *v = rng.gen_range(-params.field_scale..=params.field_scale);
                }
                row
            })
            .collect();
        let mut provider = CoupledProvider::new(
            alloc::format!("coupled:random:{len}:{seed}"),
            fields,
            params.visible_bias,
        )
        .expect("finite parameters");
        for i in 0..len {
            for j in (i + 1)..len {
                for a in Residue::all() {
                    for b in Residue::all() {
                        let v = rng.gen_range(-params.coupling_scale..=params.coupling_scale);
                        provider.set_coupling_raw(i, a, j, b, v);
                    }
                }
            }
        }
        provider
    }

    #[inline]
    fn offset(&self, i: usize, a: Residue, j: usize, b: Residue) -> usize {
        ((i * ALPHABET_SIZE + a.index()) * self.len + j) * ALPHABET_SIZE + b.index()
    }

    fn set_coupling_raw(&mut self, i: usize, a: Residue, j: usize, b: Residue, value: f64) {
        let fwd = self.offset(i, a, j, b);
        let bwd = self.offset(j, b, i, a);
        self.couplings[fwd] = value;
        self.couplings[bwd] = value;
    }

    /// Sets `J[i][a][j][b]` and its mirror `J[j][b][i][a]`.
    pub fn set_coupling(
        &mut self,
        i: usize,
        a: Residue,
        j: usize,
        b: Residue,
        value: f64,
    ) -> Result<()> {
        for position in [i, j] {
            if position >= self.len {
                return Err(Error::PositionOutOfRange {
                    position,
                    len: self.len,
                });
            }
        }
        if i == j {
            return Err(Error::InvalidConfig("self-coupling".to_string()));
        }
        if !value.is_finite() {
            return Err(Error::InvalidConfig("non-finite coupling".to_string()));
        }
        self.set_coupling_raw(i, a, j, b, value);
        Ok(())
    }

    pub fn with_coupling(mut self, i: usize, a: Residue, j: usize, b: Residue, value: f64) -> Result<Self> {
        self.set_coupling(i, a, j, b, value)?;
        Ok(self)
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn field(&self, i: usize, r: Residue) -> f64 {
        self.fields[i][r.index()]
    }

    pub fn coupling(&self, i: usize, a: Residue, j: usize, b: Residue) -> f64 {
        self.couplings[self.offset(i, a, j, b)]
    }

    pub fn visible_bias(&self) -> f64 {
        self.visible_bias
    }
}

impl MaskedLogitProvider for CoupledProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn fixed_length(&self) -> Option<usize> {
        Some(self.len)
    }

    fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    fn forward(
        &self,
        sequence: &ProteinSequence,
        masked: &[usize],
        report: &[usize],
    ) -> Result<Vec<LogitRow>> {
        let mut is_masked = vec![false; self.len];
        for &p in masked {
            is_masked[p] = true;
        }
        let residues = sequence.residues();
        let rows = report
            .iter()
            .map(|&i| {
                let mut row = self.fields[i];
                for (r, value) in Residue::all().zip(row.iter_mut()) {
                    for (j, &s) in residues.iter().enumerate() {
                        if j != i && !is_masked[j] {
                            *value += self.coupling(i, r, j, s);
                        }
                    }
                }
                if !is_masked[i] {
                    row[residues[i].index()] += self.visible_bias;
                }
                LogitRow(row)
            })
            .collect();
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> ProteinSequence {
        s.parse().unwrap()
    }

    fn res(c: char) -> Residue {
        Residue::from_code(c).unwrap()
    }

    #[test]
    fn zero_table_rows() {
        let p = PssmProvider::zeros(4);
        let rows = p.query(&seq("ACDE"), &[1]).unwrap();
        assert_eq!(rows, vec![LogitRow::zeros()]);
    }

    #[test]
    fn ledger_counts_queries() {
        let p = PssmProvider::random(4, 1, 1.0);
        assert_eq!(p.forward_pass_count(), 0);
        for _ in 0..3 {
            p.query(&seq("ACDE"), &[0, 2]).unwrap();
        }
        assert_eq!(p.forward_pass_count(), 3);
        assert_eq!(p.ledger().physical(), 3);
        p.ledger().reset();
        assert_eq!(p.forward_pass_count(), 0);
    }

    #[test]
    fn pssm_ignores_context() {
        let p = PssmProvider::random(5, 9, 2.0);
        let a = p.query_report(&seq("ACDEF"), &[2], &[2]).unwrap();
        let b = p.query_report(&seq("WWWWW"), &[0, 2, 4], &[2]).unwrap();
        let c = p.query_report(&seq("KLMNP"), &[], &[2]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn length_and_range_checks() {
        let p = PssmProvider::zeros(4);
        assert_eq!(
            p.query(&seq("ACD"), &[0]),
            Err(Error::LengthMismatch {
                expected: 4,
                found: 3
            })
        );
        assert_eq!(
            p.query(&seq("ACDE"), &[4]),
            Err(Error::PositionOutOfRange { position: 4, len: 4 })
        );
        assert!(p.query(&seq("ACDE"), &[1, 1]).is_err());
        // rejected queries are not counted
        assert_eq!(p.forward_pass_count(), 0);
    }

    #[test]
    fn single_coupling_hand_evaluated() {
        // h = 0, J[0,A,2,E] = 1; query "CCE" masking 0: only j = 2 holding E
        // contributes, and only to residue A.
        let p = CoupledProvider::new("t", vec![[0.0; 20]; 3], 0.0)
            .unwrap()
            .with_coupling(0, res('A'), 2, res('E'), 1.0)
            .unwrap();
        let row = p.query(&seq("CCE"), &[0]).unwrap()[0];
        for r in Residue::all() {
            let expected = if r == res('A') { 1.0 } else { 0.0 };
            assert_eq!(row.get(r), expected);
        }
        // symmetric entry is visible from position 2
        let row2 = p.query(&seq("ACC"), &[2]).unwrap()[0];
        assert_eq!(row2.get(res('E')), 1.0);
        // masking the partner removes the contribution
        let both = p.query_report(&seq("CCE"), &[0, 2], &[0]).unwrap()[0];
        assert_eq!(both, LogitRow::zeros());
    }

    #[test]
    fn zero_coupling_matches_pssm() {
        let mut fields = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let mut row = [0.0; 20];
            for v in &mut row {
                *v = rng.gen_range(-1.0..1.0);
            }
            fields.push(row);
        }
        let coupled = CoupledProvider::new("c", fields.clone(), 0.0).unwrap();
        let pssm = PssmProvider::new(
            "p",
            fields.into_iter().map(|r| LogitRow::new(r).unwrap()).collect(),
        )
        .unwrap();
        for (s, masked) in [("ACDEF", &[0usize][..]), ("WYWYW", &[1, 3]), ("KKKKK", &[0, 1, 2, 3, 4])] {
            assert_eq!(
                coupled.query(&seq(s), masked).unwrap(),
                pssm.query(&seq(s), masked).unwrap()
            );
        }
    }

    #[test]
    fn random_couplings_are_symmetric() {
        let p = CoupledProvider::random(4, 11, CoupledParams::default());
        for i in 0..4 {
            for j in 0..4 {
                for a in Residue::all().step_by(3) {
                    for b in Residue::all().step_by(5) {
                        assert_eq!(p.coupling(i, a, j, b), p.coupling(j, b, i, a));
                    }
                }
            }
            assert_eq!(p.coupling(i, res('A'), i, res('C')), 0.0);
        }
    }

    #[test]
    fn visible_bias_only_when_unmasked() {
        let p = CoupledProvider::new("t", vec![[0.0; 20]; 2], 2.5).unwrap();
        let unmasked = p.query_report(&seq("AC"), &[], &[0]).unwrap()[0];
        assert_eq!(unmasked.get(res('A')), 2.5);
        let masked = p.query(&seq("AC"), &[0]).unwrap()[0];
        assert_eq!(masked, LogitRow::zeros());
    }
}
