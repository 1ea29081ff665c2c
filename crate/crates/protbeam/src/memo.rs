use std::collections::HashMap;
use std::sync::Mutex;

use protbeam_core::provider::{validate_query, Ledger, LogitRequest};
use protbeam_core::{LogitRow, MaskedLogitProvider, ProteinSequence, Result};

type Key = (ProteinSequence, Vec<usize>, Vec<usize>);

fn key(sequence: &ProteinSequence, masked: &[usize], report: &[usize]) -> Key {
    let mut m = masked.to_vec();
    m.sort_unstable();
    (sequence.clone(), m, report.to_vec())
}

/// Per-run cache of forward passes keyed by (sequence, mask set, reported
/// positions). Every query counts as a logical pass; only misses count as
/// physical ones.
pub struct MemoizedProvider<P> {
    inner: P,
    cache: Mutex<HashMap<Key, Vec<LogitRow>>>,
    ledger: Ledger,
}

impl<P: MaskedLogitProvider> MemoizedProvider<P> {
    pub fn new(inner: P) -> Self {
        MemoizedProvider {
            inner,
            cache: Mutex::new(HashMap::new()),
            ledger: Ledger::new(),
        }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    fn lookup(&self, k: &Key) -> Option<Vec<LogitRow>> {
        self.cache.lock().unwrap_or_else(|e| e.into_inner()).get(k).cloned()
    }

    fn store(&self, k: Key, rows: Vec<LogitRow>) {
        self.cache.lock().unwrap_or_else(|e| e.into_inner()).insert(k, rows);
    }
}

impl<P: MaskedLogitProvider> MaskedLogitProvider for MemoizedProvider<P> {
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

    fn forward(&self, sequence: &ProteinSequence, masked: &[usize], report: &[usize]) -> Result<Vec<LogitRow>> {
        self.inner.forward(sequence, masked, report)
    }

    fn query_report(&self, sequence: &ProteinSequence, masked: &[usize], report: &[usize]) -> Result<Vec<LogitRow>> {
        validate_query(self, sequence, masked, report)?;
        let k = key(sequence, masked, report);
        if let Some(rows) = self.lookup(&k) {
            self.ledger.record(false);
            return Ok(rows);
        }
        let rows = self.inner.query_report(sequence, masked, report)?;
        self.ledger.record(true);
        self.store(k, rows.clone());
        Ok(rows)
    }

    fn query_batch(&self, requests: &[LogitRequest]) -> Result<Vec<Vec<LogitRow>>> {
        let keys: Vec<Key> = requests.iter().map(|r| key(&r.sequence, &r.masked, &r.report)).collect();
        let cached: Vec<Option<Vec<LogitRow>>> = keys.iter().map(|k| self.lookup(k)).collect();
        let mut miss_index: HashMap<&Key, usize> = HashMap::new();
        let mut misses = Vec::new();
        for (i, r) in requests.iter().enumerate() {
            if cached[i].is_none() && !miss_index.contains_key(&keys[i]) {
                validate_query(self, &r.sequence, &r.masked, &r.report)?;
                miss_index.insert(&keys[i], misses.len());
                misses.push(r.clone());
            }
        }
        let fetched = if misses.is_empty() {
            Vec::new()
        } else {
            self.inner.query_batch(&misses)?
        };
        let mut first_use = vec![true; misses.len()];
        let mut out = Vec::with_capacity(requests.len());
        for (i, hit) in cached.into_iter().enumerate() {
            match hit {
                Some(rows) => {
                    self.ledger.record(false);
                    out.push(rows);
                }
                None => {
                    let j = miss_index[&keys[i]];
                    self.ledger.record(std::mem::replace(&mut first_use[j], false));
                    out.push(fetched[j].clone());
                }
            }
        }
        for (k, &j) in &miss_index {
            self.store((*k).clone(), fetched[j].clone());
        }
        Ok(out)
    }
}
