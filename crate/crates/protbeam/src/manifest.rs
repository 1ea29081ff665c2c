use std::collections::BTreeMap;
use std::path::Path;

use protbeam_core::provider::LedgerSnapshot;
use protbeam_core::samplers::SeedTally;
use serde::{Deserialize, Serialize};

use crate::error::AppResult;
use crate::providers::{sha256_hex, ProviderIdentity};

pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to re-run a command: the argument vector, the fully
/// resolved configuration, and what the provider said about itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provider: Option<ProviderIdentity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ledger: Option<LedgerSnapshot>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tallies: Vec<SeedTally>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scored_sequences: Option<u64>,
    pub retry_budget_exhausted: bool,
    pub threads: usize,
    pub wall_time_seconds: f64,
    /// Input files by path, with SHA-256 digests.
    pub inputs: BTreeMap<String, String>,
    /// Output files by path, with SHA-256 digests.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>, config: serde_json::Value) -> Self {
        RunManifest {
            format_version: FORMAT_VERSION,
            command: command.to_string(),
            argv,
            config,
            provider: None,
            rng_seed: None,
            ledger: None,
            tallies: Vec::new(),
            scored_sequences: None,
            retry_budget_exhausted: false,
            threads: 1,
            wall_time_seconds: 0.0,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> AppResult<()> {
        let bytes = std::fs::read(path)?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path, bytes: &[u8]) {
        self.outputs.insert(path.display().to_string(), sha256_hex(bytes));
    }
}
