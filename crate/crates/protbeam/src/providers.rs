//! Provider spec strings: `pssm:FILE`, `coupled:FILE`, `remote:URL`,
//! `pssm-random:L:SEED`, `coupled-random:L:SEED`.

use std::path::Path;

use protbeam_core::provider::{CoupledParams, CoupledProvider, PssmProvider};
use protbeam_core::MaskedLogitProvider;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};
use crate::io::{read_text, CoupledFile, PssmFile};
use crate::memo::MemoizedProvider;
use crate::remote::{RemoteConfig, RemoteProvider};
use crate::wire::InfoResponse;

/// Logit scale of `pssm-random` tables.
pub const RANDOM_PSSM_SCALE: f64 = 3.0;

/// What the manifest records about the provider.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderIdentity {
    pub spec: String,
    pub kind: String,
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub info: Option<InfoResponse>,
    pub memoized: bool,
}

pub type DynProvider = Box<dyn MaskedLogitProvider>;

pub struct LoadedProvider {
    pub provider: DynProvider,
    pub identity: ProviderIdentity,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn random_args(kind: &str, rest: &str) -> AppResult<(usize, u64)> {
    let err = || AppError::config(format!("expected {kind}:LENGTH:SEED, got {kind}:{rest}"));
    let (len, seed) = rest.split_once(':').ok_or_else(err)?;
    let len: usize = len.parse().map_err(|_| err())?;
    if len == 0 {
        return Err(err());
    }
    Ok((len, seed.parse().map_err(|_| err())?))
}

pub fn load_provider(spec: &str, remote: &RemoteConfig, memoize: bool) -> AppResult<LoadedProvider> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| AppError::config(format!("provider {spec:?} needs a KIND:ARG form")))?;
    let mut source_sha256 = None;
    let mut info = None;
    let provider: DynProvider = match kind {
        "pssm" | "coupled" => {
            let text = read_text(Path::new(rest))?;
            source_sha256 = Some(sha256_hex(text.as_bytes()));
            let parse_err = |e: serde_json::Error| AppError::config(format!("{rest}: {e}"));
            if kind == "pssm" {
                Box::new(serde_json::from_str::<PssmFile>(&text).map_err(parse_err)?.into_provider()?)
            } else {
                Box::new(serde_json::from_str::<CoupledFile>(&text).map_err(parse_err)?.into_provider()?)
            }
        }
        "remote" => {
            let p = RemoteProvider::connect(rest, remote)?;
            info = Some(p.info().clone());
            Box::new(p)
        }
        "pssm-random" => {
            let (len, seed) = random_args(kind, rest)?;
            Box::new(PssmProvider::random(len, seed, RANDOM_PSSM_SCALE))
        }
        "coupled-random" => {
            let (len, seed) = random_args(kind, rest)?;
            Box::new(CoupledProvider::random(len, seed, CoupledParams::default()))
        }
        other => return Err(AppError::config(format!("unknown provider kind {other:?}"))),
    };
    let identity = ProviderIdentity {
        spec: spec.to_string(),
        kind: kind.to_string(),
        name: provider.name().to_string(),
        source_sha256,
        info,
        memoized: memoize,
    };
    let provider: DynProvider = if memoize {
        Box::new(MemoizedProvider::new(provider))
    } else {
        provider
    };
    Ok(LoadedProvider { provider, identity })
}
