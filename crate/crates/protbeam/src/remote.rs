//! Client side of the wire protocol.

use std::time::Duration;

use protbeam_core::provider::{check_row_count, validate_query, Ledger, LogitRequest};
use protbeam_core::seq::verify_alphabet;
use protbeam_core::{Error, LogitRow, MaskedLogitProvider, ProteinSequence, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::wire::{BatchRequest, BatchResponse, ErrorResponse, InfoResponse, LogitsRequest, LogitsResponse};

#[derive(Clone, Debug)]
pub struct RemoteConfig {
    pub timeout: Duration,
    /// Requests per `/logits_batch` call.
    pub max_batch: usize,
    /// Idle connections kept open to the server.
    pub pool_size: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            timeout: Duration::from_secs(60),
            max_batch: 64,
            pool_size: 8,
        }
    }
}

/// Provider backed by a model server. Construction performs the `/info`
/// handshake and rejects servers whose alphabet order differs from ours.
#[derive(Debug)]
pub struct RemoteProvider {
    endpoint: String,
    agent: ureq::Agent,
    info: InfoResponse,
    max_batch: usize,
    ledger: Ledger,
}

fn unavailable(e: ureq::Error) -> Error {
    match e {
        ureq::Error::Status(code, resp) => {
            let detail = resp
                .into_json::<ErrorResponse>()
                .map(|r| r.error)
                .unwrap_or_else(|_| "no error body".to_string());
            if code == 422 || code == 400 {
                Error::InvalidResponse(format!("server rejected request ({code}): {detail}"))
            } else {
                Error::ProviderUnavailable(format!("status {code}: {detail}"))
            }
        }
        ureq::Error::Transport(t) => Error::ProviderUnavailable(t.to_string()),
    }
}

fn decode<T: DeserializeOwned>(resp: ureq::Response) -> Result<T> {
    resp.into_json()
        .map_err(|e| Error::InvalidResponse(format!("undecodable body: {e}")))
}

fn rows_from(resp: LogitsResponse, expected: usize) -> Result<Vec<LogitRow>> {
    let rows = resp
        .logits
        .iter()
        .map(|r| LogitRow::from_slice(r))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::InvalidResponse(e.to_string()))?;
    check_row_count(&rows, expected)?;
    Ok(rows)
}

fn wire_request(sequence: &ProteinSequence, masked: &[usize], report: &[usize]) -> LogitsRequest {
    LogitsRequest {
        sequence: sequence.to_code_string(),
        masked_positions: masked.to_vec(),
        positions: (masked != report).then(|| report.to_vec()),
    }
}

impl RemoteProvider {
    pub fn connect(endpoint: &str, config: &RemoteConfig) -> Result<Self> {
        if config.max_batch == 0 {
            return Err(Error::InvalidConfig("max_batch must be at least 1".into()));
        }
        let agent = ureq::AgentBuilder::new()
            .timeout(config.timeout)
            .max_idle_connections_per_host(config.pool_size.max(1))
            .build();
        let endpoint = endpoint.trim_end_matches('/').to_string();
        let info: InfoResponse = decode(
            agent
                .get(&format!("{endpoint}/info"))
                .call()
                .map_err(unavailable)?,
        )?;
        verify_alphabet(&info.alphabet)?;
        Ok(RemoteProvider {
            endpoint,
            agent,
            info,
            max_batch: config.max_batch,
            ledger: Ledger::new(),
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// The handshake response.
    pub fn info(&self) -> &InfoResponse {
        &self.info
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, route: &str, body: &B) -> Result<T> {
        let value = serde_json::to_value(body).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        decode(
            self.agent
                .post(&format!("{}{route}", self.endpoint))
                .send_json(value)
                .map_err(unavailable)?,
        )
    }
}

impl MaskedLogitProvider for RemoteProvider {
    fn name(&self) -> &str {
        &self.info.name
    }

    fn max_length(&self) -> Option<usize> {
        self.info.max_length
    }

    fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    fn forward(&self, sequence: &ProteinSequence, masked: &[usize], report: &[usize]) -> Result<Vec<LogitRow>> {
        let resp: LogitsResponse = self.post("/logits", &wire_request(sequence, masked, report))?;
        rows_from(resp, report.len())
    }

    fn query_batch(&self, requests: &[LogitRequest]) -> Result<Vec<Vec<LogitRow>>> {
        for r in requests {
            validate_query(self, &r.sequence, &r.masked, &r.report)?;
        }
        let mut out = Vec::with_capacity(requests.len());
        for chunk in requests.chunks(self.max_batch) {
            for _ in chunk {
                self.ledger.record(true);
            }
            let body = BatchRequest {
                requests: chunk
                    .iter()
                    .map(|r| wire_request(&r.sequence, &r.masked, &r.report))
                    .collect(),
            };
            let resp: BatchResponse = self.post("/logits_batch", &body)?;
            if resp.responses.len() != chunk.len() {
                return Err(Error::InvalidResponse(format!(
                    "expected {} responses, got {}",
                    chunk.len(),
                    resp.responses.len()
                )));
            }
            for (r, rows) in chunk.iter().zip(resp.responses) {
                out.push(rows_from(rows, r.report.len())?);
            }
        }
        Ok(out)
    }
}
