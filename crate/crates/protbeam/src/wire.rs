//! HTTP/JSON protocol between the engine and a model server.
//!
//! `GET /info`, `POST /logits`, `POST /logits_batch`, `GET /healthz`.
//! Positions on the wire are 0-based. Errors are `{"error": ...}` with
//! status 400 for malformed input and 422 for length or alphabet violations.

use protbeam_core::{Error as CoreError, MaskedLogitProvider, ProteinSequence, ALPHABET};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoResponse {
    pub name: String,
    pub alphabet: String,
    pub max_length: Option<usize>,
}

/// One forward pass. Rows come back in `positions` order when given,
/// otherwise in `masked_positions` order. `positions` is how the unmasked
/// regime (`masked_positions: []`) asks for rows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogitsRequest {
    pub sequence: String,
    pub masked_positions: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitsResponse {
    pub logits: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchRequest {
    pub requests: Vec<LogitsRequest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchResponse {
    pub responses: Vec<LogitsResponse>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub sequences: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<f64>,
}

pub const STATUS_OK: u16 = 200;
pub const STATUS_MALFORMED: u16 = 400;
pub const STATUS_NOT_FOUND: u16 = 404;
pub const STATUS_UNPROCESSABLE: u16 = 422;
pub const STATUS_SERVER_ERROR: u16 = 500;

fn error_body(status: u16, msg: impl Into<String>) -> (u16, String) {
    let body = serde_json::to_string(&ErrorResponse { error: msg.into() }).unwrap_or_default();
    (status, body)
}

fn ok_body<T: Serialize>(value: &T) -> (u16, String) {
    match serde_json::to_string(value) {
        Ok(body) => (STATUS_OK, body),
        Err(e) => error_body(STATUS_SERVER_ERROR, e.to_string()),
    }
}

fn status_for(e: &CoreError) -> u16 {
    match e {
        CoreError::EmptySequence
        | CoreError::InvalidResidue { .. }
        | CoreError::LengthMismatch { .. }
        | CoreError::PositionOutOfRange { .. }
        | CoreError::InvalidConfig(_) => STATUS_UNPROCESSABLE,
        _ => STATUS_SERVER_ERROR,
    }
}

fn run_one<P: MaskedLogitProvider + ?Sized>(provider: &P, req: &LogitsRequest) -> Result<LogitsResponse, CoreError> {
    let sequence: ProteinSequence = req.sequence.parse()?;
    let report = req.positions.as_deref().unwrap_or(&req.masked_positions);
    let rows = provider.query_report(&sequence, &req.masked_positions, report)?;
    Ok(LogitsResponse {
        logits: rows.iter().map(|r| r.values().to_vec()).collect(),
    })
}

/// Serves one request against an in-process provider. Returns the status
/// code and JSON body.
pub fn handle_request<P: MaskedLogitProvider + ?Sized>(
    provider: &P,
    method: &str,
    path: &str,
    body: &[u8],
) -> (u16, String) {
    let path = path.split('?').next().unwrap_or(path).trim_end_matches('/');
    match (method, path) {
        ("GET", "/healthz") => (STATUS_OK, "{}".to_string()),
        ("GET", "/info") => ok_body(&InfoResponse {
            name: provider.name().to_string(),
            alphabet: ALPHABET.to_string(),
            max_length: provider.max_length(),
        }),
        ("POST", "/logits") => match serde_json::from_slice::<LogitsRequest>(body) {
            Err(e) => error_body(STATUS_MALFORMED, e.to_string()),
            Ok(req) => match run_one(provider, &req) {
                Ok(resp) => ok_body(&resp),
                Err(e) => error_body(status_for(&e), e.to_string()),
            },
        },
        ("POST", "/logits_batch") => match serde_json::from_slice::<BatchRequest>(body) {
            Err(e) => error_body(STATUS_MALFORMED, e.to_string()),
            Ok(batch) => {
                let mut responses = Vec::with_capacity(batch.requests.len());
                for (i, req) in batch.requests.iter().enumerate() {
                    match run_one(provider, req) {
                        Ok(resp) => responses.push(resp),
                        Err(e) => return error_body(status_for(&e), format!("request {i}: {e}")),
                    }
                }
                ok_body(&BatchResponse { responses })
            }
        },
        (_, "/info" | "/logits" | "/logits_batch" | "/healthz") => error_body(405, format!("method {method} not allowed")),
        _ => error_body(STATUS_NOT_FOUND, format!("no route {path}")),
    }
}
