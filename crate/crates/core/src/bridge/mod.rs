//! Client side of the remote regressor protocol.
//!
//! Every generation step issues one stateless `POST /v1/fit_predict` carrying
//! the full reference set and the query rows. Requests are validated before
//! they leave the process and responses are validated before they are used.
//!
//! Wire format (JSON, UTF-8, plain JSON numbers):
//!
//! ```text
//! POST /v1/fit_predict
//!   {"x_train": [[..]], "y_train": [..], "x_query": [[..]],
//!    "want_distribution": bool, "request_id": "..."}
//! 200 {"means": [..], "distributions": [{"bin_edges": [..], "probabilities": [..]}] | null,
//!      "model_info": "...", "request_id": "..."}
//! 4xx/5xx {"code": "...", "message": "...", "request_id": "..."}
//! GET /v1/health -> {"status": "ok" | "loading", "model_info": "..."}
//! ```

mod stub;

use std::thread;
use std::time::Duration;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::regressor::{PredictedDistribution, RegressorError, DEFAULT_CAPACITY};

pub use stub::{StubConfig, StubServer};

/// Probability mass tolerance applied to distributions received over the wire.
pub const WIRE_MASS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("request has {rows} training rows, above the capacity of {capacity}")]
    Capacity { rows: usize, capacity: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("remote error {status} ({code}): {message}")]
    Remote {
        status: u16,
        code: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPredictRequest {
    pub x_train: Vec<Vec<f64>>,
    pub y_train: Vec<f64>,
    pub x_query: Vec<Vec<f64>>,
    pub want_distribution: bool,
    pub request_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireDistribution {
    pub bin_edges: Vec<f64>,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPredictResponse {
    pub means: Vec<f64>,
    #[serde(default)]
    pub distributions: Option<Vec<WireDistribution>>,
    pub model_info: String,
    pub request_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub request_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model_info: String,
}

fn rows_of(m: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

impl FitPredictRequest {
    /// Build a request; the id is a content hash, so identical payloads
    /// share an id and retries stay idempotent.
    pub fn new(
        x_train: ArrayView2<'_, f64>,
        y_train: &[f64],
        x_query: ArrayView2<'_, f64>,
        want_distribution: bool,
    ) -> Self {
        let mut hasher = Sha256::new();
        for m in [x_train, x_query] {
            hasher.update((m.nrows() as u64).to_le_bytes());
            hasher.update((m.ncols() as u64).to_le_bytes());
            for v in m.iter() {
                hasher.update(v.to_le_bytes());
            }
        }
        for v in y_train {
            hasher.update(v.to_le_bytes());
        }
        hasher.update([want_distribution as u8]);
        let digest = hasher.finalize();
        let request_id = digest[..12].iter().map(|b| format!("{b:02x}")).collect();
        Self {
            x_train: rows_of(x_train),
            y_train: y_train.to_vec(),
            x_query: rows_of(x_query),
            want_distribution,
            request_id,
        }
    }

    /// Shape, finiteness and capacity checks shared by client and server.
    pub fn validate(&self, max_train_rows: usize) -> Result<(), BridgeError> {
        let rows = self.x_train.len();
        if rows > max_train_rows {
            return Err(BridgeError::Capacity {
                rows,
                capacity: max_train_rows,
            });
        }
        if rows == 0 {
            return Err(BridgeError::InvalidRequest("empty training set".into()));
        }
        if self.y_train.len() != rows {
            return Err(BridgeError::InvalidRequest(format!(
                "{rows} training rows but {} targets",
                self.y_train.len()
            )));
        }
        let width = self.x_train[0].len();
        if self
            .x_train
            .iter()
            .chain(&self.x_query)
            .any(|r| r.len() != width)
        {
            return Err(BridgeError::InvalidRequest("ragged feature matrix".into()));
        }
        let finite = self
            .x_train
            .iter()
            .chain(&self.x_query)
            .flatten()
            .chain(&self.y_train)
            .all(|v| v.is_finite());
        if !finite {
            return Err(BridgeError::InvalidRequest("non-finite value".into()));
        }
        Ok(())
    }
}

impl FitPredictResponse {
    pub fn validate(&self, request: &FitPredictRequest) -> Result<(), BridgeError> {
        if self.request_id != request.request_id {
            return Err(BridgeError::Protocol(format!(
                "response id `{}` does not echo request id `{}`",
                self.request_id, request.request_id
            )));
        }
        let m = request.x_query.len();
        if self.means.len() != m {
            return Err(BridgeError::Protocol(format!(
                "{} means for {m} query rows",
                self.means.len()
            )));
        }
        if self.means.iter().any(|v| !v.is_finite()) {
            return Err(BridgeError::Protocol("non-finite mean".into()));
        }
        match (&self.distributions, request.want_distribution) {
            (None, true) => {
                return Err(BridgeError::Protocol("distributions were requested".into()))
            }
            (Some(d), _) if d.len() != m => {
                return Err(BridgeError::Protocol(format!(
                    "{} distributions for {m} query rows",
                    d.len()
                )))
            }
            _ => {}
        }
        for d in self.distributions.iter().flatten() {
            PredictedDistribution::with_tolerance(
                d.bin_edges.clone(),
                d.probabilities.clone(),
                WIRE_MASS_TOLERANCE,
            )
            .map_err(|e| BridgeError::Protocol(format!("invalid distribution: {e}")))?;
        }
        Ok(())
    }

    pub fn into_distributions(self) -> Result<Vec<PredictedDistribution>, RegressorError> {
        self.distributions
            .ok_or_else(|| RegressorError::Protocol("response carries no distributions".into()))?
            .into_iter()
            .map(|d| {
                PredictedDistribution::with_tolerance(
                    d.bin_edges,
                    d.probabilities,
                    WIRE_MASS_TOLERANCE,
                )
            })
            .collect()
    }
}

/// Blocking HTTP client for the fit-and-predict service.
#[derive(Clone)]
pub struct BridgeClient {
    endpoint: String,
    retries: u32,
    max_train_rows: usize,
    agent: ureq::Agent,
}

impl std::fmt::Debug for BridgeClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeClient")
            .field("endpoint", &self.endpoint)
            .field("retries", &self.retries)
            .field("max_train_rows", &self.max_train_rows)
            .finish()
    }
}

enum Attempt {
    Done(Result<FitPredictResponse, BridgeError>),
    Retry(BridgeError),
}

impl BridgeClient {
    pub fn new(endpoint: &str, timeout: Duration, retries: u32) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            retries,
            max_train_rows: DEFAULT_CAPACITY,
            agent,
        }
    }

    pub fn with_max_train_rows(mut self, rows: usize) -> Self {
        self.max_train_rows = rows;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn health(&self) -> Result<HealthResponse, BridgeError> {
        let mut resp = self
            .agent
            .get(format!("{}/v1/health", self.endpoint))
            .call()
            .map_err(|e| BridgeError::Transport(e.to_string()))?;
        if resp.status().as_u16() != 200 {
            return Err(BridgeError::Protocol(format!(
                "health returned HTTP {}",
                resp.status().as_u16()
            )));
        }
        resp.body_mut()
            .read_json()
            .map_err(|e| BridgeError::Protocol(e.to_string()))
    }

    /// One validated round trip, retried on transient failures.
    pub fn fit_predict(&self, request: &FitPredictRequest) -> Result<FitPredictResponse, BridgeError> {
        request.validate(self.max_train_rows)?;
        let mut attempt = 0;
        loop {
            match self.attempt(request) {
                Attempt::Done(result) => return result,
                Attempt::Retry(err) if attempt >= self.retries => return Err(err),
                Attempt::Retry(err) => {
                    log::warn!("fit_predict {} failed ({err}), retrying", request.request_id);
                    attempt += 1;
                    thread::sleep(Duration::from_millis(25 * u64::from(attempt)));
                }
            }
        }
    }

    fn attempt(&self, request: &FitPredictRequest) -> Attempt {
        let sent = self
            .agent
            .post(format!("{}/v1/fit_predict", self.endpoint))
            .send_json(request);
        let mut resp = match sent {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(BridgeError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        if status == 200 {
            let parsed: Result<FitPredictResponse, _> = resp.body_mut().read_json();
            return Attempt::Done(
                parsed
                    .map_err(|e| BridgeError::Protocol(format!("unreadable response: {e}")))
                    .and_then(|r| r.validate(request).map(|_| r)),
            );
        }
        let body: Option<ErrorBody> = resp.body_mut().read_json().ok();
        let (code, message) = body
            .map(|b| (b.code, b.message))
            .unwrap_or_else(|| ("unknown".into(), String::new()));
        match status {
            413 => Attempt::Done(Err(BridgeError::Capacity {
                rows: request.x_train.len(),
                capacity: self.max_train_rows.min(DEFAULT_CAPACITY),
            })),
            500..=599 => Attempt::Retry(BridgeError::Remote {
                status,
                code,
                message,
            }),
            _ => Attempt::Done(Err(BridgeError::Remote {
                status,
                code,
                message,
            })),
        }
    }
}
