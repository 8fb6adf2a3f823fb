//! Loopback implementation of the fit-and-predict service backed by the
//! local kernel regressor. Used for conformance tests of the client and for
//! running the remote backend without the real model service.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use ndarray::{Array1, Array2};
use tiny_http::{Header, Method, Request, Response, Server};

use super::{ErrorBody, FitPredictRequest, FitPredictResponse, HealthResponse, WireDistribution};
use super::BridgeError;
use crate::regressor::{self, RegressorSpec, DEFAULT_CAPACITY};

pub const STUB_MODEL_INFO: &str = concat!("seqdesign-stub-kernel/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone)]
pub struct StubConfig {
    /// Listen address; port 0 picks a free port.
    pub addr: String,
    pub max_train_rows: usize,
    /// Local backend answering requests.
    pub spec: RegressorSpec,
    /// Answer this many fit_predict calls with HTTP 503 before serving.
    pub fail_first: usize,
    pub workers: usize,
}

impl Default for StubConfig {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:0".into(),
            max_train_rows: DEFAULT_CAPACITY,
            spec: RegressorSpec::kernel(),
            fail_first: 0,
            workers: 4,
        }
    }
}

struct Shared {
    config: StubConfig,
    failures_left: AtomicUsize,
    served: AtomicUsize,
}

/// Background HTTP server; shuts down when dropped.
pub struct StubServer {
    addr: SocketAddr,
    server: Arc<Server>,
    shared: Arc<Shared>,
    workers: Vec<JoinHandle<()>>,
}

impl StubServer {
    pub fn spawn() -> std::io::Result<Self> {
        Self::spawn_with(StubConfig::default())
    }

    pub fn spawn_with(config: StubConfig) -> std::io::Result<Self> {
        let server = Server::http(config.addr.as_str())
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("stub server is not bound to an IP address"))?;
        let server = Arc::new(server);
        let shared = Arc::new(Shared {
            failures_left: AtomicUsize::new(config.fail_first),
            served: AtomicUsize::new(0),
            config,
        });
        let workers = (0..shared.config.workers.max(1))
            .map(|_| {
                let server = Arc::clone(&server);
                let shared = Arc::clone(&shared);
                std::thread::spawn(move || {
                    while let Ok(request) = server.recv() {
                        handle(&shared, request);
                    }
                })
            })
            .collect();
        Ok(Self {
            addr,
            server,
            shared,
            workers,
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Successful fit_predict responses sent so far.
    pub fn served(&self) -> usize {
        self.shared.served.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn json_response<T: serde::Serialize>(status: u16, body: &T) -> Response<std::io::Cursor<Vec<u8>>> {
    let text = serde_json::to_string(body).expect("serializable body");
    Response::from_string(text)
        .with_status_code(status)
        .with_header(
            Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..])
                .expect("static header"),
        )
}

fn error(status: u16, code: &str, message: String, request_id: Option<String>) -> Response<std::io::Cursor<Vec<u8>>> {
    json_response(
        status,
        &ErrorBody {
            code: code.into(),
            message,
            request_id,
        },
    )
}

fn handle(shared: &Shared, mut request: Request) {
    let response = match (request.method(), request.url()) {
        (Method::Get, "/v1/health") => json_response(
            200,
            &HealthResponse {
                status: "ok".into(),
                model_info: STUB_MODEL_INFO.into(),
            },
        ),
        (Method::Post, "/v1/fit_predict") => {
            let mut body = String::new();
            match request.as_reader().read_to_string(&mut body) {
                Ok(_) => fit_predict(shared, &body),
                Err(e) => error(400, "bad_request", e.to_string(), None),
            }
        }
        _ => error(404, "not_found", format!("no route for {}", request.url()), None),
    };
    let _ = request.respond(response);
}

fn fit_predict(shared: &Shared, body: &str) -> Response<std::io::Cursor<Vec<u8>>> {
    let req: FitPredictRequest = match serde_json::from_str(body) {
        Ok(r) => r,
        Err(e) => return error(400, "bad_request", e.to_string(), None),
    };
    let id = Some(req.request_id.clone());
    if shared
        .failures_left
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
        .is_ok()
    {
        return error(503, "unavailable", "injected failure".into(), id);
    }
    match req.validate(shared.config.max_train_rows) {
        Err(BridgeError::Capacity { rows, capacity }) => {
            return error(
                413,
                "capacity",
                format!("{rows} training rows exceed the limit of {capacity}"),
                id,
            )
        }
        Err(e) => return error(400, "bad_request", e.to_string(), id),
        Ok(()) => {}
    }
    let d = req.x_train[0].len();
    let to_matrix = |rows: &[Vec<f64>]| {
        Array2::from_shape_vec((rows.len(), d), rows.concat()).expect("validated shape")
    };
    let x = to_matrix(&req.x_train);
    let q = to_matrix(&req.x_query);
    let y = Array1::from(req.y_train.clone());
    let spec = shared.config.spec.clone().with_capacity(shared.config.max_train_rows);
    let result = regressor::fit(&spec, x.view(), y.view()).and_then(|model| {
        let means = model.predict_mean(q.view())?;
        let distributions = if req.want_distribution {
            Some(
                model
                    .predict_distribution(q.view())?
                    .into_iter()
                    .map(|d| WireDistribution {
                        bin_edges: d.bin_edges().to_vec(),
                        probabilities: d.probabilities().to_vec(),
                    })
                    .collect(),
            )
        } else {
            None
        };
        Ok((means, distributions))
    });
    match result {
        Ok((means, distributions)) => {
            shared.served.fetch_add(1, Ordering::SeqCst);
            json_response(
                200,
                &FitPredictResponse {
                    means,
                    distributions,
                    model_info: STUB_MODEL_INFO.into(),
                    request_id: req.request_id,
                },
            )
        }
        Err(e) => error(500, "model_failure", e.to_string(), id),
    }
}
