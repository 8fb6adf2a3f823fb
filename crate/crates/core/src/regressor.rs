//! In-context conditional regressors.
//!
//! A regressor is "fitted" by binding a reference set `(X_ref, y_ref)`; no
//! training happens. Prediction returns a piecewise-constant distribution
//! over the scalar output, whose expectation is the regression output.
//!
//! Local backends:
//! - `Kernel`: Gaussian weights `exp(-|q - x_i|^2 / (2 h^2))` over all
//!   reference rows (Nadaraya-Watson).
//! - `Knn`: uniform weights on the `k` nearest rows; equal distances are
//!   broken by the lower row index.
//!
//! The `Remote` backend defers to an HTTP service (see [`crate::bridge`]),
//! issuing one stateless fit-and-predict call per prediction.

use std::time::Duration;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge::{BridgeClient, BridgeError, FitPredictRequest};

/// Largest reference set the in-context backends accept by default.
pub const DEFAULT_CAPACITY: usize = 10_000;
pub const DEFAULT_BINS: usize = 64;

#[derive(Debug, Error)]
pub enum RegressorError {
    #[error("reference set has {rows} rows, above the capacity of {capacity}")]
    Capacity { rows: usize, capacity: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("shape mismatch: expected {expected} columns, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

pub type Result<T> = std::result::Result<T, RegressorError>;

impl From<BridgeError> for RegressorError {
    fn from(err: BridgeError) -> Self {
        match err {
            BridgeError::Capacity { rows, capacity } => RegressorError::Capacity { rows, capacity },
            BridgeError::InvalidRequest(m) => RegressorError::Argument(m),
            BridgeError::Transport(m) => RegressorError::Transport(m),
            e @ (BridgeError::Protocol(_) | BridgeError::Remote { .. }) => {
                RegressorError::Protocol(e.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout: Duration,
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Backend {
    /// `bandwidth = None` selects the median pairwise distance of `X_ref`,
    /// recomputed on every fit.
    Kernel { bandwidth: Option<f64> },
    Knn { k: usize },
    Remote(RemoteConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub backend: Backend,
    pub capacity: usize,
    pub bins: usize,
}

impl RegressorSpec {
    pub fn new(backend: Backend) -> Self {
        Self {
            backend,
            capacity: DEFAULT_CAPACITY,
            bins: DEFAULT_BINS,
        }
    }

    pub fn kernel() -> Self {
        Self::new(Backend::Kernel { bandwidth: None })
    }

    pub fn kernel_with_bandwidth(h: f64) -> Self {
        Self::new(Backend::Kernel { bandwidth: Some(h) })
    }

    pub fn knn(k: usize) -> Self {
        Self::new(Backend::Knn { k })
    }

    pub fn remote(endpoint: impl Into<String>) -> Self {
        Self::new(Backend::Remote(RemoteConfig {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(60),
            retries: 2,
        }))
    }

    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.capacity = capacity;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(RegressorError::Argument("capacity must be positive".into()));
        }
        if self.bins == 0 {
            return Err(RegressorError::Argument("bin count must be positive".into()));
        }
        match &self.backend {
            Backend::Kernel { bandwidth: Some(h) } if !(*h > 0.0 && h.is_finite()) => Err(
                RegressorError::Argument(format!("kernel bandwidth must be positive, got {h}")),
            ),
            Backend::Knn { k: 0 } => Err(RegressorError::Argument("knn needs k >= 1".into())),
            Backend::Remote(cfg) if cfg.endpoint.is_empty() => {
                Err(RegressorError::Argument("remote endpoint is empty".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn backend_name(&self) -> &'static str {
        match self.backend {
            Backend::Kernel { .. } => "kernel",
            Backend::Knn { .. } => "knn",
            Backend::Remote(_) => "remote",
        }
    }
}

/// Histogram over a scalar target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedDistribution {
    bin_edges: Vec<f64>,
    probabilities: Vec<f64>,
}

impl PredictedDistribution {
    pub fn new(bin_edges: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(bin_edges, probabilities, 1e-9)
    }

    /// Validate with an explicit tolerance on the total probability mass.
    pub fn with_tolerance(bin_edges: Vec<f64>, probabilities: Vec<f64>, tol: f64) -> Result<Self> {
        if probabilities.is_empty() || bin_edges.len() != probabilities.len() + 1 {
            return Err(RegressorError::Argument(format!(
                "{} edges for {} bins",
                bin_edges.len(),
                probabilities.len()
            )));
        }
        if bin_edges.iter().any(|e| !e.is_finite()) || bin_edges.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(RegressorError::Argument(
                "bin edges must be finite and strictly increasing".into(),
            ));
        }
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(RegressorError::Argument(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > tol {
            return Err(RegressorError::Argument(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self {
            bin_edges,
            probabilities,
        })
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn bins(&self) -> usize {
        self.probabilities.len()
    }

    /// Expectation using bin midpoints.
    pub fn mean(&self) -> f64 {
        let m: f64 = self
            .probabilities
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(p, w)| p * 0.5 * (w[0] + w[1]))
            .sum();
        m.clamp(self.bin_edges[0], self.bin_edges[self.bins()])
    }

    /// One draw: pick a bin by probability, then uniform within it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random::<f64>() * self.probabilities.iter().sum::<f64>();
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &p) in self.probabilities.iter().enumerate() {
            if p > 0.0 {
                chosen = Some(i);
                acc += p;
                if u < acc {
                    break;
                }
            }
        }
        let i = chosen.unwrap_or(0);
        let (lo, hi) = (self.bin_edges[i], self.bin_edges[i + 1]);
        lo + (hi - lo) * rng.random::<f64>()
    }
}

/// Equal-width bin edges covering `[lo, hi]` with a small outward pad.
fn bin_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let range = hi - lo;
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let mut pad = 1e-9 * range;
    // Degenerate or ulp-scale ranges need a wider pad to keep edges distinct.
    let min_width = 16.0 * f64::EPSILON * scale * bins as f64;
    if range + 2.0 * pad < min_width {
        pad = 1e-9 * scale + min_width;
    }
    let (a, b) = (lo - pad, hi + pad);
    let mut edges: Vec<f64> = (0..=bins)
        .map(|i| a + (b - a) * i as f64 / bins as f64)
        .collect();
    edges[bins] = b;
    edges
}

/// Bin a weighted sample of `y` onto `edges`. Weights must sum to > 0.
fn histogram(edges: &[f64], support: impl Iterator<Item = (f64, f64)>) -> Vec<f64> {
    let bins = edges.len() - 1;
    let (a, b) = (edges[0], edges[bins]);
    let mut mass = vec![0.0; bins];
    let mut total = 0.0;
    for (y, w) in support {
        let pos = ((y - a) / (b - a) * bins as f64).floor();
        let mut i = (pos.max(0.0) as usize).min(bins - 1);
        // Correct for rounding at bin boundaries.
        while i > 0 && y < edges[i] {
            i -= 1;
        }
        while i + 1 < bins && y >= edges[i + 1] {
            i += 1;
        }
        mass[i] += w;
        total += w;
    }
    mass.iter_mut().for_each(|m| *m /= total);
    mass
}

/// Median of pairwise Euclidean distances over at most 1000 evenly strided rows.
pub fn median_pairwise_distance(x: ArrayView2<'_, f64>) -> Option<f64> {
    const MAX_ROWS: usize = 1000;
    let n = x.nrows();
    if n < 2 {
        return None;
    }
    let s = n.min(MAX_ROWS);
    let rows: Vec<ArrayView1<'_, f64>> = (0..s).map(|k| x.row(k * n / s)).collect();
    let mut dists: Vec<f64> = (0..s)
        .into_par_iter()
        .flat_map_iter(|i| {
            let rows = &rows;
            (i + 1..s).map(move |j| squared_distance(rows[i], rows[j]).sqrt())
        })
        .collect();
    let mid = dists.len() / 2;
    let (_, m, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let m = *m;
    (m > 0.0 && m.is_finite()).then_some(m)
}

#[inline]
pub(crate) fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum()
}

#[derive(Debug, Clone)]
enum Fitted {
    Kernel { bandwidth: f64 },
    Knn { k: usize },
    Remote { client: BridgeClient },
}

/// Immutable binding of a reference set under one [`RegressorSpec`].
#[derive(Debug, Clone)]
pub struct FittedRegressor {
    spec: RegressorSpec,
    x: Array2<f64>,
    y: Vec<f64>,
    y_min: f64,
    y_max: f64,
    edges: Vec<f64>,
    fitted: Fitted,
}

/// Weighted support of one query over reference rows.
struct Weights {
    entries: Vec<(usize, f64)>,
    underflow: bool,
}

/// Means plus the per-row flag marking queries whose kernel weights all
/// underflowed (uniform weights were used instead).
#[derive(Debug, Clone, PartialEq)]
pub struct MeanPrediction {
    pub means: Vec<f64>,
    pub underflow: Vec<bool>,
}

pub fn fit(
    spec: &RegressorSpec,
    x_ref: ArrayView2<'_, f64>,
    y_ref: ArrayView1<'_, f64>,
) -> Result<FittedRegressor> {
    spec.validate()?;
    let n = x_ref.nrows();
    if n == 0 {
        return Err(RegressorError::Argument("empty reference set".into()));
    }
    if n > spec.capacity {
        return Err(RegressorError::Capacity {
            rows: n,
            capacity: spec.capacity,
        });
    }
    if y_ref.len() != n {
        return Err(RegressorError::Argument(format!(
            "{} reference inputs but {} outputs",
            n,
            y_ref.len()
        )));
    }
    if x_ref.iter().chain(y_ref.iter()).any(|v| !v.is_finite()) {
        return Err(RegressorError::Argument(
            "reference data contains non-finite values".into(),
        ));
    }
    let y: Vec<f64> = y_ref.to_vec();
    let y_min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let fitted = match &spec.backend {
        Backend::Kernel { bandwidth } => Fitted::Kernel {
            bandwidth: bandwidth
                .or_else(|| median_pairwise_distance(x_ref))
                .unwrap_or(1.0),
        },
        Backend::Knn { k } => Fitted::Knn { k: (*k).min(n) },
        Backend::Remote(cfg) => Fitted::Remote {
            client: BridgeClient::new(&cfg.endpoint, cfg.timeout, cfg.retries)
                .with_max_train_rows(spec.capacity),
        },
    };
    Ok(FittedRegressor {
        edges: bin_edges(y_min, y_max, spec.bins),
        spec: spec.clone(),
        x: x_ref.to_owned(),
        y,
        y_min,
        y_max,
        fitted,
    })
}

impl FittedRegressor {
    pub fn spec(&self) -> &RegressorSpec {
        &self.spec
    }

    pub fn width(&self) -> usize {
        self.x.ncols()
    }

    pub fn reference_rows(&self) -> usize {
        self.x.nrows()
    }

    /// Kernel bandwidth in use, if this is a kernel backend.
    pub fn bandwidth(&self) -> Option<f64> {
        match self.fitted {
            Fitted::Kernel { bandwidth } => Some(bandwidth),
            _ => None,
        }
    }

    fn check_query(&self, q: ArrayView2<'_, f64>) -> Result<()> {
        if q.ncols() != self.width() {
            return Err(RegressorError::Shape {
                expected: self.width(),
                got: q.ncols(),
            });
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(RegressorError::Argument("query contains non-finite values".into()));
        }
        Ok(())
    }

    fn weights(&self, q: ArrayView1<'_, f64>) -> Weights {
        match self.fitted {
            Fitted::Kernel { bandwidth } => {
                let scale = 2.0 * bandwidth * bandwidth;
                let entries: Vec<(usize, f64)> = self
                    .x
                    .outer_iter()
                    .enumerate()
                    .map(|(i, row)| (i, (-squared_distance(q, row) / scale).exp()))
                    .collect();
                let total: f64 = entries.iter().map(|e| e.1).sum();
                if total > 0.0 && total.is_finite() {
                    Weights {
                        entries,
                        underflow: false,
                    }
                } else {
                    Weights {
                        entries: (0..self.y.len()).map(|i| (i, 1.0)).collect(),
                        underflow: true,
                    }
                }
            }
            Fitted::Knn { k } => {
                let mut d: Vec<(f64, usize)> = self
                    .x
                    .outer_iter()
                    .enumerate()
                    .map(|(i, row)| (squared_distance(q, row), i))
                    .collect();
                let by_key = |a: &(f64, usize), b: &(f64, usize)| {
                    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
                };
                if k < d.len() {
                    d.select_nth_unstable_by(k - 1, by_key);
                    d.truncate(k);
                }
                d.sort_unstable_by(by_key);
                Weights {
                    entries: d.into_iter().map(|(_, i)| (i, 1.0)).collect(),
                    underflow: false,
                }
            }
            Fitted::Remote { .. } => unreachable!("remote weights are not computed locally"),
        }
    }

    fn local_mean(&self, w: &Weights) -> f64 {
        let (num, den) = w
            .entries
            .iter()
            .fold((0.0, 0.0), |(n, d), &(i, wi)| (n + wi * self.y[i], d + wi));
        (num / den).clamp(self.y_min, self.y_max)
    }

    fn remote_call(
        &self,
        client: &BridgeClient,
        q: ArrayView2<'_, f64>,
        want_distribution: bool,
    ) -> Result<crate::bridge::FitPredictResponse> {
        let request = FitPredictRequest::new(self.x.view(), &self.y, q, want_distribution);
        Ok(client.fit_predict(&request)?)
    }

    pub fn predict_distribution(
        &self,
        q: ArrayView2<'_, f64>,
    ) -> Result<Vec<PredictedDistribution>> {
        self.check_query(q)?;
        if let Fitted::Remote { client } = &self.fitted {
            let response = self.remote_call(client, q, true)?;
            return response.into_distributions();
        }
        let rows: Vec<ArrayView1<'_, f64>> = q.outer_iter().collect();
        rows.into_par_iter()
            .map(|row| {
                let w = self.weights(row);
                let probs = histogram(&self.edges, w.entries.iter().map(|&(i, wi)| (self.y[i], wi)));
                PredictedDistribution::new(self.edges.clone(), probs)
            })
            .collect()
    }

    pub fn predict_mean(&self, q: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        Ok(self.predict_mean_with_flags(q)?.means)
    }

    /// Local means are computed directly as `sum(w y) / sum(w)`, not from
    /// the binned distribution.
    pub fn predict_mean_with_flags(&self, q: ArrayView2<'_, f64>) -> Result<MeanPrediction> {
        self.check_query(q)?;
        if let Fitted::Remote { client } = &self.fitted {
            let response = self.remote_call(client, q, false)?;
            let underflow = vec![false; response.means.len()];
            return Ok(MeanPrediction {
                means: response.means,
                underflow,
            });
        }
        let rows: Vec<ArrayView1<'_, f64>> = q.outer_iter().collect();
        let (means, underflow) = rows
            .into_par_iter()
            .map(|row| {
                let w = self.weights(row);
                (self.local_mean(&w), w.underflow)
            })
            .unzip();
        Ok(MeanPrediction { means, underflow })
    }

    /// One seeded draw per query row from its predicted distribution.
    pub fn sample(&self, q: ArrayView2<'_, f64>, seed: u64) -> Result<Vec<f64>> {
        let dists = self.predict_distribution(q)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(dists.iter().map(|d| d.sample(&mut rng)).collect())
    }
}
