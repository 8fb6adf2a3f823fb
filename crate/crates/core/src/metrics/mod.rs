//! Evaluation metrics for generated designs.
//!
//! Accuracy: [`mape`], [`mae`], [`r_squared`] between target and achieved
//! performances. Distribution-level: precision/recall curves ([`prd`]) and
//! the maximum mean discrepancy ([`mmd`]).

mod kmeans;
pub mod mmd;
pub mod prd;

use thiserror::Error;

pub use kmeans::{kmeans, KMeansResult};
pub use mmd::{mmd_squared, Estimator, MmdConfig};
pub use prd::{
    build_state_space, prd_curve, prd_from_samples, HistogramPair, PrdConfig, PrdCurve,
    PrdSummary,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} targets, {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Targets with magnitude below this are excluded from MAPE.
pub const MAPE_ZERO_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapeReport {
    /// Percentage, averaged over the entries that were not skipped.
    pub value: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

fn check_lengths(targets: &[f64], predictions: &[f64]) -> Result<()> {
    if targets.len() != predictions.len() {
        return Err(MetricsError::LengthMismatch(targets.len(), predictions.len()));
    }
    if targets.is_empty() {
        return Err(MetricsError::Argument("empty input".into()));
    }
    Ok(())
}

/// Mean absolute percentage error, skipping near-zero targets.
pub fn mape(targets: &[f64], predictions: &[f64]) -> Result<MapeReport> {
    check_lengths(targets, predictions)?;
    let mut total = 0.0;
    let mut evaluated = 0;
    for (t, p) in targets.iter().zip(predictions) {
        if t.abs() < MAPE_ZERO_THRESHOLD {
            continue;
        }
        total += ((t - p) / t).abs();
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(MetricsError::Undefined("all targets are near zero".into()));
    }
    Ok(MapeReport {
        value: 100.0 * total / evaluated as f64,
        evaluated,
        skipped: targets.len() - evaluated,
    })
}

pub fn mae(targets: &[f64], predictions: &[f64]) -> Result<f64> {
    check_lengths(targets, predictions)?;
    let total: f64 = targets
        .iter()
        .zip(predictions)
        .map(|(t, p)| (t - p).abs())
        .sum();
    Ok(total / targets.len() as f64)
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r_squared(targets: &[f64], predictions: &[f64]) -> Result<f64> {
    check_lengths(targets, predictions)?;
    if targets.len() < 2 {
        return Err(MetricsError::Undefined("R² needs at least 2 targets".into()));
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let ss_tot: f64 = targets.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(MetricsError::Undefined("targets have zero variance".into()));
    }
    let ss_res: f64 = targets
        .iter()
        .zip(predictions)
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}
