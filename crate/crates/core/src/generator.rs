//! Sequential conditional generation of design vectors.
//!
//! Parameters are produced one at a time. At step `t`, targeting parameter
//! `j = order[t]`, the regressor is fitted once on
//!
//! ```text
//! X_ref = [reference performances | known columns | columns order[..t]]
//! y_ref = reference column j
//! ```
//!
//! and queried with the matching prefix of the generation rows
//! `[conditions | known values | values generated so far]`. The predicted
//! means become column `j` of every generated design. Everything happens in
//! min-max space fitted on the reference set; outputs are mapped back.

use std::time::{Duration, Instant};

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, NormalizationMode, NormalizationState};
use crate::regressor::{self, RegressorError, RegressorSpec};

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("invalid generation task: {0}")]
    Argument(String),
    #[error("reference set has {rows} rows, above the capacity of {capacity}")]
    Capacity { rows: usize, capacity: usize },
    #[error("generation failed at step {step} (parameter {parameter}): {source}")]
    Step {
        step: usize,
        parameter: usize,
        #[source]
        source: RegressorError,
    },
}

pub type Result<T> = std::result::Result<T, GenerationError>;

/// Order in which unknown parameters are generated.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OrderPolicy {
    /// Ascending schema order.
    #[default]
    Default,
    /// Seeded uniform shuffle.
    Random { seed: u64 },
    /// A permutation of the unknown parameter indices.
    Explicit(Vec<usize>),
}

pub fn resolve_order(policy: &OrderPolicy, unknown: &[usize]) -> Result<Vec<usize>> {
    let mut sorted = unknown.to_vec();
    sorted.sort_unstable();
    match policy {
        OrderPolicy::Default => Ok(sorted),
        OrderPolicy::Random { seed } => {
            sorted.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            Ok(sorted)
        }
        OrderPolicy::Explicit(perm) => {
            let mut check = perm.clone();
            check.sort_unstable();
            if check != sorted {
                return Err(GenerationError::Argument(format!(
                    "explicit order {perm:?} is not a permutation of {sorted:?}"
                )));
            }
            Ok(perm.clone())
        }
    }
}

/// What to generate: target performances, optionally known parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationTask {
    /// `m x n` target performances, raw units.
    pub conditions: Array2<f64>,
    /// Length `N`; `true` marks a parameter whose value is given.
    pub known_mask: Vec<bool>,
    /// `m x |known|` raw values for the masked parameters, in schema order.
    pub known_values: Option<Array2<f64>>,
    pub order: OrderPolicy,
    /// Standard deviation of Gaussian noise added in normalized space to each
    /// generated value; 0 disables.
    pub noise_std: f64,
    pub noise_seed: u64,
}

impl GenerationTask {
    /// Generate all `n_parameters` parameters for each condition row.
    pub fn new(conditions: Array2<f64>, n_parameters: usize) -> Self {
        Self {
            conditions,
            known_mask: vec![false; n_parameters],
            known_values: None,
            order: OrderPolicy::Default,
            noise_std: 0.0,
            noise_seed: 0,
        }
    }

    pub fn with_known(mut self, mask: Vec<bool>, values: Array2<f64>) -> Self {
        self.known_mask = mask;
        self.known_values = Some(values);
        self
    }

    pub fn with_order(mut self, order: OrderPolicy) -> Self {
        self.order = order;
        self
    }

    pub fn with_noise(mut self, std: f64, seed: u64) -> Self {
        self.noise_std = std;
        self.noise_seed = seed;
        self
    }

    pub fn unknown_indices(&self) -> Vec<usize> {
        (0..self.known_mask.len())
            .filter(|&j| !self.known_mask[j])
            .collect()
    }

    pub fn known_indices(&self) -> Vec<usize> {
        (0..self.known_mask.len())
            .filter(|&j| self.known_mask[j])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub parameter: usize,
    /// Input width of the regressor at this step.
    pub input_width: usize,
    /// Query rows whose kernel weights underflowed.
    pub underflow_rows: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    /// `m x N` designs in schema parameter order and raw units. Boolean
    /// parameters are thresholded at 0.5.
    pub designs: Array2<f64>,
    /// Designs before boolean thresholding.
    pub unthresholded: Array2<f64>,
    /// Designs in the reference set's normalized space.
    pub normalized: Array2<f64>,
    pub order: Vec<usize>,
    pub steps: Vec<StepDiagnostics>,
    /// Regressor fits performed; always the number of unknown parameters.
    pub fits: usize,
}

fn validate(reference: &Dataset, spec: &RegressorSpec, task: &GenerationTask) -> Result<()> {
    let schema = reference.schema();
    let n_ref = reference.row_count();
    if n_ref == 0 {
        return Err(GenerationError::Argument("reference set is empty".into()));
    }
    if n_ref > spec.capacity {
        return Err(GenerationError::Capacity {
            rows: n_ref,
            capacity: spec.capacity,
        });
    }
    if task.conditions.ncols() != schema.n_performance() {
        return Err(GenerationError::Argument(format!(
            "conditions have {} columns, reference has {} performance indicators",
            task.conditions.ncols(),
            schema.n_performance()
        )));
    }
    if task.conditions.iter().any(|v| !v.is_finite()) {
        return Err(GenerationError::Argument("conditions contain non-finite values".into()));
    }
    if task.known_mask.len() != schema.n_parameters() {
        return Err(GenerationError::Argument(format!(
            "mask has {} entries, reference has {} parameters",
            task.known_mask.len(),
            schema.n_parameters()
        )));
    }
    let n_known = task.known_mask.iter().filter(|&&k| k).count();
    match (&task.known_values, n_known) {
        (None, 0) => {}
        (None, _) => {
            return Err(GenerationError::Argument(
                "mask marks known parameters but no values were given".into(),
            ))
        }
        (Some(v), _) => {
            if v.ncols() != n_known || v.nrows() != task.conditions.nrows() {
                return Err(GenerationError::Argument(format!(
                    "known values are {}x{}, expected {}x{}",
                    v.nrows(),
                    v.ncols(),
                    task.conditions.nrows(),
                    n_known
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(GenerationError::Argument(
                    "known values contain non-finite entries".into(),
                ));
            }
        }
    }
    if !(task.noise_std >= 0.0 && task.noise_std.is_finite()) {
        return Err(GenerationError::Argument(format!(
            "noise std must be a non-negative number, got {}",
            task.noise_std
        )));
    }
    spec.validate()
        .map_err(|e| GenerationError::Argument(e.to_string()))
}

/// Generate the unknown parameters of every condition row.
pub fn generate(
    reference: &Dataset,
    spec: &RegressorSpec,
    task: &GenerationTask,
) -> Result<GenerationResult> {
    validate(reference, spec, task)?;
    let schema = reference.schema();
    let n_perf = schema.n_performance();
    let n_params = schema.n_parameters();
    let m = task.conditions.nrows();

    let known = task.known_indices();
    let order = resolve_order(&task.order, &task.unknown_indices())?;

    let state = NormalizationState::fit(reference, NormalizationMode::MinMax);
    let ref_norm = state.normalize_rows(reference.rows());

    // Column layout shared by reference inputs and queries:
    // performances, known parameters, then unknowns in generation order.
    let layout: Vec<usize> = (0..n_perf)
        .chain(known.iter().map(|&j| n_perf + j))
        .chain(order.iter().map(|&j| n_perf + j))
        .collect();
    let x_ref = ref_norm.select(Axis(1), &layout);
    let base_width = n_perf + known.len();

    let mut x_gen = Array2::<f64>::zeros((m, layout.len()));
    let perf_cols: Vec<usize> = (0..n_perf).collect();
    x_gen
        .slice_mut(s![.., ..n_perf])
        .assign(&state.normalize_columns(task.conditions.view(), &perf_cols));
    if let Some(values) = &task.known_values {
        let cols: Vec<usize> = known.iter().map(|&j| n_perf + j).collect();
        x_gen
            .slice_mut(s![.., n_perf..base_width])
            .assign(&state.normalize_columns(values.view(), &cols));
    }

    let noise = (task.noise_std > 0.0).then(|| {
        (
            Normal::new(0.0, task.noise_std).expect("validated std"),
            ChaCha8Rng::seed_from_u64(task.noise_seed),
        )
    });
    let mut noise = noise;

    let mut steps = Vec::with_capacity(order.len());
    for (t, &j) in order.iter().enumerate() {
        let started = Instant::now();
        let width = base_width + t;
        let step_err = |source| GenerationError::Step {
            step: t,
            parameter: j,
            source,
        };
        let model = regressor::fit(
            spec,
            x_ref.slice(s![.., ..width]),
            x_ref.column(width),
        )
        .map_err(step_err)?;
        let prediction = model
            .predict_mean_with_flags(x_gen.slice(s![.., ..width]))
            .map_err(step_err)?;
        let mut column = prediction.means;
        if let Some((dist, rng)) = noise.as_mut() {
            for v in column.iter_mut() {
                *v += dist.sample(rng);
            }
        }
        x_gen
            .column_mut(width)
            .assign(&ndarray::Array1::from(column));
        steps.push(StepDiagnostics {
            parameter: j,
            input_width: width,
            underflow_rows: prediction.underflow.iter().filter(|&&u| u).count(),
            elapsed: started.elapsed(),
        });
    }

    // Back to schema order.
    let mut normalized = Array2::<f64>::zeros((m, n_params));
    for (pos, &col) in layout.iter().enumerate().skip(n_perf) {
        normalized.column_mut(col - n_perf).assign(&x_gen.column(pos));
    }
    let param_cols: Vec<usize> = (n_perf..n_perf + n_params).collect();
    let mut unthresholded = state.denormalize_columns(normalized.view(), &param_cols);
    if let Some(values) = &task.known_values {
        for (k, &j) in known.iter().enumerate() {
            unthresholded.column_mut(j).assign(&values.column(k));
        }
    }
    let mut designs = unthresholded.clone();
    for &j in &order {
        if schema.is_boolean_parameter(j) {
            designs
                .column_mut(j)
                .mapv_inplace(|v| if v >= 0.5 { 1.0 } else { 0.0 });
        }
    }

    Ok(GenerationResult {
        designs,
        unthresholded,
        normalized,
        fits: order.len(),
        order,
        steps,
    })
}

/// Complete partially known designs. Same machinery as [`generate`]; known
/// parameters are fixed inputs and are returned verbatim.
pub fn inpaint(
    reference: &Dataset,
    spec: &RegressorSpec,
    task: &GenerationTask,
) -> Result<GenerationResult> {
    generate(reference, spec, task)
}

/// Condition rows taken from a dataset's performance columns.
pub fn conditions_from(dataset: &Dataset) -> Array2<f64> {
    dataset.performances().to_owned()
}

/// Known-value matrix for `mask` taken from the given parameter rows.
pub fn known_values_from(parameters: ArrayView2<'_, f64>, mask: &[bool]) -> Array2<f64> {
    let cols: Vec<usize> = (0..mask.len()).filter(|&j| mask[j]).collect();
    parameters.select(Axis(1), &cols)
}
