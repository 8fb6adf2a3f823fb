//! Config-driven studies producing CSV tables and SVG plots.
//!
//! A study loads the configured dataset, splits it into reference and test
//! sides, generates designs conditioned on test performances and scores them.
//! Every output is a pure function of the config (for local backends).

pub mod config;
mod evaluate;
pub mod output;
pub mod plot;
mod studies;
pub mod synthetic;

use std::path::PathBuf;

use ndarray::{s, Array2};
use thiserror::Error;

pub use config::{BackendKind, ExperimentConfig, Overrides};
pub use evaluate::{airfoil_parameter_names, load_dataset, Evaluator, Surrogate, SurrogateQuality};
pub use output::{PlotKind, Provenance, StudyOutput, Table};
pub use studies::{
    run_generate, run_generation_eval, run_inpaint, run_inpainting_sweep, run_noise_study,
    run_order_study, run_reference_size_sweep, run_reference_variation_study,
};
pub use synthetic::{ProblemKind, SyntheticProblem};

use crate::data::{split_reference_test, subsample, DataError, Dataset};
use crate::generator::GenerationError;
use crate::metrics::MetricsError;
use crate::regressor::{RegressorError, RegressorSpec};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("{context}: {source}")]
    Data {
        context: String,
        #[source]
        source: DataError,
    },
    #[error(transparent)]
    Dataset(#[from] DataError),
    #[error("{context}: {source}")]
    Generation {
        context: String,
        #[source]
        source: GenerationError,
    },
    #[error(transparent)]
    Regressor(#[from] RegressorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("plot error: {0}")]
    Plot(String),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// Process exit code: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// Which study to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Generate,
    Inpaint,
    Eval,
    ReferenceSizeSweep,
    InpaintingSweep,
    OrderStudy,
    NoiseStudy,
    ReferenceVariation,
}

/// Validate, prepare and run `study` on a worker pool sized by the config.
pub fn run(study: Study, config: &ExperimentConfig) -> Result<StudyOutput> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| ExperimentError::Config(format!("cannot start {} workers: {e}", config.workers)))?;
    pool.install(|| {
        let ctx = Context::prepare(config)?;
        match study {
            Study::Generate => run_generate(&ctx),
            Study::Inpaint => run_inpaint(&ctx),
            Study::Eval => run_generation_eval(&ctx),
            Study::ReferenceSizeSweep => run_reference_size_sweep(&ctx),
            Study::InpaintingSweep => run_inpainting_sweep(&ctx),
            Study::OrderStudy => run_order_study(&ctx),
            Study::NoiseStudy => run_noise_study(&ctx),
            Study::ReferenceVariation => run_reference_variation_study(&ctx),
        }
    })
}

/// Data and settings shared by every study.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ExperimentConfig,
    pub spec: RegressorSpec,
    pub reference: Dataset,
    pub test: Dataset,
    pub problem: Option<SyntheticProblem>,
    pub evaluator: Evaluator,
    pub provenance: Provenance,
}

impl Context {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.regressor_spec()?;
        let (dataset, problem) = load_dataset(config)?;
        let (mut reference, test) =
            split_reference_test(&dataset, config.split.reference_fraction, config.split_seed())?;
        if reference.row_count() > spec.capacity {
            log::warn!(
                "reference set has {} rows; subsampling to the capacity of {}",
                reference.row_count(),
                spec.capacity
            );
            reference = subsample(&reference, spec.capacity, config.seed)?;
        }
        let evaluator = Evaluator::prepare(config, problem, &reference, &test)?;
        let provenance = Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            seed: config.seed,
            backend: spec.backend_name().to_string(),
        };
        Ok(Self {
            config: config.clone(),
            spec,
            reference,
            test,
            problem,
            evaluator,
            provenance,
        })
    }

    /// Rows whose performances serve as conditions, capped at `limit`.
    pub fn condition_rows(&self, limit: Option<usize>) -> Dataset {
        let source = match self.config.generation.conditions {
            config::ConditionSource::Test => &self.test,
            config::ConditionSource::Reference => &self.reference,
        };
        let n = limit.map_or(source.row_count(), |l| l.min(source.row_count()));
        let indices: Vec<usize> = (0..n).collect();
        source.select_rows(&indices)
    }

    pub fn conditions(&self, rows: &Dataset) -> Array2<f64> {
        rows.rows().slice(s![.., ..rows.schema().n_performance()]).to_owned()
    }
}
