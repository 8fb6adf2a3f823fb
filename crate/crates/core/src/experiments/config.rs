//! TOML experiment configuration.
//!
//! ```toml
//! seed = 7
//! output_dir = "out"
//! workers = 4
//!
//! [dataset]
//! kind = "synthetic"          # synthetic | tabular | airfoil
//! problem = "quadratic-bowl"  # linear-sum | quadratic-bowl | hierarchical
//! dimension = 3
//! rows = 2000
//!
//! [regressor]
//! backend = "kernel"          # kernel | knn | remote
//! bandwidth = 0.05
//!
//! [split]
//! reference_fraction = 0.7
//! ```
//!
//! Every section except `[dataset]` is optional. Unknown keys are rejected.
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::synthetic::ProblemKind;
use super::ExperimentError;
use crate::generator::OrderPolicy;
use crate::metrics::{Estimator, MmdConfig, PrdConfig};
use crate::regressor::{Backend, RegressorSpec, RemoteConfig, DEFAULT_BINS, DEFAULT_CAPACITY};

type Result<T> = std::result::Result<T, ExperimentError>;

fn config_error(message: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(message.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads for sweep points and metric kernels.
    #[serde(default = "defaults::workers")]
    pub workers: usize,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub regressor: RegressorConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub evaluator: EvaluatorConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub order_study: OrderStudyConfig,
    #[serde(default)]
    pub refsize: RefsizeConfig,
    #[serde(default)]
    pub inpaint: InpaintConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub refsets: RefsetsConfig,
}

mod defaults {
    use std::path::PathBuf;

    pub fn output_dir() -> PathBuf {
        PathBuf::from("results")
    }
    pub fn workers() -> usize {
        1
    }
    pub fn rows() -> usize {
        2000
    }
    pub fn points_per_surface() -> usize {
        30
    }
    pub fn k() -> usize {
        1
    }
    pub fn timeout_ms() -> u64 {
        60_000
    }
    pub fn retries() -> u32 {
        2
    }
    pub fn capacity() -> usize {
        super::DEFAULT_CAPACITY
    }
    pub fn bins() -> usize {
        super::DEFAULT_BINS
    }
    pub fn reference_fraction() -> f64 {
        0.7
    }
    pub fn surrogate_rows() -> usize {
        5000
    }
    pub fn clusters() -> usize {
        20
    }
    pub fn resolution() -> usize {
        1001
    }
    pub fn runs() -> usize {
        5
    }
    pub fn repeats() -> usize {
        10
    }
    pub fn sweep_conditions() -> usize {
        2000
    }
    pub fn inpaint_repeats() -> usize {
        3
    }
    pub fn noise_std() -> f64 {
        1e-4
    }
    pub fn noise_repeats() -> usize {
        1500
    }
    pub fn sets() -> usize {
        3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetConfig {
    Synthetic(SyntheticSource),
    Tabular(TabularSource),
    Airfoil(AirfoilSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub problem: ProblemKind,
    pub dimension: usize,
    #[serde(default = "defaults::rows")]
    pub rows: usize,
    /// Sampling seed; the global seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularSource {
    pub path: PathBuf,
    pub performance: Vec<String>,
    pub parameters: Vec<String>,
    #[serde(default)]
    pub boolean: Vec<String>,
}

/// A directory of Selig `.dat` files plus a CSV of their performances keyed
/// by a `name` column holding the file stem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AirfoilSource {
    pub directory: PathBuf,
    pub performance_csv: PathBuf,
    pub performance: Vec<String>,
    #[serde(default = "defaults::points_per_surface")]
    pub points_per_surface: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[default]
    Kernel,
    Knn,
    Remote,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "kernel" => Ok(Self::Kernel),
            "knn" => Ok(Self::Knn),
            "remote" => Ok(Self::Remote),
            other => Err(format!("unknown backend `{other}` (kernel | knn | remote)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressorConfig {
    #[serde(default)]
    pub backend: BackendKind,
    /// Kernel bandwidth in normalized units; median heuristic when absent.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default = "defaults::k")]
    pub k: usize,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "defaults::timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "defaults::retries")]
    pub retries: u32,
    #[serde(default = "defaults::capacity")]
    pub capacity: usize,
    #[serde(default = "defaults::bins")]
    pub bins: usize,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Kernel,
            bandwidth: None,
            k: defaults::k(),
            endpoint: None,
            timeout_ms: defaults::timeout_ms(),
            retries: defaults::retries(),
            capacity: defaults::capacity(),
            bins: defaults::bins(),
        }
    }
}

impl RegressorConfig {
    pub fn spec(&self) -> Result<RegressorSpec> {
        let backend = match self.backend {
            BackendKind::Kernel => Backend::Kernel {
                bandwidth: self.bandwidth,
            },
            BackendKind::Knn => Backend::Knn { k: self.k },
            BackendKind::Remote => Backend::Remote(RemoteConfig {
                endpoint: self
                    .endpoint
                    .clone()
                    .ok_or_else(|| config_error("remote backend needs `regressor.endpoint`"))?,
                timeout: Duration::from_millis(self.timeout_ms),
                retries: self.retries,
            }),
        };
        let spec = RegressorSpec {
            backend,
            capacity: self.capacity,
            bins: self.bins,
        };
        spec.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "defaults::reference_fraction")]
    pub reference_fraction: f64,
    /// The global seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            reference_fraction: defaults::reference_fraction(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionSource {
    /// Performances of the held-out test designs.
    #[default]
    Test,
    /// Performances of the reference designs themselves.
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderKind {
    #[default]
    Default,
    Random,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    #[serde(default)]
    pub conditions: ConditionSource,
    /// Use at most this many condition rows.
    #[serde(default)]
    pub max_conditions: Option<usize>,
    #[serde(default)]
    pub order: OrderKind,
    /// Explicit generation order by parameter name; overrides `order`.
    #[serde(default)]
    pub explicit_order: Option<Vec<String>>,
    #[serde(default)]
    pub noise_std: f64,
    /// Parameter names given as known values by `inpaint`.
    #[serde(default)]
    pub known: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluatorKind {
    /// Closed-form performance map of a synthetic dataset.
    Analytic,
    /// Regressor fitted on (design, performance) reference pairs.
    Surrogate,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorConfig {
    /// Analytic for synthetic datasets, surrogate otherwise, when absent.
    #[serde(default)]
    pub kind: Option<EvaluatorKind>,
    #[serde(default)]
    pub surrogate_rows: Option<usize>,
    /// Surrogate regressor; the generation regressor when absent.
    #[serde(default)]
    pub regressor: Option<RegressorConfig>,
}

impl EvaluatorConfig {
    pub fn surrogate_rows(&self) -> usize {
        self.surrogate_rows.unwrap_or_else(defaults::surrogate_rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    #[default]
    Unbiased,
    Biased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    #[serde(default = "defaults::clusters")]
    pub prd_clusters: usize,
    #[serde(default = "defaults::resolution")]
    pub prd_resolution: usize,
    #[serde(default = "defaults::runs")]
    pub prd_runs: usize,
    #[serde(default)]
    pub mmd_bandwidth: Option<f64>,
    #[serde(default)]
    pub mmd_estimator: EstimatorKind,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            prd_clusters: defaults::clusters(),
            prd_resolution: defaults::resolution(),
            prd_runs: defaults::runs(),
            mmd_bandwidth: None,
            mmd_estimator: EstimatorKind::Unbiased,
        }
    }
}

impl MetricsConfig {
    pub fn prd(&self, seed: u64) -> PrdConfig {
        PrdConfig {
            clusters: self.prd_clusters,
            resolution: self.prd_resolution,
            runs: self.prd_runs,
            seed,
            ..PrdConfig::default()
        }
    }

    pub fn mmd(&self) -> MmdConfig {
        MmdConfig {
            bandwidth: self.mmd_bandwidth,
            estimator: match self.mmd_estimator {
                EstimatorKind::Unbiased => Estimator::Unbiased,
                EstimatorKind::Biased => Estimator::Biased,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderStudyConfig {
    #[serde(default = "defaults::repeats")]
    pub repeats: usize,
    /// Per-repeat shuffle seeds; `seed + r` when absent.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
}

impl Default for OrderStudyConfig {
    fn default() -> Self {
        Self {
            repeats: defaults::repeats(),
            seeds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefsizeConfig {
    /// `200, 400, ..., 10000` when absent.
    #[serde(default)]
    pub sizes: Option<Vec<usize>>,
    #[serde(default = "defaults::sweep_conditions")]
    pub conditions: usize,
}

impl Default for RefsizeConfig {
    fn default() -> Self {
        Self {
            sizes: None,
            conditions: defaults::sweep_conditions(),
        }
    }
}

pub fn default_reference_sizes() -> Vec<usize> {
    (1..=50).map(|i| i * 200).collect()
}

impl RefsizeConfig {
    pub fn sizes(&self) -> Vec<usize> {
        self.sizes.clone().unwrap_or_else(default_reference_sizes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InpaintConfig {
    /// `1..=N` when absent.
    #[serde(default)]
    pub missing_counts: Option<Vec<usize>>,
    #[serde(default = "defaults::inpaint_repeats")]
    pub repeats: usize,
}

impl Default for InpaintConfig {
    fn default() -> Self {
        Self {
            missing_counts: None,
            repeats: defaults::inpaint_repeats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "defaults::noise_std")]
    pub std: f64,
    #[serde(default = "defaults::noise_repeats")]
    pub repeats: usize,
    /// Test-set row used as the repeated condition.
    #[serde(default)]
    pub condition_row: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            std: defaults::noise_std(),
            repeats: defaults::noise_repeats(),
            condition_row: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefsetMode {
    /// Non-overlapping slices of one shuffle of the reference set.
    #[default]
    Disjoint,
    /// Independent subsamples, one seed per set.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefsetsConfig {
    #[serde(default = "defaults::sets")]
    pub sets: usize,
    /// Rows per set; an equal share of the reference set when absent.
    #[serde(default)]
    pub size: Option<usize>,
    #[serde(default)]
    pub mode: RefsetMode,
    /// Per-set seeds for independent mode; `seed + s` when absent.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
}

impl Default for RefsetsConfig {
    fn default() -> Self {
        Self {
            sets: defaults::sets(),
            size: None,
            mode: RefsetMode::Disjoint,
            seeds: None,
        }
    }
}

/// Command-line overrides applied on top of a loaded file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_error(e.to_string()))
    }

    /// Parse, resolve relative paths against the file's directory, validate.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset {
            DatasetConfig::Synthetic(_) => {}
            DatasetConfig::Tabular(t) => join(&mut t.path),
            DatasetConfig::Airfoil(a) => {
                join(&mut a.directory);
                join(&mut a.performance_csv);
            }
        }
        join(&mut self.output_dir);
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(dir) = &overrides.output_dir {
            self.output_dir = dir.clone();
        }
        if let Some(backend) = overrides.backend {
            self.regressor.backend = backend;
        }
        if let Some(endpoint) = &overrides.endpoint {
            self.regressor.endpoint = Some(endpoint.clone());
        }
    }

    /// Static checks; runs before any data is touched.
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(config_error("workers must be at least 1"));
        }
        self.regressor.spec()?;
        if let Some(r) = &self.evaluator.regressor {
            r.spec()?;
        }
        let f = self.split.reference_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(config_error(format!("split.reference_fraction {f} outside (0, 1)")));
        }
        match &self.dataset {
            DatasetConfig::Synthetic(s) => {
                super::synthetic::SyntheticProblem::new(s.problem, s.dimension).map_err(config_error)?;
                if s.rows < 2 {
                    return Err(config_error("synthetic dataset needs at least 2 rows"));
                }
            }
            DatasetConfig::Tabular(t) => {
                if !t.path.is_file() {
                    return Err(config_error(format!("dataset file {} not found", t.path.display())));
                }
            }
            DatasetConfig::Airfoil(a) => {
                if !a.directory.is_dir() {
                    return Err(config_error(format!(
                        "airfoil directory {} not found",
                        a.directory.display()
                    )));
                }
                if !a.performance_csv.is_file() {
                    return Err(config_error(format!(
                        "performance table {} not found",
                        a.performance_csv.display()
                    )));
                }
                if a.points_per_surface < 2 {
                    return Err(config_error("points_per_surface must be at least 2"));
                }
            }
        }
        if self.evaluator.kind == Some(EvaluatorKind::Analytic)
            && !matches!(self.dataset, DatasetConfig::Synthetic(_))
        {
            return Err(config_error("the analytic evaluator needs a synthetic dataset"));
        }
        if self.evaluator.surrogate_rows() < 2 {
            return Err(config_error("evaluator.surrogate_rows must be at least 2"));
        }
        let g = &self.generation;
        if !(g.noise_std >= 0.0 && g.noise_std.is_finite()) {
            return Err(config_error("generation.noise_std must be non-negative"));
        }
        if g.max_conditions == Some(0) {
            return Err(config_error("generation.max_conditions must be positive"));
        }
        let m = &self.metrics;
        if m.prd_clusters < 2 || m.prd_runs == 0 || m.prd_resolution.is_multiple_of(2) {
            return Err(config_error(
                "metrics: prd_clusters >= 2, prd_runs >= 1 and an odd prd_resolution are required",
            ));
        }
        if matches!(m.mmd_bandwidth, Some(s) if !(s > 0.0 && s.is_finite())) {
            return Err(config_error("metrics.mmd_bandwidth must be positive"));
        }
        let o = &self.order_study;
        if o.repeats < 2 {
            return Err(config_error(format!(
                "order_study.repeats must be at least 2, got {}",
                o.repeats
            )));
        }
        if matches!(&o.seeds, Some(s) if s.len() != o.repeats) {
            return Err(config_error("order_study.seeds must have one seed per repeat"));
        }
        if let Some(sizes) = &self.refsize.sizes {
            if sizes.is_empty() || sizes.contains(&0) {
                return Err(config_error("refsize.sizes must be non-empty and positive"));
            }
        }
        if self.refsize.conditions == 0 {
            return Err(config_error("refsize.conditions must be positive"));
        }
        if self.inpaint.repeats == 0 {
            return Err(config_error("inpaint.repeats must be positive"));
        }
        let n = &self.noise;
        if n.repeats < 2 {
            return Err(config_error(format!(
                "noise.repeats must be at least 2, got {}",
                n.repeats
            )));
        }
        if !(n.std >= 0.0 && n.std.is_finite()) {
            return Err(config_error("noise.std must be non-negative"));
        }
        let r = &self.refsets;
        if r.sets < 2 {
            return Err(config_error(format!("refsets.sets must be at least 2, got {}", r.sets)));
        }
        if r.size == Some(0) {
            return Err(config_error("refsets.size must be positive"));
        }
        if matches!(&r.seeds, Some(s) if s.len() != r.sets) {
            return Err(config_error("refsets.seeds must have one seed per set"));
        }
        Ok(())
    }

    pub fn regressor_spec(&self) -> Result<RegressorSpec> {
        self.regressor.spec()
    }

    pub fn split_seed(&self) -> u64 {
        self.split.seed.unwrap_or(self.seed)
    }

    /// Order policy for one generation run.
    pub fn order_policy(&self, parameter_names: &[String], seed: u64) -> Result<OrderPolicy> {
        if let Some(names) = &self.generation.explicit_order {
            let indices = names
                .iter()
                .map(|n| {
                    parameter_names
                        .iter()
                        .position(|p| p == n)
                        .ok_or_else(|| config_error(format!("unknown parameter `{n}` in explicit_order")))
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(OrderPolicy::Explicit(indices));
        }
        Ok(match self.generation.order {
            OrderKind::Default => OrderPolicy::Default,
            OrderKind::Random => OrderPolicy::Random { seed },
        })
    }

    /// SHA-256 of the canonical serialization, lowercase hex. The output
    /// directory and worker count do not affect results and are left out.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(&Self {
            output_dir: PathBuf::new(),
            workers: 1,
            ..self.clone()
        })
        .expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
