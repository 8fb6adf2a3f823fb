//! Dataset sources and performance evaluation of generated designs.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};

use super::config::{AirfoilSource, DatasetConfig, EvaluatorKind, ExperimentConfig, TabularSource};
use super::synthetic::SyntheticProblem;
use super::{ExperimentError, Result};
use crate::data::{
    self, read_selig, resample_airfoil, DataError, Dataset, DatasetSchema, NormalizationMode,
    NormalizationState,
};
use crate::metrics::{mape, r_squared};
use crate::regressor::{self, FittedRegressor, RegressorSpec};

/// The full dataset named by a config, plus its closed form when synthetic.
pub fn load_dataset(config: &ExperimentConfig) -> Result<(Dataset, Option<SyntheticProblem>)> {
    match &config.dataset {
        DatasetConfig::Synthetic(s) => {
            let problem =
                SyntheticProblem::new(s.problem, s.dimension).map_err(ExperimentError::Config)?;
            Ok((problem.sample(s.rows, s.seed.unwrap_or(config.seed)), Some(problem)))
        }
        DatasetConfig::Tabular(t) => Ok((load_tabular_source(t)?, None)),
        DatasetConfig::Airfoil(a) => Ok((load_airfoil_source(a)?, None)),
    }
}

fn load_tabular_source(t: &TabularSource) -> Result<Dataset> {
    let schema = DatasetSchema::new(&t.performance, &t.parameters, &t.boolean)?;
    let loaded = data::load_tabular(&t.path, &schema).map_err(|e| ExperimentError::Data {
        context: t.path.display().to_string(),
        source: e,
    })?;
    Ok(loaded.dataset)
}

/// Parameter names of a flattened airfoil: `(x, y)` per station, upper
/// surface then lower.
pub fn airfoil_parameter_names(points_per_surface: usize) -> Vec<String> {
    ["u", "l"]
        .iter()
        .flat_map(|s| {
            (0..points_per_surface).flat_map(move |k| [format!("{s}{k}_x"), format!("{s}{k}_y")])
        })
        .collect()
}

fn load_airfoil_source(a: &AirfoilSource) -> Result<Dataset> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |e: std::io::Error| ExperimentError::Data {
            context: path,
            source: DataError::Io(e),
        }
    };
    let mut files: Vec<_> = std::fs::read_dir(&a.directory)
        .map_err(io(&a.directory))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("dat")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(ExperimentError::Argument(format!(
            "no .dat files in {}",
            a.directory.display()
        )));
    }

    let text = std::fs::read_to_string(&a.performance_csv).map_err(io(&a.performance_csv))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let perf_err = |e: DataError| ExperimentError::Data {
        context: a.performance_csv.display().to_string(),
        source: e,
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| perf_err(e.into()))?
        .iter()
        .map(str::to_string)
        .collect();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| perf_err(DataError::MissingColumn(name.to_string())))
    };
    let name_col = column("name")?;
    let perf_cols = a.performance.iter().map(|p| column(p)).collect::<Result<Vec<_>>>()?;
    let mut performances: HashMap<String, Vec<f64>> = HashMap::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| perf_err(e.into()))?;
        let values = perf_cols
            .iter()
            .zip(&a.performance)
            .map(|(&c, name)| {
                let cell = record.get(c).unwrap_or("");
                cell.parse::<f64>().map_err(|_| {
                    perf_err(DataError::Parse {
                        row: r,
                        column: name.clone(),
                        message: format!("`{cell}` is not a number"),
                    })
                })
            })
            .collect::<Result<Vec<_>>>()?;
        performances.insert(record.get(name_col).unwrap_or("").to_string(), values);
    }

    let width = a.performance.len() + 4 * a.points_per_surface;
    let mut rows = Vec::with_capacity(files.len() * width);
    for file in &files {
        let stem = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let perf = performances.get(&stem).ok_or_else(|| {
            ExperimentError::Argument(format!(
                "airfoil `{stem}` has no row in {}",
                a.performance_csv.display()
            ))
        })?;
        let context = file.display().to_string();
        let foil = read_selig(file).map_err(|e| ExperimentError::Data {
            context: context.clone(),
            source: e,
        })?;
        let shape = resample_airfoil(&foil, a.points_per_surface)
            .map_err(|e| ExperimentError::Data { context, source: e })?;
        rows.extend_from_slice(perf);
        rows.extend(shape);
    }
    let schema = DatasetSchema::new(
        &a.performance,
        airfoil_parameter_names(a.points_per_surface),
        Vec::<String>::new(),
    )?;
    let table = Array2::from_shape_vec((files.len(), width), rows).expect("fixed row width");
    Ok(Dataset::new(schema, table)?)
}

/// Fit quality of a surrogate on held-out designs.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateQuality {
    pub indicator: String,
    pub r_squared: Option<f64>,
    pub mape: Option<f64>,
}

/// One regressor per performance indicator, mapping designs to performances.
#[derive(Debug, Clone)]
pub struct Surrogate {
    state: NormalizationState,
    n_performance: usize,
    models: Vec<FittedRegressor>,
    quality: Vec<SurrogateQuality>,
}

impl Surrogate {
    /// Fit on `train`, then score on `holdout`.
    pub fn fit(spec: &RegressorSpec, train: &Dataset, holdout: &Dataset) -> Result<Self> {
        let state = NormalizationState::fit(train, NormalizationMode::MinMax);
        let norm = state.normalize_rows(train.rows());
        let n_performance = train.schema().n_performance();
        let x = norm.slice(ndarray::s![.., n_performance..]);
        let models = (0..n_performance)
            .map(|k| regressor::fit(spec, x, norm.column(k)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut surrogate = Self {
            state,
            n_performance,
            models,
            quality: Vec::new(),
        };
        let predicted = surrogate.predict(holdout.parameters())?;
        surrogate.quality = train
            .schema()
            .performance_columns()
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let truth = holdout.performances().column(k).to_vec();
                let pred = predicted.column(k).to_vec();
                SurrogateQuality {
                    indicator: name.clone(),
                    r_squared: r_squared(&truth, &pred).ok(),
                    mape: mape(&truth, &pred).ok().map(|m| m.value),
                }
            })
            .collect();
        Ok(surrogate)
    }

    pub fn quality(&self) -> &[SurrogateQuality] {
        &self.quality
    }

    pub fn predict(&self, designs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let n_params = designs.ncols();
        let param_cols: Vec<usize> = (self.n_performance..self.n_performance + n_params).collect();
        let x = self.state.normalize_columns(designs, &param_cols);
        let mut out = Array2::zeros((designs.nrows(), self.n_performance));
        for (k, model) in self.models.iter().enumerate() {
            let means = model.predict_mean(x.view())?;
            out.column_mut(k).assign(&ndarray::Array1::from(means));
        }
        let perf_cols: Vec<usize> = (0..self.n_performance).collect();
        Ok(self.state.denormalize_columns(out.view(), &perf_cols))
    }
}

/// Maps generated designs to achieved performances.
#[derive(Debug, Clone)]
pub enum Evaluator {
    Analytic(SyntheticProblem),
    Surrogate(Box<Surrogate>),
}

impl Evaluator {
    /// Analytic when the dataset has a closed form (unless a surrogate is
    /// requested); otherwise a surrogate fitted on up to `surrogate_rows`
    /// reference pairs and scored on the test set.
    pub fn prepare(
        config: &ExperimentConfig,
        problem: Option<SyntheticProblem>,
        reference: &Dataset,
        test: &Dataset,
    ) -> Result<Self> {
        let kind = config.evaluator.kind.unwrap_or(if problem.is_some() {
            EvaluatorKind::Analytic
        } else {
            EvaluatorKind::Surrogate
        });
        match (kind, problem) {
            (EvaluatorKind::Analytic, Some(p)) => Ok(Self::Analytic(p)),
            (EvaluatorKind::Analytic, None) => Err(ExperimentError::Config(
                "the analytic evaluator needs a synthetic dataset".into(),
            )),
            (EvaluatorKind::Surrogate, _) => {
                let spec = match &config.evaluator.regressor {
                    Some(r) => r.spec()?,
                    None => config.regressor_spec()?,
                };
                let rows = config
                    .evaluator
                    .surrogate_rows()
                    .min(reference.row_count())
                    .min(spec.capacity);
                let train = data::subsample(reference, rows, config.seed)?;
                Ok(Self::Surrogate(Box::new(Surrogate::fit(&spec, &train, test)?)))
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Analytic(_) => "analytic",
            Self::Surrogate(_) => "surrogate",
        }
    }

    pub fn evaluate(&self, designs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            Self::Analytic(p) => Ok(p.evaluate_rows(designs)),
            Self::Surrogate(s) => s.predict(designs),
        }
    }

    pub fn surrogate_quality(&self) -> &[SurrogateQuality] {
        match self {
            Self::Analytic(_) => &[],
            Self::Surrogate(s) => s.quality(),
        }
    }
}

/// Stack rows of two matrices side by side.
pub(crate) fn hstack(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[a, b]).expect("equal row counts")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::synthetic::ProblemKind;

    #[test]
    fn surrogate_recovers_smooth_map() {
        let p = SyntheticProblem::new(ProblemKind::LinearSum, 2).unwrap();
        let train = p.sample(800, 1);
        let holdout = p.sample(100, 2);
        let s = Surrogate::fit(&RegressorSpec::kernel_with_bandwidth(0.05), &train, &holdout).unwrap();
        let q = &s.quality()[0];
        assert!(q.r_squared.unwrap() > 0.95, "{q:?}");
        assert!(q.mape.unwrap() < 3.0, "{q:?}");
    }

    #[test]
    fn knn_surrogate_memorizes_training_designs() {
        let p = SyntheticProblem::new(ProblemKind::QuadraticBowl, 3).unwrap();
        let train = p.sample(50, 1);
        let s = Surrogate::fit(&RegressorSpec::knn(1), &train, &train).unwrap();
        let pred = s.predict(train.parameters()).unwrap();
        for (a, b) in pred.iter().zip(train.performances().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(s.quality()[0].r_squared.unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn airfoil_names() {
        let n = airfoil_parameter_names(2);
        assert_eq!(n, ["u0_x", "u0_y", "u1_x", "u1_y", "l0_x", "l0_y", "l1_x", "l1_y"]);
    }
}
