//! Design datasets: schemas, CSV loading, reference/test splitting and
//! column normalization.
//!
//! A [`Dataset`] is always stored in schema order: performance columns
//! first, then parameter columns. Every cell is finite.

mod airfoil;
mod normalize;

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use airfoil::{parse_selig, read_selig, resample_airfoil, AirfoilCoordinates};
pub use normalize::{ColumnStats, NormalizationMode, NormalizationState};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("validation error at row {row}, column `{column}`: {message}")]
    Validation {
        row: usize,
        column: String,
        message: String,
    },
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Column layout of a design table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSchema {
    performance_columns: Vec<String>,
    parameter_columns: Vec<String>,
    boolean_columns: Vec<String>,
}

impl DatasetSchema {
    pub fn new(
        performance_columns: impl IntoIterator<Item = impl Into<String>>,
        parameter_columns: impl IntoIterator<Item = impl Into<String>>,
        boolean_columns: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self> {
        let performance_columns: Vec<String> =
            performance_columns.into_iter().map(Into::into).collect();
        let parameter_columns: Vec<String> =
            parameter_columns.into_iter().map(Into::into).collect();
        let boolean_columns: Vec<String> = boolean_columns.into_iter().map(Into::into).collect();

        if performance_columns.is_empty() {
            return Err(DataError::Schema("no performance columns".into()));
        }
        if parameter_columns.is_empty() {
            return Err(DataError::Schema("no parameter columns".into()));
        }
        let mut seen = HashSet::new();
        for name in performance_columns.iter().chain(&parameter_columns) {
            if !seen.insert(name.as_str()) {
                return Err(DataError::Schema(format!("duplicate column `{name}`")));
            }
        }
        let mut seen_bool = HashSet::new();
        for name in &boolean_columns {
            if !parameter_columns.contains(name) {
                return Err(DataError::Schema(format!(
                    "boolean column `{name}` is not a parameter column"
                )));
            }
            if !seen_bool.insert(name.as_str()) {
                return Err(DataError::Schema(format!("duplicate boolean column `{name}`")));
            }
        }
        Ok(Self {
            performance_columns,
            parameter_columns,
            boolean_columns,
        })
    }

    pub fn performance_columns(&self) -> &[String] {
        &self.performance_columns
    }

    pub fn parameter_columns(&self) -> &[String] {
        &self.parameter_columns
    }

    pub fn boolean_columns(&self) -> &[String] {
        &self.boolean_columns
    }

    /// Number of performance indicators.
    pub fn n_performance(&self) -> usize {
        self.performance_columns.len()
    }

    /// Number of design parameters.
    pub fn n_parameters(&self) -> usize {
        self.parameter_columns.len()
    }

    pub fn width(&self) -> usize {
        self.n_performance() + self.n_parameters()
    }

    /// All column names in storage order.
    pub fn columns(&self) -> impl Iterator<Item = &str> {
        self.performance_columns
            .iter()
            .chain(&self.parameter_columns)
            .map(String::as_str)
    }

    /// Whether parameter `index` (0-based within the parameter block) is boolean.
    pub fn is_boolean_parameter(&self, index: usize) -> bool {
        self.parameter_columns
            .get(index)
            .is_some_and(|name| self.boolean_columns.contains(name))
    }

    pub fn parameter_index(&self, name: &str) -> Option<usize> {
        self.parameter_columns.iter().position(|c| c == name)
    }
}

/// A validated table of designs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: DatasetSchema,
    rows: Array2<f64>,
}

/// Something the loader noticed but did not reject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadWarning {
    DroppedColumn(String),
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub warnings: Vec<LoadWarning>,
}

impl Dataset {
    pub fn new(schema: DatasetSchema, rows: Array2<f64>) -> Result<Self> {
        if rows.ncols() != schema.width() {
            return Err(DataError::Argument(format!(
                "table has {} columns, schema expects {}",
                rows.ncols(),
                schema.width()
            )));
        }
        let names: Vec<&str> = schema.columns().collect();
        let n_perf = schema.n_performance();
        for (r, row) in rows.outer_iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(DataError::Validation {
                        row: r,
                        column: names[c].to_string(),
                        message: format!("non-finite value {v}"),
                    });
                }
                if c >= n_perf && schema.is_boolean_parameter(c - n_perf) && v != 0.0 && v != 1.0
                {
                    return Err(DataError::Validation {
                        row: r,
                        column: names[c].to_string(),
                        message: format!("boolean column holds {v}"),
                    });
                }
            }
        }
        Ok(Self { schema, rows })
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.rows.view()
    }

    pub fn row_count(&self) -> usize {
        self.rows.nrows()
    }

    pub fn performances(&self) -> ArrayView2<'_, f64> {
        self.rows
            .slice(ndarray::s![.., ..self.schema.n_performance()])
    }

    pub fn parameters(&self) -> ArrayView2<'_, f64> {
        self.rows
            .slice(ndarray::s![.., self.schema.n_performance()..])
    }

    pub fn into_rows(self) -> Array2<f64> {
        self.rows
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: self.rows.select(Axis(0), indices),
        }
    }

    /// Write as CSV with a header row, optionally preceded by `#` comment lines.
    pub fn write_csv<W: Write>(&self, writer: W, comments: &[String]) -> Result<()> {
        write_table(
            writer,
            comments,
            &self.schema.columns().collect::<Vec<_>>(),
            self.rows.view(),
        )
    }
}

/// Write a numeric table in the crate's CSV dialect.
pub fn write_table<W: Write>(
    mut writer: W,
    comments: &[String],
    header: &[&str],
    rows: ArrayView2<'_, f64>,
) -> Result<()> {
    for line in comments {
        writeln!(writer, "# {line}")?;
    }
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(header)?;
    for row in rows.outer_iter() {
        out.write_record(row.iter().map(|v| format_value(*v)))?;
    }
    out.flush()?;
    Ok(())
}

/// Shortest round-tripping decimal form of a float.
pub fn format_value(v: f64) -> String {
    format!("{v}")
}

/// Load a CSV design table, reordering columns into schema order.
pub fn load_tabular(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Loaded> {
    let mut text = String::new();
    File::open(path.as_ref())?.read_to_string(&mut text)?;
    parse_tabular(&text, schema)
}

/// Parse CSV text; `#` lines are comments.
pub fn parse_tabular(text: &str, schema: &DatasetSchema) -> Result<Loaded> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let mut positions = Vec::with_capacity(schema.width());
    for name in schema.columns() {
        let pos = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
        positions.push(pos);
    }
    let warnings: Vec<LoadWarning> = header
        .iter()
        .filter(|h| !schema.columns().any(|c| c == h.as_str()))
        .map(|h| {
            log::warn!("dropping column `{h}` not named by the schema");
            LoadWarning::DroppedColumn(h.clone())
        })
        .collect();

    let names: Vec<&str> = schema.columns().collect();
    let mut values = Vec::new();
    let mut n_rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        for (c, &pos) in positions.iter().enumerate() {
            let cell = record.get(pos).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| DataError::Parse {
                row: r,
                column: names[c].to_string(),
                message: format!("`{cell}` is not a number"),
            })?;
            values.push(v);
        }
        n_rows += 1;
    }
    let rows = Array2::from_shape_vec((n_rows, schema.width()), values)
        .expect("row-major buffer matches shape");
    Ok(Loaded {
        dataset: Dataset::new(schema.clone(), rows)?,
        warnings,
    })
}

/// Row count assigned to the reference side of a split.
pub fn reference_count(row_count: usize, reference_fraction: f64) -> usize {
    let n = (reference_fraction * row_count as f64).round() as usize;
    n.clamp(1, row_count.saturating_sub(1).max(1))
}

/// Seeded random partition into (reference, test). Rows keep their
/// original relative order on each side.
pub fn split_reference_test(
    dataset: &Dataset,
    reference_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(reference_fraction > 0.0 && reference_fraction < 1.0) {
        return Err(DataError::Argument(format!(
            "reference fraction {reference_fraction} outside (0, 1)"
        )));
    }
    let n = dataset.row_count();
    if n < 2 {
        return Err(DataError::Argument(format!(
            "need at least 2 rows to split, got {n}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_ref = reference_count(n, reference_fraction);
    let (reference, test) = indices.split_at_mut(n_ref);
    reference.sort_unstable();
    test.sort_unstable();
    Ok((dataset.select_rows(reference), dataset.select_rows(test)))
}

/// Sample `count` distinct rows without replacement.
pub fn subsample(dataset: &Dataset, count: usize, seed: u64) -> Result<Dataset> {
    if count > dataset.row_count() {
        return Err(DataError::Argument(format!(
            "cannot draw {count} rows from {}",
            dataset.row_count()
        )));
    }
    let mut indices: Vec<usize> = (0..dataset.row_count()).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    indices.truncate(count);
    indices.sort_unstable();
    Ok(dataset.select_rows(&indices))
}

/// Column-wise normalization of a whole dataset.
pub fn normalize(dataset: &Dataset, mode: NormalizationMode) -> (Dataset, NormalizationState) {
    let state = NormalizationState::fit(dataset, mode);
    let rows = state.normalize_rows(dataset.rows());
    (
        Dataset {
            schema: dataset.schema.clone(),
            rows,
        },
        state,
    )
}

pub fn denormalize(dataset: &Dataset, state: &NormalizationState) -> Dataset {
    Dataset {
        schema: dataset.schema.clone(),
        rows: state.denormalize_rows(dataset.rows()),
    }
}
