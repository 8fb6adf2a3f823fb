use ndarray::{Array2, ArrayView2, Axis};

use super::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalizationMode {
    #[default]
    MinMax,
    ZScore,
    None,
}

/// Per-column affine transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColumnStats {
    MinMax { min: f64, max: f64 },
    ZScore { mean: f64, std: f64 },
    Identity,
}

impl ColumnStats {
    /// Degenerate columns (zero range or zero spread) map to 0.
    pub fn normalize(&self, v: f64) -> f64 {
        match *self {
            ColumnStats::MinMax { min, max } => {
                if max > min {
                    (v - min) / (max - min)
                } else {
                    0.0
                }
            }
            ColumnStats::ZScore { mean, std } => {
                if std > 0.0 {
                    (v - mean) / std
                } else {
                    0.0
                }
            }
            ColumnStats::Identity => v,
        }
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        match *self {
            ColumnStats::MinMax { min, max } => {
                if max > min {
                    v * (max - min) + min
                } else {
                    min
                }
            }
            ColumnStats::ZScore { mean, std } => {
                if std > 0.0 {
                    v * std + mean
                } else {
                    mean
                }
            }
            ColumnStats::Identity => v,
        }
    }
}

/// Column statistics fitted on one dataset (normally the reference set) and
/// reused for conditions, queries and generated outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationState {
    mode: NormalizationMode,
    columns: Vec<ColumnStats>,
}

impl NormalizationState {
    /// Boolean parameter columns are always passed through unchanged.
    pub fn fit(dataset: &Dataset, mode: NormalizationMode) -> Self {
        let schema = dataset.schema();
        let n_perf = schema.n_performance();
        let columns = dataset
            .rows()
            .axis_iter(Axis(1))
            .enumerate()
            .map(|(c, col)| {
                let boolean = c >= n_perf && schema.is_boolean_parameter(c - n_perf);
                if boolean || col.is_empty() {
                    return ColumnStats::Identity;
                }
                match mode {
                    NormalizationMode::None => ColumnStats::Identity,
                    NormalizationMode::MinMax => {
                        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        ColumnStats::MinMax { min, max }
                    }
                    NormalizationMode::ZScore => {
                        let n = col.len() as f64;
                        let mean = col.sum() / n;
                        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                        ColumnStats::ZScore {
                            mean,
                            std: var.sqrt(),
                        }
                    }
                }
            })
            .collect();
        Self { mode, columns }
    }

    pub fn mode(&self) -> NormalizationMode {
        self.mode
    }

    pub fn columns(&self) -> &[ColumnStats] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &ColumnStats {
        &self.columns[index]
    }

    pub fn normalize_rows(&self, rows: ArrayView2<'_, f64>) -> Array2<f64> {
        self.map_columns(rows, &(0..self.columns.len()).collect::<Vec<_>>(), false)
    }

    pub fn denormalize_rows(&self, rows: ArrayView2<'_, f64>) -> Array2<f64> {
        self.map_columns(rows, &(0..self.columns.len()).collect::<Vec<_>>(), true)
    }

    /// Normalize a matrix whose columns correspond to the given dataset
    /// column indices.
    pub fn normalize_columns(&self, rows: ArrayView2<'_, f64>, columns: &[usize]) -> Array2<f64> {
        self.map_columns(rows, columns, false)
    }

    pub fn denormalize_columns(
        &self,
        rows: ArrayView2<'_, f64>,
        columns: &[usize],
    ) -> Array2<f64> {
        self.map_columns(rows, columns, true)
    }

    fn map_columns(&self, rows: ArrayView2<'_, f64>, columns: &[usize], inverse: bool) -> Array2<f64> {
        assert_eq!(rows.ncols(), columns.len(), "column map width mismatch");
        let mut out = rows.to_owned();
        for (j, &c) in columns.iter().enumerate() {
            let stats = self.columns[c];
            out.column_mut(j).mapv_inplace(|v| {
                if inverse {
                    stats.denormalize(v)
                } else {
                    stats.normalize(v)
                }
            });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{denormalize, normalize, DatasetSchema};
    use ndarray::array;
    use proptest::prelude::*;

    fn ds(rows: Array2<f64>) -> Dataset {
        let schema = DatasetSchema::new(["a"], ["b", "c"], Vec::<String>::new()).unwrap();
        Dataset::new(schema, rows).unwrap()
    }

    #[test]
    fn min_max_endpoints() {
        let d = ds(array![[0.0, 3.0, 1.0], [5.0, 3.0, 0.0], [10.0, 3.0, 1.0]]);
        let (n, state) = normalize(&d, NormalizationMode::MinMax);
        assert_eq!(n.rows().column(0).to_vec(), vec![0.0, 0.5, 1.0]);
        // constant column
        assert_eq!(n.rows().column(1).to_vec(), vec![0.0, 0.0, 0.0]);
        let back = denormalize(&n, &state);
        assert_eq!(back.rows().column(1).to_vec(), vec![3.0, 3.0, 3.0]);
    }

    #[test]
    fn boolean_columns_pass_through() {
        let schema = DatasetSchema::new(["a"], ["g", "c"], ["g"]).unwrap();
        let d = Dataset::new(schema, array![[0.0, 1.0, 4.0], [2.0, 0.0, 8.0]]).unwrap();
        for mode in [NormalizationMode::MinMax, NormalizationMode::ZScore] {
            let (n, state) = normalize(&d, mode);
            assert_eq!(n.rows().column(1), d.rows().column(1));
            assert_eq!(*state.column(1), ColumnStats::Identity);
        }
    }

    #[test]
    fn zscore_degenerate_column() {
        let d = ds(array![[1.0, 2.0, 7.0], [3.0, 2.0, 9.0]]);
        let (n, state) = normalize(&d, NormalizationMode::ZScore);
        assert_eq!(n.rows().column(0).to_vec(), vec![-1.0, 1.0]);
        assert_eq!(n.rows().column(1).to_vec(), vec![0.0, 0.0]);
        assert_eq!(denormalize(&n, &state), d);
    }

    proptest! {
        #[test]
        fn round_trip_within_1e_12(
            cells in proptest::collection::vec(-1.0e3f64..1.0e3, 15),
            zscore in any::<bool>(),
        ) {
            let d = ds(Array2::from_shape_vec((5, 3), cells).unwrap());
            let mode = if zscore { NormalizationMode::ZScore } else { NormalizationMode::MinMax };
            let (n, state) = normalize(&d, mode);
            let back = denormalize(&n, &state);
            for (a, b) in back.rows().iter().zip(d.rows().iter()) {
                prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
        }
    }
}
