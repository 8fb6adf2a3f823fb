//! Oracles shared by integration tests.

use ndarray::Array2;

use seqdesign::data::{Dataset, NormalizationMode, NormalizationState};

/// Replays the sequential loop with a plain nearest-neighbour search over the
/// normalized reference, ties to the lowest index.
pub fn nn_replay(reference: &Dataset, conditions: &Array2<f64>, order: &[usize]) -> Array2<f64> {
    let state = NormalizationState::fit(reference, NormalizationMode::MinMax);
    let norm = state.normalize_rows(reference.rows());
    let n_perf = reference.schema().n_performance();
    let n_params = reference.schema().n_parameters();
    let cond = state.normalize_columns(conditions.view(), &(0..n_perf).collect::<Vec<_>>());
    let mut out = Array2::<f64>::zeros((conditions.nrows(), n_params));
    for q in 0..conditions.nrows() {
        let mut query: Vec<f64> = cond.row(q).to_vec();
        let mut cols: Vec<usize> = (0..n_perf).collect();
        for &j in order {
            let mut best = (f64::INFINITY, 0);
            for i in 0..norm.nrows() {
                let d: f64 = cols
                    .iter()
                    .zip(&query)
                    .map(|(&c, v)| (norm[[i, c]] - v).powi(2))
                    .sum();
                if d < best.0 {
                    best = (d, i);
                }
            }
            let v = norm[[best.1, n_perf + j]];
            out[[q, j]] = v;
            query.push(v);
            cols.push(n_perf + j);
        }
    }
    out
}
