//! Maximum mean discrepancy with a Gaussian kernel
//! `k(x, y) = exp(-‖x - y‖² / (2σ²))`.

use ndarray::{concatenate, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use super::{MetricsError, Result};
use crate::regressor::{median_pairwise_distance, squared_distance};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Estimator {
    /// Within-set sums exclude the diagonal; may be negative.
    #[default]
    Unbiased,
    /// V-statistic including the diagonal; never negative.
    Biased,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MmdConfig {
    /// `None` selects the median pairwise distance of the pooled samples.
    pub bandwidth: Option<f64>,
    pub estimator: Estimator,
}

impl MmdConfig {
    pub fn with_bandwidth(sigma: f64) -> Self {
        Self {
            bandwidth: Some(sigma),
            ..Self::default()
        }
    }
}

fn kernel(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, gamma: f64) -> f64 {
    (-squared_distance(a, b) * gamma).exp()
}

/// `Σ_i Σ_j k(a_i, b_j)`, skipping `i == j` when `skip_diagonal`. Row sums are
/// computed in parallel and added in index order so results are reproducible.
fn kernel_sum(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, gamma: f64, skip_diagonal: bool) -> f64 {
    let rows: Vec<f64> = (0..a.nrows())
        .into_par_iter()
        .map(|i| {
            let ai = a.row(i);
            b.outer_iter()
                .enumerate()
                .filter(|(j, _)| !(skip_diagonal && *j == i))
                .map(|(_, bj)| kernel(ai, bj, gamma))
                .sum::<f64>()
        })
        .collect();
    rows.iter().sum()
}

/// Squared MMD between the rows of `x` and `y`.
pub fn mmd_squared(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, config: &MmdConfig) -> Result<f64> {
    if x.ncols() != y.ncols() {
        return Err(MetricsError::Argument(format!(
            "sample widths differ: {} vs {}",
            x.ncols(),
            y.ncols()
        )));
    }
    let (n, m) = (x.nrows(), y.nrows());
    let min_rows = match config.estimator {
        Estimator::Unbiased => 2,
        Estimator::Biased => 1,
    };
    if n < min_rows || m < min_rows {
        return Err(MetricsError::Argument(format!(
            "need at least {min_rows} samples per set, got {n} and {m}"
        )));
    }
    let sigma = match config.bandwidth {
        Some(s) if s.is_finite() && s > 0.0 => s,
        Some(s) => return Err(MetricsError::Argument(format!("bandwidth must be positive, got {s}"))),
        None => {
            let pooled = concatenate(Axis(0), &[x, y]).expect("equal widths");
            median_pairwise_distance(pooled.view()).unwrap_or(1.0)
        }
    };
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let (nf, mf) = (n as f64, m as f64);
    let cross = 2.0 * kernel_sum(x, y, gamma, false) / (nf * mf);
    let value = match config.estimator {
        Estimator::Unbiased => {
            kernel_sum(x, x, gamma, true) / (nf * (nf - 1.0))
                + kernel_sum(y, y, gamma, true) / (mf * (mf - 1.0))
                - cross
        }
        Estimator::Biased => {
            kernel_sum(x, x, gamma, false) / (nf * nf) + kernel_sum(y, y, gamma, false) / (mf * mf)
                - cross
        }
    };
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn brute(x: &Array2<f64>, y: &Array2<f64>, sigma: f64) -> f64 {
        let k = |a: &[f64], b: &[f64]| {
            let d: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
            (-d / (2.0 * sigma * sigma)).exp()
        };
        let xs: Vec<Vec<f64>> = x.outer_iter().map(|r| r.to_vec()).collect();
        let ys: Vec<Vec<f64>> = y.outer_iter().map(|r| r.to_vec()).collect();
        let (n, m) = (xs.len() as f64, ys.len() as f64);
        let mut sxx = 0.0;
        for i in 0..xs.len() {
            for j in 0..xs.len() {
                if i != j {
                    sxx += k(&xs[i], &xs[j]);
                }
            }
        }
        let mut syy = 0.0;
        for i in 0..ys.len() {
            for j in 0..ys.len() {
                if i != j {
                    syy += k(&ys[i], &ys[j]);
                }
            }
        }
        let mut sxy = 0.0;
        for a in &xs {
            for b in &ys {
                sxy += k(a, b);
            }
        }
        sxx / (n * (n - 1.0)) + syy / (m * (m - 1.0)) - 2.0 * sxy / (n * m)
    }

    #[test]
    fn hand_values() {
        let x = array![[0.0], [1.0]];
        let cfg = MmdConfig::with_bandwidth(1.0);
        let v = mmd_squared(x.view(), x.view(), &cfg).unwrap();
        let k01 = (-0.5f64).exp();
        assert!((v - (2.0 * k01 - 0.5 * (2.0 + 2.0 * k01))).abs() < 1e-15);
        assert!((v + 0.39347).abs() < 1e-5);

        let y = array![[10.0], [11.0]];
        let v = mmd_squared(x.view(), y.view(), &cfg).unwrap();
        assert!((v - 2.0 * k01).abs() < 1e-15);
        assert!((v - 1.21306).abs() < 1e-5);
    }

    #[test]
    fn biased_estimator_hand_value() {
        let x = array![[0.0], [1.0]];
        let cfg = MmdConfig {
            bandwidth: Some(1.0),
            estimator: Estimator::Biased,
        };
        assert!(mmd_squared(x.view(), x.view(), &cfg).unwrap().abs() < 1e-15);
        let y = array![[0.0]];
        // (2 + 2k)/4 + 1 - 2(1 + k)/2 = (1 - k)/2
        let k01 = (-0.5f64).exp();
        let v = mmd_squared(x.view(), y.view(), &cfg).unwrap();
        assert!((v - (1.0 - k01) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn argument_errors() {
        let one = array![[0.0]];
        let two = array![[0.0], [1.0]];
        let cfg = MmdConfig::default();
        assert!(mmd_squared(one.view(), two.view(), &cfg).is_err());
        assert!(mmd_squared(two.view(), array![[0.0, 1.0], [1.0, 1.0]].view(), &cfg).is_err());
        assert!(mmd_squared(two.view(), two.view(), &MmdConfig::with_bandwidth(0.0)).is_err());
    }

    #[test]
    fn median_bandwidth_default() {
        let x = array![[0.0], [1.0]];
        let y = array![[3.0], [4.0]];
        // pooled pairwise distances 1,1,2,3,3,4; upper median 3
        let auto = mmd_squared(x.view(), y.view(), &MmdConfig::default()).unwrap();
        let fixed = mmd_squared(x.view(), y.view(), &MmdConfig::with_bandwidth(3.0)).unwrap();
        assert_eq!(auto, fixed);
    }

    fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
        proptest::collection::vec(-3.0f64..3.0, rows * cols)
            .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
    }

    fn pair() -> impl Strategy<Value = (Array2<f64>, Array2<f64>, f64)> {
        (2usize..20, 2usize..20, 1usize..4, 0.2f64..3.0).prop_flat_map(|(n, m, d, s)| {
            (matrix(n, d), matrix(m, d), Just(s))
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force((x, y, s) in pair()) {
            let v = mmd_squared(x.view(), y.view(), &MmdConfig::with_bandwidth(s)).unwrap();
            prop_assert!((v - brute(&x, &y, s)).abs() < 1e-12);
        }

        #[test]
        fn symmetric((x, y, s) in pair()) {
            let cfg = MmdConfig::with_bandwidth(s);
            let a = mmd_squared(x.view(), y.view(), &cfg).unwrap();
            let b = mmd_squared(y.view(), x.view(), &cfg).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn self_discrepancy_non_positive((x, _y, s) in pair()) {
            let v = mmd_squared(x.view(), x.view(), &MmdConfig::with_bandwidth(s)).unwrap();
            prop_assert!(v <= 1e-12);
            let same = mmd_squared(x.view(), x.view(), &MmdConfig::with_bandwidth(s)).unwrap();
            prop_assert_eq!(v.to_bits(), same.to_bits());
        }
    }
}
