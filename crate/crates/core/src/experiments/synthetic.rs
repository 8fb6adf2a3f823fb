//! Closed-form design problems used as desk-scale datasets.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    /// `P1 = Σ x_i`, `x_i ∈ [0.5, 1.5]`.
    LinearSum,
    /// `P1 = 1 + Σ x_i²`, `x_i ∈ [0, 1]`.
    QuadraticBowl,
    /// A 0/1 gate `x0` picks which half of the continuous parameters drives
    /// `P1`; `P2` is their mean. Continuous `x_i ∈ [0, 1]`.
    Hierarchical,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::LinearSum => "linear-sum",
            Self::QuadraticBowl => "quadratic-bowl",
            Self::Hierarchical => "hierarchical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticProblem {
    kind: ProblemKind,
    dimension: usize,
}

impl SyntheticProblem {
    pub fn new(kind: ProblemKind, dimension: usize) -> Result<Self, String> {
        let min = match kind {
            ProblemKind::Hierarchical => 3,
            _ => 1,
        };
        if dimension < min {
            return Err(format!(
                "{} needs at least {min} parameters, got {dimension}",
                kind.name()
            ));
        }
        Ok(Self { kind, dimension })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn n_performance(&self) -> usize {
        match self.kind {
            ProblemKind::Hierarchical => 2,
            _ => 1,
        }
    }

    pub fn schema(&self) -> DatasetSchema {
        let perf: Vec<String> = (1..=self.n_performance()).map(|i| format!("P{i}")).collect();
        let params: Vec<String> = (0..self.dimension).map(|i| format!("x{i}")).collect();
        let booleans: Vec<&str> = match self.kind {
            ProblemKind::Hierarchical => vec!["x0"],
            _ => vec![],
        };
        DatasetSchema::new(perf, params, booleans).expect("generated names are valid")
    }

    /// Sampling range of parameter `i`.
    pub fn range(&self, i: usize) -> (f64, f64) {
        match self.kind {
            ProblemKind::LinearSum => (0.5, 1.5),
            _ => {
                debug_assert!(i < self.dimension);
                (0.0, 1.0)
            }
        }
    }

    pub fn evaluate(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        match self.kind {
            ProblemKind::LinearSum => vec![x.sum()],
            ProblemKind::QuadraticBowl => vec![1.0 + x.iter().map(|v| v * v).sum::<f64>()],
            ProblemKind::Hierarchical => {
                let c = x.slice(ndarray::s![1..]);
                let half = (c.len() / 2).max(1);
                let p1 = if x[0] >= 0.5 {
                    c.iter().take(half).sum::<f64>()
                } else {
                    c.iter().skip(half).map(|v| v * v).sum::<f64>()
                };
                vec![1.0 + p1, 1.0 + c.mean().expect("non-empty")]
            }
        }
    }

    /// Performance rows for a matrix of designs.
    pub fn evaluate_rows(&self, designs: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((designs.nrows(), self.n_performance()));
        for (mut o, d) in out.outer_iter_mut().zip(designs.outer_iter()) {
            o.assign(&ArrayView1::from(&self.evaluate(d)));
        }
        out
    }

    /// `rows` designs drawn uniformly from the parameter ranges, with their
    /// exact performances.
    pub fn sample(&self, rows: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_perf = self.n_performance();
        let mut table = Array2::zeros((rows, n_perf + self.dimension));
        for mut row in table.outer_iter_mut() {
            for i in 0..self.dimension {
                row[n_perf + i] = if self.kind == ProblemKind::Hierarchical && i == 0 {
                    f64::from(u8::from(rng.random::<bool>()))
                } else {
                    let (lo, hi) = self.range(i);
                    rng.random_range(lo..hi)
                };
            }
            let perf = self.evaluate(row.slice(ndarray::s![n_perf..]));
            for (k, p) in perf.into_iter().enumerate() {
                row[k] = p;
            }
        }
        Dataset::new(self.schema(), table).expect("finite by construction")
    }
}
