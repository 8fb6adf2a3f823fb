//! Precision and recall for distributions.
//!
//! Both sample sets are quantized onto a shared finite state space (k-means
//! clusters of the pooled samples). With reference histogram `P` and
//! generated histogram `Q`, each trade-off `λ > 0` gives
//!
//! ```text
//! α(λ) = Σ_ω min(λ P(ω), Q(ω))      (precision)
//! β(λ) = Σ_ω min(P(ω), Q(ω) / λ)    (recall)
//! ```
//!
//! evaluated on the equiangular grid `λ_i = tan(i / (m + 1) · π / 2)`,
//! `i = 1..=m`.

use std::f64::consts::FRAC_PI_2;

use ndarray::{concatenate, Array2, ArrayView2, Axis};

use super::{kmeans, MetricsError, Result};

/// Reference and generated masses over a shared state space.
///
/// Masses are stored unnormalized together with their totals so that
/// histograms built from counts are evaluated exactly at `λ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramPair {
    reference: Vec<f64>,
    generated: Vec<f64>,
    reference_total: f64,
    generated_total: f64,
    centers: Option<Array2<f64>>,
}

impl HistogramPair {
    pub fn from_probabilities(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.len() != q.len() || p.is_empty() {
            return Err(MetricsError::Argument(format!(
                "histograms have {} and {} states",
                p.len(),
                q.len()
            )));
        }
        for h in [&p, &q] {
            if h.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(MetricsError::Argument("negative or non-finite mass".into()));
            }
            let total: f64 = h.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(MetricsError::Argument(format!(
                    "histogram sums to {total}, not 1"
                )));
            }
        }
        Ok(Self {
            reference: p,
            generated: q,
            reference_total: 1.0,
            generated_total: 1.0,
            centers: None,
        })
    }

    pub fn from_counts(
        reference: &[usize],
        generated: &[usize],
        centers: Option<Array2<f64>>,
    ) -> Result<Self> {
        let rt: usize = reference.iter().sum();
        let gt: usize = generated.iter().sum();
        if reference.len() != generated.len() || rt == 0 || gt == 0 {
            return Err(MetricsError::Argument(
                "count histograms must share a state space and be non-empty".into(),
            ));
        }
        Ok(Self {
            reference: reference.iter().map(|&c| c as f64).collect(),
            generated: generated.iter().map(|&c| c as f64).collect(),
            reference_total: rt as f64,
            generated_total: gt as f64,
            centers,
        })
    }

    pub fn states(&self) -> usize {
        self.reference.len()
    }

    /// Reference distribution `P`.
    pub fn p(&self) -> Vec<f64> {
        self.reference.iter().map(|m| m / self.reference_total).collect()
    }

    /// Generated distribution `Q`.
    pub fn q(&self) -> Vec<f64> {
        self.generated.iter().map(|m| m / self.generated_total).collect()
    }

    pub fn centers(&self) -> Option<&Array2<f64>> {
        self.centers.as_ref()
    }

    /// `(α(λ), β(λ))`, computed over the common denominator `T_P · T_Q`.
    pub fn precision_recall(&self, lambda: f64) -> (f64, f64) {
        let (tp, tq) = (self.reference_total, self.generated_total);
        let mut alpha = 0.0;
        let mut beta = 0.0;
        for (a, b) in self.reference.iter().zip(&self.generated) {
            let p = a * tq;
            let q = b * tp;
            alpha += (lambda * p).min(q);
            beta += p.min(q / lambda);
        }
        let denom = tp * tq;
        ((alpha / denom).clamp(0.0, 1.0), (beta / denom).clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrdCurve {
    pub resolution: usize,
    pub lambdas: Vec<f64>,
    /// `(precision, recall)` per grid value.
    pub points: Vec<(f64, f64)>,
}

/// The equiangular grid; the middle value of an odd grid is exactly 1.
pub fn lambda_grid(m: usize) -> Vec<f64> {
    (1..=m)
        .map(|i| {
            if 2 * i == m + 1 {
                1.0
            } else {
                (i as f64 / (m + 1) as f64 * FRAC_PI_2).tan()
            }
        })
        .collect()
}

pub fn prd_curve(hist: &HistogramPair, m: usize) -> Result<PrdCurve> {
    if m == 0 || m.is_multiple_of(2) {
        return Err(MetricsError::Argument(format!(
            "angular resolution must be a positive odd number, got {m}"
        )));
    }
    let lambdas = lambda_grid(m);
    let points = lambdas.iter().map(|&l| hist.precision_recall(l)).collect();
    Ok(PrdCurve {
        resolution: m,
        lambdas,
        points,
    })
}

/// Cluster the pooled samples into `clusters` states and histogram each set.
pub fn build_state_space(
    reference: ArrayView2<'_, f64>,
    generated: ArrayView2<'_, f64>,
    clusters: usize,
    seed: u64,
) -> Result<HistogramPair> {
    build_state_space_with(reference, generated, clusters, seed, DEFAULT_MAX_ITER)
}

pub const DEFAULT_MAX_ITER: usize = 100;

fn build_state_space_with(
    reference: ArrayView2<'_, f64>,
    generated: ArrayView2<'_, f64>,
    clusters: usize,
    seed: u64,
    max_iter: usize,
) -> Result<HistogramPair> {
    if reference.nrows() == 0 || generated.nrows() == 0 {
        return Err(MetricsError::Argument("sample sets must be non-empty".into()));
    }
    if reference.ncols() != generated.ncols() {
        return Err(MetricsError::Argument(format!(
            "sample widths differ: {} vs {}",
            reference.ncols(),
            generated.ncols()
        )));
    }
    if clusters < 2 {
        return Err(MetricsError::Argument("need at least 2 clusters".into()));
    }
    let pooled = concatenate(Axis(0), &[reference, generated]).expect("equal widths");
    if clusters > pooled.nrows() {
        return Err(MetricsError::Argument(format!(
            "{clusters} clusters for {} pooled samples",
            pooled.nrows()
        )));
    }
    let result = kmeans(pooled.view(), clusters, seed, max_iter);
    let (ref_assign, gen_assign) = result.assignments.split_at(reference.nrows());
    let count = |assign: &[usize]| {
        let mut c = vec![0usize; clusters];
        for &a in assign {
            c[a] += 1;
        }
        c
    };
    HistogramPair::from_counts(&count(ref_assign), &count(gen_assign), Some(result.centers))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrdConfig {
    pub clusters: usize,
    pub resolution: usize,
    /// Independent clusterings averaged into the reported curve.
    pub runs: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for PrdConfig {
    fn default() -> Self {
        Self {
            clusters: 20,
            resolution: 1001,
            runs: 5,
            seed: 0,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrdSummary {
    pub runs: Vec<PrdCurve>,
    /// Pointwise mean of the per-run curves.
    pub average: PrdCurve,
}

/// PRD between sample sets, averaging over `runs` seeded clusterings
/// (seeds `seed`, `seed + 1`, ...). Cluster count is capped by the pooled
/// sample count.
pub fn prd_from_samples(
    reference: ArrayView2<'_, f64>,
    generated: ArrayView2<'_, f64>,
    config: &PrdConfig,
) -> Result<PrdSummary> {
    if config.runs == 0 {
        return Err(MetricsError::Argument("need at least one run".into()));
    }
    let clusters = config
        .clusters
        .min(reference.nrows() + generated.nrows());
    let runs: Vec<PrdCurve> = (0..config.runs)
        .map(|r| {
            let hist = build_state_space_with(
                reference,
                generated,
                clusters,
                config.seed.wrapping_add(r as u64),
                config.max_iter,
            )?;
            prd_curve(&hist, config.resolution)
        })
        .collect::<Result<_>>()?;
    let n = runs.len() as f64;
    let points = (0..config.resolution)
        .map(|i| {
            let (a, b) = runs
                .iter()
                .fold((0.0, 0.0), |acc, c| (acc.0 + c.points[i].0, acc.1 + c.points[i].1));
            (a / n, b / n)
        })
        .collect();
    let average = PrdCurve {
        resolution: config.resolution,
        lambdas: runs[0].lambdas.clone(),
        points,
    };
    Ok(PrdSummary { runs, average })
}
