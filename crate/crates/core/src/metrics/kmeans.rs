use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::regressor::squared_distance;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centers: Array2<f64>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

/// Nearest center; ties go to the lower center index.
fn nearest(point: ArrayView1<'_, f64>, centers: &Array2<f64>) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (c, center) in centers.outer_iter().enumerate() {
        let d = squared_distance(point, center);
        if d < best.0 {
            best = (d, c);
        }
    }
    best.1
}

/// k-means++ seeding. When every remaining point coincides with a chosen
/// center, the lowest unchosen index is taken so `k` centers always exist.
fn seed_centers(points: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points
        .outer_iter()
        .map(|p| squared_distance(p, points.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    acc += w;
                    if target < acc {
                        break;
                    }
                }
            }
            pick.expect("positive total has a positive weight")
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        let c = points.row(next);
        for (i, p) in points.outer_iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(p, c));
        }
    }
    chosen
}

/// Seeded Lloyd's k-means with k-means++ initialization. Empty clusters keep
/// their previous center.
pub fn kmeans(points: ArrayView2<'_, f64>, k: usize, seed: u64, max_iter: usize) -> KMeansResult {
    assert!(k >= 1 && k <= points.nrows(), "k must be in 1..=n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = seed_centers(points, k, &mut rng);
    let mut centers = points.select(ndarray::Axis(0), &init);
    let rows: Vec<ArrayView1<'_, f64>> = points.outer_iter().collect();
    let mut assignments: Vec<usize> = rows.par_iter().map(|p| nearest(*p, &centers)).collect();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = Array2::<f64>::zeros(centers.raw_dim());
        let mut counts = vec![0usize; k];
        for (p, &a) in rows.iter().zip(&assignments) {
            let mut row = sums.row_mut(a);
            row += p;
            counts[a] += 1;
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let mean = &sums.row(c) / count as f64;
                centers.row_mut(c).assign(&mean);
            }
        }
        let next: Vec<usize> = rows.par_iter().map(|p| nearest(*p, &centers)).collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }
    KMeansResult {
        centers,
        assignments,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn separates_blobs() {
        let pts = array![[0.0], [0.1], [0.2], [10.0], [10.1], [10.2]];
        let r = kmeans(pts.view(), 2, 1, 100);
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[1], r.assignments[2]);
        assert_eq!(r.assignments[3], r.assignments[5]);
        assert_ne!(r.assignments[0], r.assignments[3]);
    }

    #[test]
    fn k_equal_n_gives_singletons() {
        let pts = array![[0.0, 1.0], [2.0, 1.0], [5.0, 5.0], [0.5, 0.5]];
        let r = kmeans(pts.view(), 4, 3, 100);
        let mut a = r.assignments.clone();
        a.sort_unstable();
        assert_eq!(a, vec![0, 1, 2, 3]);
    }

    #[test]
    fn duplicates_still_get_k_centers() {
        let pts = array![[1.0], [1.0], [1.0]];
        let r = kmeans(pts.view(), 3, 0, 10);
        assert_eq!(r.centers.nrows(), 3);
        assert!(r.assignments.iter().all(|&a| a == r.assignments[0]));
    }

    #[test]
    fn deterministic_per_seed() {
        let pts = Array2::from_shape_fn((50, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64);
        assert_eq!(kmeans(pts.view(), 5, 9, 100), kmeans(pts.view(), 5, 9, 100));
    }
}
