//! End-to-end generator contracts on synthetic problems.

use ndarray::{Array2, Axis};
use proptest::prelude::*;

use seqdesign::data::{Dataset, NormalizationMode, NormalizationState};
use seqdesign::experiments::{ProblemKind, SyntheticProblem};
use seqdesign::generator::{generate, inpaint, known_values_from, GenerationError, GenerationTask, OrderPolicy};
use seqdesign::regressor::RegressorSpec;

mod common;
use common::nn_replay;

fn linear(dim: usize, rows: usize, seed: u64) -> Dataset {
    SyntheticProblem::new(ProblemKind::LinearSum, dim).unwrap().sample(rows, seed)
}

#[test]
fn knn_generation_matches_brute_force_replay() {
    let reference = linear(4, 120, 5);
    let conditions = linear(4, 40, 6).performances().to_owned();
    for order in [vec![0, 1, 2, 3], vec![3, 1, 0, 2]] {
        let task = GenerationTask::new(conditions.clone(), 4).with_order(OrderPolicy::Explicit(order.clone()));
        let got = generate(&reference, &RegressorSpec::knn(1), &task).unwrap();
        let want = nn_replay(&reference, &conditions, &order);
        assert_eq!(got.normalized, want);
        assert_eq!(got.order, order);
    }
}

#[test]
fn knn_memorizes_the_reference() {
    let reference = linear(5, 200, 9);
    let task = GenerationTask::new(reference.performances().to_owned(), 5);
    let got = generate(&reference, &RegressorSpec::knn(1), &task).unwrap();
    let state = NormalizationState::fit(&reference, NormalizationMode::MinMax);
    let norm = state.normalize_rows(reference.rows());
    let n_perf = reference.schema().n_performance();
    assert_eq!(got.normalized, norm.slice(ndarray::s![.., n_perf..]));
    for (a, b) in got.designs.iter().zip(reference.parameters().iter()) {
        assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn no_missing_parameters_returns_the_input() {
    let reference = linear(4, 100, 1);
    let test = linear(4, 30, 2);
    let mask = vec![true; 4];
    let task = GenerationTask::new(test.performances().to_owned(), 4)
        .with_known(mask.clone(), known_values_from(test.parameters(), &mask));
    let got = inpaint(&reference, &RegressorSpec::kernel(), &task).unwrap();
    assert_eq!(got.designs, test.parameters());
    assert_eq!(got.fits, 0);
}

#[test]
fn all_missing_inpainting_is_plain_generation() {
    let reference = linear(4, 100, 1);
    let conditions = linear(4, 30, 2).performances().to_owned();
    let plain = GenerationTask::new(conditions.clone(), 4).with_noise(0.01, 17);
    let masked = GenerationTask::new(conditions, 4)
        .with_known(vec![false; 4], Array2::zeros((30, 0)))
        .with_noise(0.01, 17);
    let a = generate(&reference, &RegressorSpec::kernel(), &plain).unwrap();
    let b = inpaint(&reference, &RegressorSpec::kernel(), &masked).unwrap();
    let bits = |m: &Array2<f64>| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.designs), bits(&b.designs));
}

#[test]
fn zero_noise_repeats_are_identical() {
    let reference = linear(3, 150, 4);
    let row = linear(3, 1, 8).performances().to_owned();
    let conditions = row.broadcast((50, 1)).unwrap().to_owned();
    let got = generate(&reference, &RegressorSpec::kernel(), &GenerationTask::new(conditions, 3)).unwrap();
    for r in got.designs.axis_iter(Axis(0)) {
        assert_eq!(r, got.designs.row(0));
    }
}

#[test]
fn capacity_is_enforced() {
    let reference = linear(2, 50, 1);
    let task = GenerationTask::new(reference.performances().to_owned(), 2);
    let err = generate(&reference, &RegressorSpec::kernel().with_capacity(49), &task).unwrap_err();
    assert!(matches!(err, GenerationError::Capacity { rows: 50, capacity: 49 }));
}

#[test]
fn hierarchical_gate_is_boolean() {
    let problem = SyntheticProblem::new(ProblemKind::Hierarchical, 5).unwrap();
    let reference = problem.sample(300, 1);
    let conditions = problem.sample(40, 2).performances().to_owned();
    let got = generate(&reference, &RegressorSpec::kernel(), &GenerationTask::new(conditions, 5)).unwrap();
    assert!(got.designs.column(0).iter().all(|&v| v == 0.0 || v == 1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn known_positions_never_change(seed in 0u64..1000, mask_bits in 0u32..32, noise in 0.0f64..0.05) {
        let reference = linear(5, 80, seed);
        let test = linear(5, 12, seed + 1);
        let mask: Vec<bool> = (0..5).map(|j| mask_bits & (1 << j) != 0).collect();
        let task = GenerationTask::new(test.performances().to_owned(), 5)
            .with_known(mask.clone(), known_values_from(test.parameters(), &mask))
            .with_noise(noise, seed);
        let got = inpaint(&reference, &RegressorSpec::kernel(), &task).unwrap();
        let params = test.parameters();
        for (j, &k) in mask.iter().enumerate() {
            if k {
                prop_assert_eq!(got.designs.column(j), params.column(j));
            }
        }
        prop_assert_eq!(got.fits, mask.iter().filter(|&&k| !k).count());
    }
}
