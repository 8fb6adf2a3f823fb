//! Client and remote backend against the bundled loopback server.

use std::time::Duration;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqdesign::bridge::{BridgeClient, BridgeError, FitPredictRequest, StubConfig, StubServer};
use seqdesign::experiments::{ProblemKind, SyntheticProblem};
use seqdesign::generator::{generate, GenerationTask};
use seqdesign::regressor::{self, RegressorError, RegressorSpec};

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn client(server: &StubServer) -> BridgeClient {
    BridgeClient::new(&server.url(), Duration::from_secs(30), 0)
}

#[test]
fn remote_means_match_local_kernel() {
    let server = StubServer::spawn().unwrap();
    let remote = RegressorSpec::remote(server.url());
    let local = RegressorSpec::kernel();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.random_range(1..40);
        let d = rng.random_range(1..5);
        let x = random_matrix(&mut rng, n, d);
        let y = random_matrix(&mut rng, n, 1).column(0).to_owned();
        let m = rng.random_range(1..10);
        let q = random_matrix(&mut rng, m, d);
        let a = regressor::fit(&remote, x.view(), y.view())
            .unwrap()
            .predict_mean(q.view())
            .unwrap();
        let b = regressor::fit(&local, x.view(), y.view())
            .unwrap()
            .predict_mean(q.view())
            .unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-9, "remote {u} vs local {v}");
        }
    }
}

#[test]
fn remote_distributions_are_valid() {
    let server = StubServer::spawn().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_matrix(&mut rng, 30, 2);
    let y = random_matrix(&mut rng, 30, 1).column(0).to_owned();
    let q = random_matrix(&mut rng, 5, 2);
    let fitted = regressor::fit(&RegressorSpec::remote(server.url()), x.view(), y.view()).unwrap();
    let dists = fitted.predict_distribution(q.view()).unwrap();
    assert_eq!(dists.len(), 5);
    for d in &dists {
        let total: f64 = d.probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-6);
    }
}

#[test]
fn averaging_stub_echoes_the_training_mean() {
    // a huge bandwidth gives every reference row the same weight
    let server = StubServer::spawn_with(StubConfig {
        spec: RegressorSpec::kernel_with_bandwidth(1e12),
        ..StubConfig::default()
    })
    .unwrap();
    let x = Array2::from_shape_fn((4, 1), |(i, _)| i as f64);
    let y = [1.0, 2.0, 4.0, 9.0];
    let q = Array2::from_shape_fn((3, 1), |(i, _)| i as f64 * 0.3);
    let req = FitPredictRequest::new(x.view(), &y, q.view(), false);
    let resp = client(&server).fit_predict(&req).unwrap();
    assert_eq!(resp.means, vec![4.0; 3]);
    assert_eq!(resp.request_id, req.request_id);
}

#[test]
fn over_capacity_is_rejected_on_both_sides() {
    let server = StubServer::spawn().unwrap();
    let x = Array2::<f64>::zeros((10_001, 1));
    let y = vec![0.0; 10_001];
    let q = Array2::<f64>::zeros((1, 1));
    let req = FitPredictRequest::new(x.view(), &y, q.view(), false);

    // client side: nothing reaches the server
    let err = client(&server).fit_predict(&req).unwrap_err();
    assert!(matches!(err, BridgeError::Capacity { rows: 10_001, capacity: 10_000 }));
    assert_eq!(server.served(), 0);

    // server side: a client configured above the cap gets HTTP 413
    let lenient = client(&server).with_max_train_rows(20_000);
    let err = lenient.fit_predict(&req).unwrap_err();
    assert!(matches!(err, BridgeError::Capacity { rows: 10_001, .. }), "{err:?}");

    // and through the regressor
    let err = regressor::fit(&RegressorSpec::remote(server.url()), x.view(), ndarray::ArrayView1::from(&y))
        .map(|_| ())
        .unwrap_err();
    assert!(matches!(err, RegressorError::Capacity { rows: 10_001, .. }));
}

#[test]
fn transient_failures_are_retried() {
    let server = StubServer::spawn_with(StubConfig {
        fail_first: 2,
        ..StubConfig::default()
    })
    .unwrap();
    let x = Array2::from_shape_fn((5, 1), |(i, _)| i as f64);
    let y = [0.0, 1.0, 2.0, 3.0, 4.0];
    let req = FitPredictRequest::new(x.view(), &y, x.view(), false);
    let err = client(&server).fit_predict(&req).unwrap_err();
    assert!(matches!(err, BridgeError::Remote { status: 503, .. }), "{err:?}");
    let retrying = BridgeClient::new(&server.url(), Duration::from_secs(30), 2);
    let resp = retrying.fit_predict(&req).unwrap();
    assert_eq!(resp.means.len(), 5);
    assert_eq!(server.served(), 1);
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let addr = {
        let server = StubServer::spawn().unwrap();
        server.url()
    };
    let c = BridgeClient::new(&addr, Duration::from_secs(2), 1);
    let x = Array2::<f64>::zeros((2, 1));
    let req = FitPredictRequest::new(x.view(), &[0.0, 1.0], x.view(), false);
    assert!(matches!(c.fit_predict(&req), Err(BridgeError::Transport(_))));
}

#[test]
fn health_reports_the_model() {
    let server = StubServer::spawn().unwrap();
    let h = client(&server).health().unwrap();
    assert_eq!(h.status, "ok");
    assert!(!h.model_info.is_empty());
}

#[test]
fn remote_generation_matches_local() {
    let server = StubServer::spawn().unwrap();
    let problem = SyntheticProblem::new(ProblemKind::QuadraticBowl, 3).unwrap();
    let reference = problem.sample(200, 1);
    let conditions = problem.sample(20, 2).performances().to_owned();
    let task = GenerationTask::new(conditions, 3);
    let remote = generate(&reference, &RegressorSpec::remote(server.url()), &task).unwrap();
    let local = generate(&reference, &RegressorSpec::kernel(), &task).unwrap();
    for (a, b) in remote.designs.iter().zip(local.designs.iter()) {
        assert!((a - b).abs() <= 1e-9);
    }
    assert_eq!(remote.fits, 3);
}
