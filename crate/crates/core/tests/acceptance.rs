//! Acceptance suite. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use approx::abs_diff_eq;
use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqdesign::data::{NormalizationMode, NormalizationState};
use seqdesign::experiments::{self, ExperimentConfig, ProblemKind, Study, StudyOutput, SyntheticProblem};
use seqdesign::generator::{generate, inpaint, known_values_from, GenerationTask};
use seqdesign::metrics::{mape, mmd_squared, prd_from_samples, HistogramPair, MmdConfig, PrdConfig};
use seqdesign::regressor::RegressorSpec;

mod common;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn bits(m: &Array2<f64>) -> Vec<u64> {
    m.iter().map(|v| v.to_bits()).collect()
}

fn memorization() -> Outcome {
    let started = Instant::now();
    let problem = SyntheticProblem::new(ProblemKind::LinearSum, 6).map_err(err)?;
    let reference = problem.sample(500, 2024);
    let mut perf: Vec<f64> = reference.performances().column(0).to_vec();
    perf.sort_by(f64::total_cmp);
    perf.dedup();
    ensure(perf.len() == 500, || "performances are not distinct".into())?;

    let conditions = reference.performances().to_owned();
    let result = generate(&reference, &RegressorSpec::knn(1), &GenerationTask::new(conditions.clone(), 6))
        .map_err(err)?;
    let state = NormalizationState::fit(&reference, NormalizationMode::MinMax);
    let norm = state.normalize_rows(reference.rows()).slice(s![.., 1..]).to_owned();
    let exact = result
        .normalized
        .outer_iter()
        .zip(norm.outer_iter())
        .filter(|(a, b)| a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()))
        .count();
    ensure(exact == 500, || format!("{exact}/500 bit-exact in normalized space"))?;
    let worst = result
        .designs
        .iter()
        .zip(reference.parameters().iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(worst <= 1e-9, || format!("raw deviation {worst:e}"))?;
    let replay = common::nn_replay(&reference, &conditions, &result.order);
    ensure(bits(&replay) == bits(&result.normalized), || "differs from nearest-neighbour replay".into())?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("500/500 bit-exact, max raw deviation {worst:e}, {:.2}s", elapsed.as_secs_f64()))
}

fn prd_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = Array2::from_shape_fn((1000, 3), |_| rng.random_range(0.0..1.0));
    let cfg = PrdConfig {
        resolution: 1001,
        ..PrdConfig::default()
    };
    let summary = prd_from_samples(x.view(), x.view(), &cfg).map_err(err)?;
    let mut worst = 0.0f64;
    for curve in summary.runs.iter().chain(std::iter::once(&summary.average)) {
        ensure(curve.points.len() == 1001, || "grid size".into())?;
        for (&l, &(p, r)) in curve.lambdas.iter().zip(&curve.points) {
            let (ep, er) = (l.min(1.0), (1.0 / l).min(1.0));
            ensure(abs_diff_eq!(p, ep, epsilon = 1e-12) && abs_diff_eq!(r, er, epsilon = 1e-12), || {
                format!("λ={l}: ({p}, {r}) vs ({ep}, {er})")
            })?;
            worst = worst.max((p - ep).abs()).max((r - er).abs());
        }
        ensure(curve.lambdas[500] == 1.0 && curve.points[500] == (1.0, 1.0), || {
            format!("middle point {:?} at λ={}", curve.points[500], curve.lambdas[500])
        })?;
    }

    let disjoint = HistogramPair::from_probabilities(vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.3, 0.7])
        .map_err(err)?;
    let curve = seqdesign::metrics::prd_curve(&disjoint, 1001).map_err(err)?;
    ensure(curve.points.iter().all(|&pt| pt == (0.0, 0.0)), || "disjoint histogram curve is not zero".into())?;

    let far = x.mapv(|v| v + 100.0);
    let separated = prd_from_samples(x.view(), far.view(), &cfg).map_err(err)?;
    ensure(
        separated.average.points.iter().all(|&pt| pt == (0.0, 0.0)),
        || "disjoint samples give a non-zero curve".into(),
    )?;
    Ok(format!("max deviation {worst:e}, (1,1) exact at λ=1, disjoint curves all (0,0)"))
}

fn mmd_brute(x: &Array2<f64>, y: &Array2<f64>, sigma: f64) -> f64 {
    let k = |a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>| {
        let d: f64 = a.iter().zip(b.iter()).map(|(p, q)| (p - q) * (p - q)).sum();
        (-d / (2.0 * sigma * sigma)).exp()
    };
    let (n, m) = (x.nrows(), y.nrows());
    let mut sxx = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sxx += k(x.row(i), x.row(j));
            }
        }
    }
    let mut syy = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                syy += k(y.row(i), y.row(j));
            }
        }
    }
    let mut sxy = 0.0;
    for i in 0..n {
        for j in 0..m {
            sxy += k(x.row(i), y.row(j));
        }
    }
    let (n, m) = (n as f64, m as f64);
    sxx / (n * (n - 1.0)) + syy / (m * (m - 1.0)) - 2.0 * sxy / (n * m)
}

fn mmd_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (n, m, d) = (rng.random_range(2..=50), rng.random_range(2..=50), rng.random_range(1..=6));
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
        let y = Array2::from_shape_fn((m, d), |_| rng.random_range(-2.0..2.0));
        let sigma = rng.random_range(0.2..3.0);
        let got = mmd_squared(x.view(), y.view(), &MmdConfig::with_bandwidth(sigma)).map_err(err)?;
        let want = mmd_brute(&x, &y, sigma);
        worst = worst.max((got - want).abs());
        ensure(abs_diff_eq!(got, want, epsilon = 1e-12), || format!("n={n} m={m}: {got} vs {want}"))?;
    }
    let pair = Array2::from_shape_vec((2, 1), vec![0.0, 1.0]).map_err(err)?;
    let hand = mmd_squared(pair.view(), pair.view(), &MmdConfig::with_bandwidth(1.0)).map_err(err)?;
    ensure(abs_diff_eq!(hand, -0.39347, epsilon = 1e-5), || format!("hand case {hand}"))?;
    let mut self_max = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n = rng.random_range(2..=50);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let v = mmd_squared(x.view(), x.view(), &MmdConfig::default()).map_err(err)?;
        self_max = self_max.max(v);
    }
    ensure(self_max <= 1e-12, || format!("MMD²(X, X) reached {self_max}"))?;
    Ok(format!("max oracle gap {worst:e}, hand case {hand:.5}, max MMD²(X,X) {self_max:e}"))
}

fn reference_size_trend() -> Outcome {
    let cfg = ExperimentConfig::from_toml(
        r#"
seed = 1
workers = 4
[dataset]
kind = "synthetic"
problem = "quadratic-bowl"
dimension = 2
rows = 2500
[regressor]
backend = "kernel"
bandwidth = 0.02
[refsize]
sizes = [100, 200, 400, 800, 1600]
conditions = 300
"#,
    )
    .map_err(err)?;
    let out = experiments::run(Study::ReferenceSizeSweep, &cfg).map_err(err)?;
    let table = out.table("refsize_sweep.csv").ok_or("missing table")?;
    let mape: Vec<f64> = table
        .column("mape_P1")
        .ok_or("missing column")?
        .iter()
        .map(|v| v.parse::<f64>().map_err(err))
        .collect::<Result<_, _>>()?;
    let trace = format!(
        "MAPE% by size: {}",
        [100, 200, 400, 800, 1600]
            .iter()
            .zip(&mape)
            .map(|(s, v)| format!("{s}:{v:.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    ensure(mape[4] < mape[0], || format!("no improvement; {trace}"))?;
    ensure(mape[4] < 10.0, || format!("MAPE at 1600 not below 10%; {trace}"))?;
    Ok(trace)
}

fn inpainting() -> Outcome {
    let problem = SyntheticProblem::new(ProblemKind::QuadraticBowl, 4).map_err(err)?;
    let reference = problem.sample(400, 5);
    let test = problem.sample(60, 6);
    let conditions = test.performances().to_owned();
    let spec = RegressorSpec::kernel();

    let all = vec![true; 4];
    let full = GenerationTask::new(conditions.clone(), 4).with_known(all.clone(), known_values_from(test.parameters(), &all));
    let echoed = inpaint(&reference, &spec, &full).map_err(err)?;
    ensure(echoed.designs == test.parameters(), || "0 missing changed the input".into())?;
    let achieved = problem.evaluate_rows(echoed.designs.view());
    let zero = mape(&conditions.column(0).to_vec(), &achieved.column(0).to_vec()).map_err(err)?;
    ensure(zero.value == 0.0, || format!("0 missing MAPE {}", zero.value))?;

    let plain = generate(&reference, &spec, &GenerationTask::new(conditions.clone(), 4).with_noise(1e-3, 42)).map_err(err)?;
    let masked = inpaint(
        &reference,
        &spec,
        &GenerationTask::new(conditions.clone(), 4)
            .with_known(vec![false; 4], Array2::zeros((60, 0)))
            .with_noise(1e-3, 42),
    )
    .map_err(err)?;
    ensure(bits(&plain.designs) == bits(&masked.designs), || "all-missing differs from generate".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..50 {
        let mask: Vec<bool> = (0..4).map(|_| rng.random_bool(0.5)).collect();
        let task = GenerationTask::new(conditions.clone(), 4)
            .with_known(mask.clone(), known_values_from(test.parameters(), &mask))
            .with_noise(0.01, trial);
        let got = inpaint(&reference, &spec, &task).map_err(err)?;
        for (j, _) in mask.iter().enumerate().filter(|(_, &k)| k) {
            ensure(got.designs.column(j) == test.parameters().column(j), || {
                format!("known parameter {j} changed in trial {trial}")
            })?;
        }
    }

    let started = Instant::now();
    let cfg = ExperimentConfig::from_toml(
        r#"
seed = 2
workers = 4
[dataset]
kind = "synthetic"
problem = "hierarchical"
dimension = 6
rows = 2000
[regressor]
backend = "kernel"
[generation]
max_conditions = 300
[inpaint]
repeats = 3
"#,
    )
    .map_err(err)?;
    let out = experiments::run(Study::InpaintingSweep, &cfg).map_err(err)?;
    let rows = out.table("inpaint_sweep.csv").ok_or("missing table")?.rows.len();
    let elapsed = started.elapsed();
    ensure(rows == 6, || format!("sweep produced {rows} rows"))?;
    ensure(elapsed < Duration::from_secs(300), || format!("sweep took {elapsed:?}"))?;
    Ok(format!(
        "contracts hold over 50 random masks; sweep of 6 counts in {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn noise_config(std: f64) -> Result<ExperimentConfig, String> {
    ExperimentConfig::from_toml(&format!(
        r#"
seed = 4
[dataset]
kind = "synthetic"
problem = "quadratic-bowl"
dimension = 4
rows = 1000
[regressor]
backend = "kernel"
[noise]
std = {std:?}
repeats = 1500
"#
    ))
    .map_err(err)
}

fn summary_column(out: &StudyOutput, table: &str, column: &str) -> Result<Vec<f64>, String> {
    out.table(table)
        .and_then(|t| t.column(column))
        .ok_or_else(|| format!("{table} lacks {column}"))?
        .iter()
        .map(|v| v.parse::<f64>().map_err(err))
        .collect()
}

fn noise_consistency() -> Outcome {
    let quiet = experiments::run(Study::NoiseStudy, &noise_config(0.0)?).map_err(err)?;
    let designs = &quiet.table("noise_designs.csv").ok_or("missing designs")?.rows;
    ensure(designs.len() == 1500, || format!("{} designs", designs.len()))?;
    ensure(designs.iter().all(|r| r == &designs[0]), || "noise 0 designs differ".into())?;
    let std0 = summary_column(&quiet, "noise_parameters.csv", "std")?;
    ensure(std0.iter().all(|&s| s == 0.0), || format!("noise 0 std {std0:?}"))?;

    let cfg = noise_config(1e-4)?;
    let noisy = experiments::run(Study::NoiseStudy, &cfg).map_err(err)?;
    let std = summary_column(&noisy, "noise_parameters.csv", "std")?;
    ensure(std.iter().all(|&s| s > 0.0), || format!("noise 1e-4 std {std:?}"))?;
    let ape = summary_column(&noisy, "noise_summary.csv", "mean")?;
    ensure(ape.iter().all(|v| v.is_finite()), || format!("MAPE {ape:?}"))?;

    let again = experiments::run(Study::NoiseStudy, &cfg).map_err(err)?;
    for t in &noisy.tables {
        let a = t.to_csv(&noisy.provenance);
        let b = again.table(&t.name).ok_or("missing rerun table")?.to_csv(&again.provenance);
        ensure(a == b, || format!("{} differs between equal-seed runs", t.name))?;
    }
    let min_std = std.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!("std 0 exactly at noise 0; min std {min_std:e} and MAPE {:.4}% at 1e-4", ape[0]))
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let config = dir.path().join("config.toml");
    std::fs::write(
        &config,
        r#"
seed = 6
workers = 3
[dataset]
kind = "synthetic"
problem = "hierarchical"
dimension = 4
rows = 400
[generation]
max_conditions = 40
known = ["x0", "x2"]
[metrics]
prd_clusters = 8
prd_resolution = 201
[order_study]
repeats = 4
[refsize]
sizes = [50, 100, 200]
conditions = 40
[inpaint]
repeats = 2
[noise]
repeats = 200
"#,
    )
    .map_err(err)?;
    let studies = [
        "gen",
        "inpaint",
        "eval",
        "sweep-refsize",
        "sweep-inpaint",
        "study-order",
        "study-noise",
        "study-refsets",
    ];
    let read_all = |d: &Path| -> Result<BTreeMap<String, Vec<u8>>, String> {
        let mut files = BTreeMap::new();
        for e in std::fs::read_dir(d).map_err(err)? {
            let p = e.map_err(err)?.path();
            files.insert(p.file_name().unwrap_or_default().to_string_lossy().into_owned(), std::fs::read(&p).map_err(err)?);
        }
        Ok(files)
    };
    let mut compared = 0;
    let mut svgs = 0;
    for study in studies {
        let mut runs = Vec::new();
        for rep in ["a", "b"] {
            let out = dir.path().join(format!("{study}-{rep}"));
            let status = Command::new(env!("CARGO_BIN_EXE_seqdesign"))
                .args([study, "--config"])
                .arg(&config)
                .arg("--out")
                .arg(&out)
                .output()
                .map_err(err)?;
            ensure(status.status.success(), || {
                format!("{study}: {}", String::from_utf8_lossy(&status.stderr))
            })?;
            runs.push(read_all(&out)?);
        }
        ensure(runs[0].keys().eq(runs[1].keys()), || format!("{study}: different file sets"))?;
        for (name, bytes) in &runs[0] {
            ensure(bytes == &runs[1][name], || format!("{study}: {name} differs"))?;
            compared += 1;
            svgs += usize::from(name.ends_with(".svg"));
        }
    }
    Ok(format!("{compared} files ({svgs} SVG) byte-identical across reruns of 8 studies"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("memorization round-trip", memorization),
        ("PRD closed form", prd_closed_form),
        ("MMD oracle equivalence", mmd_oracle),
        ("reference-size trend", reference_size_trend),
        ("inpainting contracts", inpainting),
        ("consistency and noise", noise_consistency),
        ("pipeline determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
