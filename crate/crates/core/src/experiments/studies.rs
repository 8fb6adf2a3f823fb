use ndarray::{s, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::RefsetMode;
use super::evaluate::hstack;
use super::output::{PlotKind, StudyOutput, Table};
use super::{Context, ExperimentError, Result};
use crate::data::{format_value, subsample, Dataset, NormalizationMode, NormalizationState};
use crate::generator::{self, GenerationResult, GenerationTask, OrderPolicy};
use crate::metrics::{mae, mape, mmd_squared, prd_from_samples, MapeReport};

/// Per-indicator accuracy of achieved against target performances.
#[derive(Debug, Clone, PartialEq)]
struct Accuracy {
    mape: Vec<MapeReport>,
    mae: Vec<f64>,
}

fn accuracy(targets: ArrayView2<'_, f64>, achieved: ArrayView2<'_, f64>) -> Result<Accuracy> {
    let mut out = Accuracy {
        mape: Vec::new(),
        mae: Vec::new(),
    };
    for k in 0..targets.ncols() {
        let t = targets.column(k).to_vec();
        let a = achieved.column(k).to_vec();
        out.mape.push(mape(&t, &a)?);
        out.mae.push(mae(&t, &a)?);
    }
    Ok(out)
}

impl Accuracy {
    fn values(&self) -> Vec<f64> {
        self.mape
            .iter()
            .map(|m| m.value)
            .chain(self.mae.iter().copied())
            .collect()
    }
}

fn accuracy_header(ctx: &Context) -> Vec<String> {
    let names = ctx.reference.schema().performance_columns();
    names
        .iter()
        .map(|n| format!("mape_{n}"))
        .chain(names.iter().map(|n| format!("mae_{n}")))
        .collect()
}

fn design_header(ctx: &Context) -> Vec<String> {
    ctx.reference.schema().columns().map(str::to_string).collect()
}

fn parameter_names(ctx: &Context) -> &[String] {
    ctx.reference.schema().parameter_columns()
}

/// Mixes a base seed with two sweep coordinates (splitmix64 finalizer).
fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Summary {
    mean: f64,
    std: f64,
    median: f64,
    min: f64,
    max: f64,
}

/// Mean and population standard deviation by Welford's update, which keeps
/// the spread of identical values at exactly zero.
fn summarize(values: &[f64]) -> Summary {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => sorted[n / 2],
        _ => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    };
    Summary {
        mean,
        std: if n > 0 { (m2 / n as f64).sqrt() } else { f64::NAN },
        median,
        min: sorted.first().copied().unwrap_or(f64::NAN),
        max: sorted.last().copied().unwrap_or(f64::NAN),
    }
}

fn run_generation(
    ctx: &Context,
    reference: &Dataset,
    task: &GenerationTask,
    context: impl FnOnce() -> String,
) -> Result<GenerationResult> {
    generator::generate(reference, &ctx.spec, task).map_err(|source| ExperimentError::Generation {
        context: context(),
        source,
    })
}

/// The task every plain generation run uses: configured order and noise,
/// both seeded by the global seed.
fn base_task(ctx: &Context, conditions: Array2<f64>) -> Result<GenerationTask> {
    let seed = ctx.config.seed;
    Ok(GenerationTask::new(conditions, parameter_names(ctx).len())
        .with_order(ctx.config.order_policy(parameter_names(ctx), seed)?)
        .with_noise(ctx.config.generation.noise_std, seed))
}

fn designs_table(name: &str, header: Vec<String>, conditions: &Array2<f64>, designs: &Array2<f64>) -> Table {
    let mut t = Table::new(name, PlotKind::None, header);
    for row in hstack(conditions.view(), designs.view()).outer_iter() {
        t.push_numbers(row.iter().copied());
    }
    t
}

fn output(ctx: &Context, tables: Vec<Table>) -> StudyOutput {
    StudyOutput {
        provenance: ctx.provenance.clone(),
        tables,
    }
}

/// Generate full designs for the configured conditions.
pub fn run_generate(ctx: &Context) -> Result<StudyOutput> {
    let rows = ctx.condition_rows(ctx.config.generation.max_conditions);
    let conditions = ctx.conditions(&rows);
    let result = run_generation(ctx, &ctx.reference, &base_task(ctx, conditions.clone())?, || {
        "generation".into()
    })?;
    let table = designs_table("designs.csv", design_header(ctx), &conditions, &result.designs);
    Ok(output(ctx, vec![table]))
}

fn known_mask(ctx: &Context, known: &[String]) -> Result<Vec<bool>> {
    let names = parameter_names(ctx);
    let mut mask = vec![false; names.len()];
    for k in known {
        let j = names
            .iter()
            .position(|n| n == k)
            .ok_or_else(|| ExperimentError::Config(format!("unknown known parameter `{k}`")))?;
        mask[j] = true;
    }
    Ok(mask)
}

/// Complete the condition rows' designs from the parameters listed in
/// `generation.known`.
pub fn run_inpaint(ctx: &Context) -> Result<StudyOutput> {
    let rows = ctx.condition_rows(ctx.config.generation.max_conditions);
    let conditions = ctx.conditions(&rows);
    let mask = known_mask(ctx, &ctx.config.generation.known)?;
    let values = generator::known_values_from(rows.parameters(), &mask);
    let task = base_task(ctx, conditions.clone())?.with_known(mask, values);
    let result = run_generation(ctx, &ctx.reference, &task, || "inpainting".into())?;
    let table = designs_table("inpainted.csv", design_header(ctx), &conditions, &result.designs);
    Ok(output(ctx, vec![table]))
}

/// Generate against test-set conditions, then score accuracy, PRD and MMD.
pub fn run_generation_eval(ctx: &Context) -> Result<StudyOutput> {
    let cfg = &ctx.config;
    let rows = ctx.condition_rows(cfg.generation.max_conditions);
    let conditions = ctx.conditions(&rows);
    let result = run_generation(ctx, &ctx.reference, &base_task(ctx, conditions.clone())?, || {
        "generation".into()
    })?;
    let achieved = ctx.evaluator.evaluate(result.designs.view())?;
    let acc = accuracy(conditions.view(), achieved.view())?;
    let perf_names = ctx.reference.schema().performance_columns();

    let mut header = design_header(ctx);
    header.extend(perf_names.iter().map(|n| format!("achieved_{n}")));
    let mut designs = Table::new("designs.csv", PlotKind::None, header);
    let full = hstack(hstack(conditions.view(), result.designs.view()).view(), achieved.view());
    for row in full.outer_iter() {
        designs.push_numbers(row.iter().copied());
    }

    let mut metrics = Table::new(
        "metrics.csv",
        PlotKind::None,
        vec!["metric".into(), "indicator".into(), "value".into()],
    );
    let mut push = |metric: &str, indicator: &str, value: f64| {
        metrics.push(vec![metric.into(), indicator.into(), format_value(value)]);
    };
    for (k, name) in perf_names.iter().enumerate() {
        push("mape", name, acc.mape[k].value);
        push("mape_skipped", name, acc.mape[k].skipped as f64);
        push("mae", name, acc.mae[k]);
    }
    for q in ctx.evaluator.surrogate_quality() {
        push("surrogate_r2", &q.indicator, q.r_squared.unwrap_or(f64::NAN));
        push("surrogate_mape", &q.indicator, q.mape.unwrap_or(f64::NAN));
    }

    // Distribution metrics in the reference set's normalized parameter space.
    let n_perf = perf_names.len();
    let state = NormalizationState::fit(&ctx.reference, NormalizationMode::MinMax);
    let reference = state
        .normalize_rows(ctx.reference.rows())
        .slice(s![.., n_perf..])
        .to_owned();
    let param_cols: Vec<usize> = (n_perf..n_perf + parameter_names(ctx).len()).collect();
    let generated = state.normalize_columns(result.designs.view(), &param_cols);
    if generated.nrows() >= 2 && reference.nrows() >= 2 {
        push("mmd2", "designs", mmd_squared(generated.view(), reference.view(), &cfg.metrics.mmd())?);
    }
    let prd = prd_from_samples(reference.view(), generated.view(), &cfg.metrics.prd(cfg.seed))?;
    let mut header = vec!["lambda".to_string(), "precision".into(), "recall".into()];
    for r in 0..prd.runs.len() {
        header.push(format!("precision_run{r}"));
        header.push(format!("recall_run{r}"));
    }
    let mut curve = Table::new("prd.csv", PlotKind::Prd, header);
    for (i, &lambda) in prd.average.lambdas.iter().enumerate() {
        let (a, b) = prd.average.points[i];
        let mut row = vec![lambda, a, b];
        for run in &prd.runs {
            row.extend([run.points[i].0, run.points[i].1]);
        }
        curve.push_numbers(row);
    }
    Ok(output(ctx, vec![designs, metrics, curve]))
}

/// Accuracy under `repeats` random generation orders, with mean, population
/// standard deviation and the default-order baseline.
pub fn run_order_study(ctx: &Context) -> Result<StudyOutput> {
    let cfg = &ctx.config;
    let repeats = cfg.order_study.repeats;
    if repeats < 2 {
        return Err(ExperimentError::Argument(format!(
            "order study needs at least 2 repeats, got {repeats}"
        )));
    }
    let seeds: Vec<u64> = cfg
        .order_study
        .seeds
        .clone()
        .unwrap_or_else(|| (0..repeats as u64).map(|r| cfg.seed.wrapping_add(r)).collect());
    let rows = ctx.condition_rows(cfg.generation.max_conditions);
    let conditions = ctx.conditions(&rows);
    let names = parameter_names(ctx);
    let policies: Vec<OrderPolicy> = seeds
        .iter()
        .map(|&seed| OrderPolicy::Random { seed })
        .chain(std::iter::once(OrderPolicy::Default))
        .collect();
    let runs = policies
        .par_iter()
        .enumerate()
        .map(|(r, policy)| {
            let task = GenerationTask::new(conditions.clone(), names.len())
                .with_order(policy.clone())
                .with_noise(cfg.generation.noise_std, cfg.seed);
            let result = run_generation(ctx, &ctx.reference, &task, || format!("order run {r}"))?;
            let achieved = ctx.evaluator.evaluate(result.designs.view())?;
            Ok((result.order, accuracy(conditions.view(), achieved.view())?))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut header = vec!["run".to_string(), "seed".into(), "order".into()];
    header.extend(accuracy_header(ctx));
    let mut table = Table::new("order_study.csv", PlotKind::None, header);
    let order_names = |order: &[usize]| {
        order.iter().map(|&j| names[j].as_str()).collect::<Vec<_>>().join(" ")
    };
    let text_row = |run: String, seed: String, order: String, values: Vec<f64>| {
        let mut row = vec![run, seed, order];
        row.extend(values.into_iter().map(format_value));
        row
    };
    for (r, (order, acc)) in runs[..repeats].iter().enumerate() {
        table.push(text_row(r.to_string(), seeds[r].to_string(), order_names(order), acc.values()));
    }
    let columns: Vec<Vec<f64>> = {
        let per_run: Vec<Vec<f64>> = runs[..repeats].iter().map(|(_, a)| a.values()).collect();
        (0..per_run[0].len())
            .map(|c| per_run.iter().map(|v| v[c]).collect())
            .collect()
    };
    let stats: Vec<Summary> = columns.iter().map(|c| summarize(c)).collect();
    table.push(text_row("mean".into(), String::new(), String::new(), stats.iter().map(|s| s.mean).collect()));
    table.push(text_row("std".into(), String::new(), String::new(), stats.iter().map(|s| s.std).collect()));
    let (order, acc) = &runs[repeats];
    table.push(text_row("default".into(), String::new(), order_names(order), acc.values()));
    Ok(output(ctx, vec![table]))
}

/// Accuracy as a function of reference-set size against fixed conditions.
/// Subsamples share one seed, so smaller sets are prefixes of larger ones.
pub fn run_reference_size_sweep(ctx: &Context) -> Result<StudyOutput> {
    let cfg = &ctx.config;
    let mut sizes = cfg.refsize.sizes();
    sizes.sort_unstable();
    sizes.dedup();
    let available = ctx.reference.row_count();
    for &size in &sizes {
        if size == 0 || size > available || size > ctx.spec.capacity {
            return Err(ExperimentError::Argument(format!(
                "reference size {size} is outside 1..={} ({available} reference rows, capacity {})",
                available.min(ctx.spec.capacity),
                ctx.spec.capacity
            )));
        }
    }
    let rows = ctx.condition_rows(Some(cfg.refsize.conditions));
    let conditions = ctx.conditions(&rows);
    let results = sizes
        .par_iter()
        .map(|&size| {
            let reference = subsample(&ctx.reference, size, cfg.seed)?;
            let result = run_generation(ctx, &reference, &base_task(ctx, conditions.clone())?, || {
                format!("reference size {size}")
            })?;
            let achieved = ctx.evaluator.evaluate(result.designs.view())?;
            accuracy(conditions.view(), achieved.view())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["size".to_string()];
    header.extend(accuracy_header(ctx));
    let mut table = Table::new("refsize_sweep.csv", PlotKind::Lines, header);
    for (size, acc) in sizes.iter().zip(&results) {
        table.push_numbers(std::iter::once(*size as f64).chain(acc.values()));
    }
    Ok(output(ctx, vec![table]))
}

/// Accuracy as parameters are progressively hidden and inpainted. For each
/// count and repeat a seeded random subset of parameters is missing; known
/// values come from the condition rows' own designs.
pub fn run_inpainting_sweep(ctx: &Context) -> Result<StudyOutput> {
    let cfg = &ctx.config;
    let n = parameter_names(ctx).len();
    let mut counts = cfg
        .inpaint
        .missing_counts
        .clone()
        .unwrap_or_else(|| (1..=n).collect());
    counts.sort_unstable();
    counts.dedup();
    if let Some(&c) = counts.iter().find(|&&c| c > n) {
        return Err(ExperimentError::Argument(format!(
            "missing count {c} exceeds the {n} design parameters"
        )));
    }
    let repeats = cfg.inpaint.repeats;
    let rows = ctx.condition_rows(cfg.generation.max_conditions);
    let conditions = ctx.conditions(&rows);
    let jobs: Vec<(usize, usize)> = counts
        .iter()
        .flat_map(|&c| (0..repeats).map(move |r| (c, r)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(c, r)| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, c as u64, r as u64));
            let missing = rand::seq::index::sample(&mut rng, n, c);
            let mut mask = vec![true; n];
            for j in missing.iter() {
                mask[j] = false;
            }
            let values = generator::known_values_from(rows.parameters(), &mask);
            let task = base_task(ctx, conditions.clone())?.with_known(mask, values);
            let result = run_generation(ctx, &ctx.reference, &task, || {
                format!("inpainting {c} missing, repeat {r}")
            })?;
            let achieved = ctx.evaluator.evaluate(result.designs.view())?;
            accuracy(conditions.view(), achieved.view())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut header = vec!["missing".to_string()];
    header.extend(accuracy_header(ctx));
    let mut table = Table::new("inpaint_sweep.csv", PlotKind::Lines, header);
    for (i, &c) in counts.iter().enumerate() {
        let block: Vec<Vec<f64>> = results[i * repeats..(i + 1) * repeats]
            .iter()
            .map(Accuracy::values)
            .collect();
        let means = (0..block[0].len()).map(|k| block.iter().map(|v| v[k]).sum::<f64>() / repeats as f64);
        table.push_numbers(std::iter::once(c as f64).chain(means));
    }
    Ok(output(ctx, vec![table]))
}

/// One condition repeated many times with noise injection: the spread of the
/// generated parameters and of the achieved performance error.
pub fn run_noise_study(ctx: &Context) -> Result<StudyOutput> {
    let cfg = &ctx.config;
    let noise = &cfg.noise;
    if noise.repeats < 2 {
        return Err(ExperimentError::Argument(format!(
            "noise study needs at least 2 repeats, got {}",
            noise.repeats
        )));
    }
    if noise.condition_row >= ctx.test.row_count() {
        return Err(ExperimentError::Argument(format!(
            "condition row {} is outside the {} test rows",
            noise.condition_row,
            ctx.test.row_count()
        )));
    }
    let n_perf = ctx.test.schema().n_performance();
    let condition = ctx.test.rows().slice(s![noise.condition_row, ..n_perf]).to_owned();
    let conditions = condition
        .broadcast((noise.repeats, n_perf))
        .expect("row broadcast")
        .to_owned();
    let names = parameter_names(ctx);
    let task = GenerationTask::new(conditions.clone(), names.len())
        .with_order(cfg.order_policy(names, cfg.seed)?)
        .with_noise(noise.std, cfg.seed);
    let result = run_generation(ctx, &ctx.reference, &task, || "noise study".into())?;
    let achieved = ctx.evaluator.evaluate(result.designs.view())?;

    let mut designs = Table::new("noise_designs.csv", PlotKind::Histogram, names.to_vec());
    for row in result.designs.outer_iter() {
        designs.push_numbers(row.iter().copied());
    }
    let params = summary_table("noise_parameters.csv", names, result.designs.view(), None);

    let perf_names = ctx.test.schema().performance_columns();
    let mut ape = Array2::<f64>::zeros(achieved.raw_dim());
    for ((mut out, a), c) in ape
        .axis_iter_mut(Axis(1))
        .zip(achieved.axis_iter(Axis(1)))
        .zip(condition.iter())
    {
        out.assign(&a.mapv(|v| 100.0 * ((c - v) / c).abs()));
    }
    let ape_names: Vec<String> = perf_names.iter().map(|n| format!("ape_{n}")).collect();
    let mut performance = Table::new("noise_performance.csv", PlotKind::Histogram, ape_names.clone());
    for row in ape.outer_iter() {
        performance.push_numbers(row.iter().copied());
    }
    let perf_summary = summary_table("noise_summary.csv", &ape_names, ape.view(), None);
    Ok(output(ctx, vec![designs, params, performance, perf_summary]))
}

fn summary_header(with_set: bool) -> Vec<String> {
    let mut h: Vec<String> = if with_set { vec!["set".into()] } else { vec![] };
    h.extend(["parameter", "mean", "std", "median", "min", "max"].map(String::from));
    h
}

fn summary_table(name: &str, columns: &[String], values: ArrayView2<'_, f64>, set: Option<usize>) -> Table {
    let mut t = Table::new(name, PlotKind::None, summary_header(set.is_some()));
    push_summaries(&mut t, columns, values, set);
    t
}

fn push_summaries(t: &mut Table, columns: &[String], values: ArrayView2<'_, f64>, set: Option<usize>) {
    for (j, name) in columns.iter().enumerate() {
        let s = summarize(&values.column(j).to_vec());
        let mut row: Vec<String> = set.map(|s| s.to_string()).into_iter().collect();
        row.push(name.clone());
        row.extend([s.mean, s.std, s.median, s.min, s.max].map(format_value));
        t.push(row);
    }
}

/// Fixed conditions generated against several reference subsets.
pub fn run_reference_variation_study(ctx: &Context) -> Result<StudyOutput> {
    let cfg = &ctx.config;
    let sets = cfg.refsets.sets;
    if sets < 2 {
        return Err(ExperimentError::Argument(format!(
            "reference variation needs at least 2 sets, got {sets}"
        )));
    }
    let available = ctx.reference.row_count();
    let size = cfg.refsets.size.unwrap_or(available / sets);
    let references: Vec<Dataset> = match cfg.refsets.mode {
        RefsetMode::Disjoint => {
            if size == 0 || size * sets > available {
                return Err(ExperimentError::Argument(format!(
                    "{sets} disjoint sets of {size} rows need {} reference rows, have {available}",
                    size * sets
                )));
            }
            let mut order: Vec<usize> = (0..available).collect();
            rand::seq::SliceRandom::shuffle(&mut order[..], &mut ChaCha8Rng::seed_from_u64(cfg.seed));
            (0..sets)
                .map(|k| {
                    let mut idx = order[k * size..(k + 1) * size].to_vec();
                    idx.sort_unstable();
                    ctx.reference.select_rows(&idx)
                })
                .collect()
        }
        RefsetMode::Independent => {
            let seeds = cfg
                .refsets
                .seeds
                .clone()
                .unwrap_or_else(|| (0..sets as u64).map(|k| cfg.seed.wrapping_add(k)).collect());
            seeds
                .iter()
                .map(|&seed| subsample(&ctx.reference, size, seed))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let rows = ctx.condition_rows(cfg.generation.max_conditions);
    let conditions = ctx.conditions(&rows);
    let results = references
        .par_iter()
        .enumerate()
        .map(|(k, reference)| {
            let result = run_generation(ctx, reference, &base_task(ctx, conditions.clone())?, || {
                format!("reference set {k}")
            })?;
            let achieved = ctx.evaluator.evaluate(result.designs.view())?;
            Ok((result.designs, accuracy(conditions.view(), achieved.view())?))
        })
        .collect::<Result<Vec<_>>>()?;

    let names = parameter_names(ctx);
    let mut summary = Table::new("refsets_summary.csv", PlotKind::None, summary_header(true));
    let mut acc_header = vec!["set".to_string()];
    acc_header.extend(accuracy_header(ctx));
    let mut acc_table = Table::new("refsets_accuracy.csv", PlotKind::None, acc_header);
    let mut tables = Vec::new();
    for (k, (designs, acc)) in results.iter().enumerate() {
        push_summaries(&mut summary, names, designs.view(), Some(k));
        acc_table.push_numbers(std::iter::once(k as f64).chain(acc.values()));
        let mut t = Table::new(format!("refsets_set{k}.csv"), PlotKind::Histogram, names.to_vec());
        for row in designs.outer_iter() {
            t.push_numbers(row.iter().copied());
        }
        tables.push(t);
    }
    tables.insert(0, acc_table);
    tables.insert(0, summary);
    Ok(output(ctx, tables))
}
