//! Command execution for the batch CLI: load the configured model and
//! data, run the requested command, write report files, and map every
//! failure onto the exit-code contract.
//!
//! Exit codes: 0 success, 1 internal bug, 2 configuration problem,
//! 3 data/model/file I/O failure, 4 computation failure. `benchmark`
//! isolates per-cell failures and still exits 0 (with a warning flag in
//! the manifest); `explain` and `evaluate` keep partial outputs and exit 4
//! when any explainer fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::attrib::{Attribution, Background, ImageExplainer, TabularExplainer};
use crate::bench::config::{select_metric_columns, Modality, RunConfig, ScoreSpace};
use crate::io::{
    load_csv, load_model, load_tensor, save_pgm, save_tensor, Cell, CsvOptions, Dtype,
    ReportFormat, TabularDataset, Table, TensorFile,
};
use crate::metrics::{
    aggregate_image_rows, aggregate_rows, ImageMetricEngine, MetricEngine, IMAGE_METRIC_COLUMNS,
    METRIC_COLUMNS,
};
use crate::model::Model;
use crate::seed::{derive_seed, purpose_id};
use crate::tensor::Tensor;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_COMPUTE: i32 = 4;

/// The four subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Explain,
    Evaluate,
    Benchmark,
    Validate,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Explain => "explain",
            Command::Evaluate => "evaluate",
            Command::Benchmark => "benchmark",
            Command::Validate => "validate",
        }
    }
}

/// Everything the CLI front end resolved: command, config file, and the
/// flag overrides.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config_path: PathBuf,
    /// Overrides the config's seed when present.
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub format: ReportFormat,
    /// Worker threads; `None` lets the thread pool pick.
    pub jobs: Option<usize>,
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

type StepResult<T> = std::result::Result<T, Failure>;

/// One explainer failure on one instance, echoed into the manifest.
#[derive(Debug, Clone, serde::Serialize)]
struct FailureRecord {
    explainer: String,
    instance: usize,
    error: String,
}

/// Run one command end to end and return the process exit code. Error
/// messages go to stderr.
pub fn execute(inv: &Invocation) -> i32 {
    match run(inv) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn run(inv: &Invocation) -> StepResult<i32> {
    let started = Instant::now();
    let raw = fs::read(&inv.config_path).map_err(|e| {
        fail(
            EXIT_IO,
            format!("cannot read config {}: {e}", inv.config_path.display()),
        )
    })?;
    let text = String::from_utf8(raw.clone())
        .map_err(|_| fail(EXIT_CONFIG, "config file is not valid UTF-8"))?;
    let mut config =
        RunConfig::from_json(&text).map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    if let Some(seed) = inv.seed {
        config.seed = seed;
    }
    let config_sha256 = hex_digest(&raw);

    let mut model = load_model(&config.model_path).map_err(|e| {
        fail(
            EXIT_IO,
            format!("cannot load model {}: {e}", config.model_path.display()),
        )
    })?;
    if config.score_space == ScoreSpace::Logit {
        model.strip_softmax();
    }

    let modality = config.modality();
    let model_is_image = model.input_shape().len() == 3;
    match (modality, model_is_image) {
        (Modality::Image, false) => {
            return Err(fail(
                EXIT_CONFIG,
                format!(
                    "image methods need a model with a [c, h, w] input, but {} takes a flat vector",
                    config.model_path.display()
                ),
            ))
        }
        (Modality::Tabular, true) => {
            return Err(fail(
                EXIT_CONFIG,
                format!(
                    "tabular methods need a flat-input model, but {} takes a [c, h, w] image",
                    config.model_path.display()
                ),
            ))
        }
        _ => {}
    }

    if !config.task.matches_class_count(model.n_classes()) {
        log::warn!(
            "task {} does not match the model's {} output class(es)",
            config.task.as_str(),
            model.n_classes()
        );
    }
    warn_on_gradient_methods(&config, &model);

    let ctx = RunContext {
        inv,
        config: &config,
        model: &model,
        config_sha256,
        started,
    };
    match modality {
        Modality::Tabular => run_tabular(&ctx),
        Modality::Image => run_image(&ctx),
    }
}

struct RunContext<'a> {
    inv: &'a Invocation,
    config: &'a RunConfig,
    model: &'a Model,
    config_sha256: String,
    started: Instant,
}

fn warn_on_gradient_methods(config: &RunConfig, model: &Model) {
    const NEEDS_GRADIENTS: &[&str] = &[
        "integrated_gradients",
        "saliency",
        "grad_x_input",
        "saliency_map",
        "grad_input_map",
        "integrated_gradients_map",
        "smoothgrad",
        "grad_cam",
    ];
    if model.is_differentiable() {
        return;
    }
    for e in &config.explainers {
        if NEEDS_GRADIENTS.contains(&e.method_name()) {
            log::warn!(
                "method {} needs gradients but a {} model is not differentiable; its runs will fail",
                e.method_name(),
                model.family()
            );
        }
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn thread_pool(jobs: Option<usize>) -> StepResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| fail(EXIT_INTERNAL, format!("cannot build thread pool: {e}")))
}

fn prepare_out_dir(dir: &Path) -> StepResult<()> {
    fs::create_dir_all(dir).map_err(|e| {
        fail(
            EXIT_IO,
            format!("cannot create output directory {}: {e}", dir.display()),
        )
    })
}

fn write_table(table: &Table, dir: &Path, name: &str, format: ReportFormat) -> StepResult<()> {
    table
        .write(&dir.join(name), format)
        .map_err(|e| fail(EXIT_IO, format!("cannot write {name}: {e}")))
}

fn write_manifest(
    ctx: &RunContext,
    n_instances: usize,
    outputs: &[String],
    failures: &[FailureRecord],
) -> StepResult<()> {
    let manifest = serde_json::json!({
        "command": ctx.inv.command.as_str(),
        "config_sha256": ctx.config_sha256,
        "engine_version": env!("CARGO_PKG_VERSION"),
        "seed": ctx.config.seed,
        "format": ctx.inv.format.to_string(),
        "n_instances": n_instances,
        "outputs": outputs,
        "failures": failures,
        "warnings": !failures.is_empty(),
        "wall_time_ms": ctx.started.elapsed().as_millis() as u64,
    });
    let body = serde_json::to_string_pretty(&manifest).expect("manifest is valid json") + "\n";
    fs::write(ctx.inv.out_dir.join("manifest.json"), body)
        .map_err(|e| fail(EXIT_IO, format!("cannot write manifest.json: {e}")))
}

// ── Tabular runs ────────────────────────────────────────────────────────

fn run_tabular(ctx: &RunContext) -> StepResult<i32> {
    let config = ctx.config;
    let csv_options = CsvOptions {
        has_header: config.data.has_header,
        label_column: config.data.label_column.clone(),
        allow_missing: config.data.allow_missing,
    };
    let dataset = load_csv(&config.data_path, &csv_options).map_err(|e| {
        fail(
            EXIT_IO,
            format!("cannot load data {}: {e}", config.data_path.display()),
        )
    })?;
    if dataset.n_features() != ctx.model.n_inputs() {
        return Err(fail(
            EXIT_CONFIG,
            format!(
                "model expects {} features but the dataset has {}",
                ctx.model.n_inputs(),
                dataset.n_features()
            ),
        ));
    }
    let selection = config
        .instances
        .resolve(dataset.n_rows())
        .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    let metric_cols =
        select_metric_columns(&METRIC_COLUMNS, &config.metrics).map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;

    let background_rows = match config.background_size {
        Some(k) => dataset.features[..k.min(dataset.n_rows())].to_vec(),
        None => dataset.features.clone(),
    };
    let background =
        Background::new(background_rows).map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    let explainers: Vec<Box<dyn TabularExplainer>> = config
        .explainers
        .iter()
        .map(|e| e.build_tabular(&background))
        .collect::<crate::error::Result<_>>()
        .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;

    if ctx.inv.command == Command::Validate {
        println!("config: ok ({})", ctx.inv.config_path.display());
        println!(
            "model: {} with {} input feature(s), {} class(es) ({})",
            ctx.model.family(),
            ctx.model.n_inputs(),
            ctx.model.n_classes(),
            config.model_path.display()
        );
        println!(
            "data: {} row(s) x {} feature(s) ({})",
            dataset.n_rows(),
            dataset.n_features(),
            config.data_path.display()
        );
        print_common_validate_lines(config, selection.len(), &metric_cols, &METRIC_COLUMNS);
        return Ok(EXIT_OK);
    }

    prepare_out_dir(&ctx.inv.out_dir)?;
    let pool = thread_pool(ctx.inv.jobs)?;
    pool.install(|| match ctx.inv.command {
        Command::Explain => explain_tabular(ctx, &dataset, &selection, &explainers),
        Command::Evaluate => evaluate_tabular(ctx, &dataset, &selection, &explainers, &metric_cols),
        Command::Benchmark => {
            benchmark_tabular(ctx, &dataset, &selection, &explainers, &metric_cols)
        }
        Command::Validate => unreachable!("validate returns before dispatch"),
    })
}

fn print_common_validate_lines(
    config: &RunConfig,
    n_selected: usize,
    metric_cols: &[usize],
    all_columns: &[&str],
) {
    println!("instances: {n_selected} selected");
    println!(
        "explainers: {}",
        config
            .explainers
            .iter()
            .map(|e| e.method_name())
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!(
        "metrics: {}",
        metric_cols
            .iter()
            .map(|&c| all_columns[c])
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!("seed: {}", config.seed);
}

/// Feature rows sorted by |attribution| descending, ties by index.
/// Names come from the dataset header, not the explainer's defaults.
fn attribution_table(attr: &Attribution, x: &[f64], names: &[String]) -> Table {
    let mut order: Vec<usize> = (0..attr.n_features()).collect();
    order.sort_by(|&i, &j| {
        attr.values[j]
            .abs()
            .partial_cmp(&attr.values[i].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut table = Table::new(
        ["idx", "feature", "value", "attribution"]
            .map(String::from)
            .to_vec(),
    )
    .expect("static columns");
    for i in order {
        table
            .push_row(vec![
                Cell::Int(i as i64),
                Cell::Text(names[i].clone()),
                Cell::Num(x[i]),
                Cell::Num(attr.values[i]),
            ])
            .expect("fixed width");
    }
    table
}

fn explain_tabular(
    ctx: &RunContext,
    dataset: &TabularDataset,
    selection: &[usize],
    explainers: &[Box<dyn TabularExplainer>],
) -> StepResult<i32> {
    let config = ctx.config;
    let model = ctx.model;
    let pairs: Vec<(usize, usize)> = explainers
        .iter()
        .enumerate()
        .flat_map(|(ei, _)| selection.iter().map(move |&row| (ei, row)))
        .collect();
    let results: Vec<crate::error::Result<Attribution>> = pairs
        .par_iter()
        .map(|&(ei, row)| {
            let x = &dataset.features[row];
            let class = model.predict_slice(x)?.predicted_class;
            let seed = derive_seed(config.seed, &[row as u64, purpose_id(explainers[ei].name())]);
            explainers[ei].explain(model, x, class, seed)
        })
        .collect();

    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    let ext = ctx.inv.format.extension();
    for (&(ei, row), result) in pairs.iter().zip(results) {
        let method = explainers[ei].name();
        match result {
            Ok(attr) => {
                let name = format!("attribution_i{row}_{method}.{ext}");
                let table = attribution_table(&attr, &dataset.features[row], &dataset.feature_names);
                write_table(&table, &ctx.inv.out_dir, &name, ctx.inv.format)?;
                outputs.push(name);
            }
            Err(e) => failures.push(FailureRecord {
                explainer: method.to_string(),
                instance: row,
                error: e.to_string(),
            }),
        }
    }
    write_manifest(ctx, selection.len(), &outputs, &failures)?;
    finish_with_failures(failures)
}

fn finish_with_failures(failures: Vec<FailureRecord>) -> StepResult<i32> {
    if failures.is_empty() {
        return Ok(EXIT_OK);
    }
    for f in &failures {
        eprintln!(
            "error: {} failed on instance {}: {}",
            f.explainer, f.instance, f.error
        );
    }
    Ok(EXIT_COMPUTE)
}

/// Columns of an aggregate metrics table: the selected metric names.
fn metric_header(metric_cols: &[usize], all_columns: &[&str]) -> Vec<String> {
    metric_cols.iter().map(|&c| all_columns[c].to_string()).collect()
}

fn evaluate_tabular(
    ctx: &RunContext,
    dataset: &TabularDataset,
    selection: &[usize],
    explainers: &[Box<dyn TabularExplainer>],
    metric_cols: &[usize],
) -> StepResult<i32> {
    let metric_config = ctx.config.options.to_tabular_config(ctx.config.seed);
    let engine = MetricEngine::new(ctx.model, dataset, &metric_config)
        .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;

    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    let ext = ctx.inv.format.extension();
    for explainer in explainers {
        let results: Vec<_> = selection
            .par_iter()
            .map(|&row| (row, engine.row(explainer.as_ref(), row)))
            .collect();
        let mut rows = Vec::with_capacity(results.len());
        let mut failed = false;
        for (row, result) in results {
            match result {
                Ok(r) => rows.push((row, r)),
                Err(e) => {
                    failed = true;
                    failures.push(FailureRecord {
                        explainer: explainer.name().to_string(),
                        instance: row,
                        error: e.to_string(),
                    });
                }
            }
        }
        if failed {
            continue;
        }

        let (aggregate, _) = aggregate_rows(&rows.iter().map(|(_, r)| *r).collect::<Vec<_>>());
        let mut agg_table = Table::new(metric_header(metric_cols, &METRIC_COLUMNS))
            .expect("metric columns are nonempty");
        agg_table
            .push_row(
                metric_cols
                    .iter()
                    .map(|&c| Cell::Num(aggregate.as_array()[c]))
                    .collect(),
            )
            .expect("fixed width");
        let agg_name = format!("metrics_{}_aggregate.{ext}", explainer.name());
        write_table(&agg_table, &ctx.inv.out_dir, &agg_name, ctx.inv.format)?;
        outputs.push(agg_name);

        let mut columns = vec!["instance".to_string()];
        columns.extend(metric_header(metric_cols, &METRIC_COLUMNS));
        let mut inst_table = Table::new(columns).expect("static columns");
        for (row, r) in &rows {
            let mut cells = vec![Cell::Int(*row as i64)];
            cells.extend(metric_cols.iter().map(|&c| Cell::Num(r.as_array()[c])));
            inst_table.push_row(cells).expect("fixed width");
        }
        let inst_name = format!("metrics_{}_instances.{ext}", explainer.name());
        write_table(&inst_table, &ctx.inv.out_dir, &inst_name, ctx.inv.format)?;
        outputs.push(inst_name);
    }
    write_manifest(ctx, selection.len(), &outputs, &failures)?;
    finish_with_failures(failures)
}

fn benchmark_tabular(
    ctx: &RunContext,
    dataset: &TabularDataset,
    selection: &[usize],
    explainers: &[Box<dyn TabularExplainer>],
    metric_cols: &[usize],
) -> StepResult<i32> {
    let metric_config = ctx.config.options.to_tabular_config(ctx.config.seed);
    let engine = MetricEngine::new(ctx.model, dataset, &metric_config)
        .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;

    let mut matrix_columns = vec!["explainer".to_string()];
    matrix_columns.extend(metric_header(metric_cols, &METRIC_COLUMNS));
    let mut matrix = Table::new(matrix_columns).expect("static columns");
    let mut provenance = Table::new(
        ["explainer", "metric", "n_instances", "n_undefined", "n_failed"]
            .map(String::from)
            .to_vec(),
    )
    .expect("static columns");

    let mut failures = Vec::new();
    for explainer in explainers {
        let results: Vec<_> = selection
            .par_iter()
            .map(|&row| (row, engine.row(explainer.as_ref(), row)))
            .collect();
        let mut ok_rows = Vec::with_capacity(results.len());
        for (row, result) in results {
            match result {
                Ok(r) => ok_rows.push(r),
                Err(e) => failures.push(FailureRecord {
                    explainer: explainer.name().to_string(),
                    instance: row,
                    error: e.to_string(),
                }),
            }
        }
        let n_failed = selection.len() - ok_rows.len();
        let (aggregate, excluded) = aggregate_rows(&ok_rows);
        let mut cells = vec![Cell::Text(explainer.name().to_string())];
        cells.extend(metric_cols.iter().map(|&c| Cell::Num(aggregate.as_array()[c])));
        matrix.push_row(cells).expect("fixed width");
        for &c in metric_cols {
            provenance
                .push_row(vec![
                    Cell::Text(explainer.name().to_string()),
                    Cell::Text(METRIC_COLUMNS[c].to_string()),
                    Cell::Int(ok_rows.len() as i64),
                    Cell::Int(excluded[c] as i64),
                    Cell::Int(n_failed as i64),
                ])
                .expect("fixed width");
        }
    }

    let ext = ctx.inv.format.extension();
    let matrix_name = format!("benchmark_matrix.{ext}");
    let prov_name = format!("benchmark_provenance.{ext}");
    write_table(&matrix, &ctx.inv.out_dir, &matrix_name, ctx.inv.format)?;
    write_table(&provenance, &ctx.inv.out_dir, &prov_name, ctx.inv.format)?;
    let outputs = vec![matrix_name, prov_name];
    write_manifest(ctx, selection.len(), &outputs, &failures)?;
    if !failures.is_empty() {
        for f in &failures {
            log::warn!(
                "{} failed on instance {}: {}; cell averages skip it",
                f.explainer,
                f.instance,
                f.error
            );
        }
        eprintln!(
            "warning: {} cell computation(s) failed; see manifest.json",
            failures.len()
        );
    }
    Ok(EXIT_OK)
}

// ── Image runs ──────────────────────────────────────────────────────────

fn load_image_stack(path: &Path, model: &Model) -> StepResult<Vec<Tensor>> {
    let file = load_tensor(path)
        .map_err(|e| fail(EXIT_IO, format!("cannot load data {}: {e}", path.display())))?;
    let tensor = file
        .into_tensor()
        .map_err(|e| fail(EXIT_IO, format!("cannot load data {}: {e}", path.display())))?;
    let shape = tensor.shape().to_vec();
    if shape.len() != 4 {
        return Err(fail(
            EXIT_IO,
            format!(
                "image data must be a rank-4 [n, c, h, w] stack, got shape {shape:?} in {}",
                path.display()
            ),
        ));
    }
    let per_image = shape[1..].to_vec();
    if per_image != model.input_shape() {
        return Err(fail(
            EXIT_CONFIG,
            format!(
                "model expects input shape {:?} but images are {per_image:?}",
                model.input_shape()
            ),
        ));
    }
    let image_len: usize = per_image.iter().product();
    let data = tensor.data();
    Ok((0..shape[0])
        .map(|i| {
            Tensor::new(
                per_image.clone(),
                data[i * image_len..(i + 1) * image_len].to_vec(),
            )
            .expect("slice length matches shape")
        })
        .collect())
}

fn run_image(ctx: &RunContext) -> StepResult<i32> {
    let config = ctx.config;
    let images = load_image_stack(&config.data_path, ctx.model)?;
    let selection = config
        .instances
        .resolve(images.len())
        .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    let metric_cols = select_metric_columns(&IMAGE_METRIC_COLUMNS, &config.metrics)
        .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    let explainers: Vec<Box<dyn ImageExplainer>> = config
        .explainers
        .iter()
        .map(|e| e.build_image())
        .collect::<crate::error::Result<_>>()
        .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    // exercised early so validate reports bad identifiers before any run
    let image_metric_config = config
        .options
        .to_image_config(config.seed)
        .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;

    if ctx.inv.command == Command::Validate {
        println!("config: ok ({})", ctx.inv.config_path.display());
        println!(
            "model: {} with input shape {:?}, {} class(es) ({})",
            ctx.model.family(),
            ctx.model.input_shape(),
            ctx.model.n_classes(),
            config.model_path.display()
        );
        println!(
            "data: {} image(s) of shape {:?} ({})",
            images.len(),
            ctx.model.input_shape(),
            config.data_path.display()
        );
        print_common_validate_lines(config, selection.len(), &metric_cols, &IMAGE_METRIC_COLUMNS);
        return Ok(EXIT_OK);
    }

    prepare_out_dir(&ctx.inv.out_dir)?;
    let pool = thread_pool(ctx.inv.jobs)?;
    pool.install(|| match ctx.inv.command {
        Command::Explain => explain_image(ctx, &images, &selection, &explainers),
        Command::Evaluate => evaluate_image(
            ctx,
            &images,
            &selection,
            &explainers,
            &metric_cols,
            &image_metric_config,
        ),
        Command::Benchmark => benchmark_image(
            ctx,
            &images,
            &selection,
            &explainers,
            &metric_cols,
            &image_metric_config,
        ),
        Command::Validate => unreachable!("validate returns before dispatch"),
    })
}

fn explain_image(
    ctx: &RunContext,
    images: &[Tensor],
    selection: &[usize],
    explainers: &[Box<dyn ImageExplainer>],
) -> StepResult<i32> {
    let config = ctx.config;
    let model = ctx.model;
    let pairs: Vec<(usize, usize)> = explainers
        .iter()
        .enumerate()
        .flat_map(|(ei, _)| selection.iter().map(move |&row| (ei, row)))
        .collect();
    let results: Vec<crate::error::Result<crate::attrib::AttributionMap>> = pairs
        .par_iter()
        .map(|&(ei, row)| {
            let x = &images[row];
            let class = model.predict(x)?.predicted_class;
            let seed = derive_seed(config.seed, &[row as u64, purpose_id(explainers[ei].name())]);
            explainers[ei].explain(model, x, class, seed)
        })
        .collect();

    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    for (&(ei, row), result) in pairs.iter().zip(results) {
        let method = explainers[ei].name();
        match result {
            Ok(map) => {
                let npy_name = format!("map_i{row}_{method}.npy");
                let file = TensorFile::from_tensor(&map.values, Dtype::F64);
                save_tensor(&file, &ctx.inv.out_dir.join(&npy_name))
                    .map_err(|e| fail(EXIT_IO, format!("cannot write {npy_name}: {e}")))?;
                outputs.push(npy_name);
                let pgm_name = format!("map_i{row}_{method}.pgm");
                save_pgm(&map.values, &ctx.inv.out_dir.join(&pgm_name))
                    .map_err(|e| fail(EXIT_IO, format!("cannot write {pgm_name}: {e}")))?;
                outputs.push(pgm_name);
            }
            Err(e) => failures.push(FailureRecord {
                explainer: method.to_string(),
                instance: row,
                error: e.to_string(),
            }),
        }
    }
    write_manifest(ctx, selection.len(), &outputs, &failures)?;
    finish_with_failures(failures)
}

fn evaluate_image(
    ctx: &RunContext,
    images: &[Tensor],
    selection: &[usize],
    explainers: &[Box<dyn ImageExplainer>],
    metric_cols: &[usize],
    metric_config: &crate::metrics::ImageMetricsConfig,
) -> StepResult<i32> {
    let engine = ImageMetricEngine::new(ctx.model, images, metric_config)
        .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;

    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    let ext = ctx.inv.format.extension();
    for explainer in explainers {
        let results: Vec<_> = selection
            .par_iter()
            .map(|&row| (row, engine.row(explainer.as_ref(), row)))
            .collect();
        let mut rows = Vec::with_capacity(results.len());
        let mut failed = false;
        for (row, result) in results {
            match result {
                Ok(r) => rows.push((row, r)),
                Err(e) => {
                    failed = true;
                    failures.push(FailureRecord {
                        explainer: explainer.name().to_string(),
                        instance: row,
                        error: e.to_string(),
                    });
                }
            }
        }
        if failed {
            continue;
        }

        let (aggregate, _) =
            aggregate_image_rows(&rows.iter().map(|(_, r)| *r).collect::<Vec<_>>());
        let mut agg_table = Table::new(metric_header(metric_cols, &IMAGE_METRIC_COLUMNS))
            .expect("metric columns are nonempty");
        agg_table
            .push_row(
                metric_cols
                    .iter()
                    .map(|&c| Cell::Num(aggregate.as_array()[c]))
                    .collect(),
            )
            .expect("fixed width");
        let agg_name = format!("metrics_{}_aggregate.{ext}", explainer.name());
        write_table(&agg_table, &ctx.inv.out_dir, &agg_name, ctx.inv.format)?;
        outputs.push(agg_name);

        let mut columns = vec!["instance".to_string()];
        columns.extend(metric_header(metric_cols, &IMAGE_METRIC_COLUMNS));
        let mut inst_table = Table::new(columns).expect("static columns");
        for (row, r) in &rows {
            let mut cells = vec![Cell::Int(*row as i64)];
            cells.extend(metric_cols.iter().map(|&c| Cell::Num(r.as_array()[c])));
            inst_table.push_row(cells).expect("fixed width");
        }
        let inst_name = format!("metrics_{}_instances.{ext}", explainer.name());
        write_table(&inst_table, &ctx.inv.out_dir, &inst_name, ctx.inv.format)?;
        outputs.push(inst_name);
    }
    write_manifest(ctx, selection.len(), &outputs, &failures)?;
    finish_with_failures(failures)
}

fn benchmark_image(
    ctx: &RunContext,
    images: &[Tensor],
    selection: &[usize],
    explainers: &[Box<dyn ImageExplainer>],
    metric_cols: &[usize],
    metric_config: &crate::metrics::ImageMetricsConfig,
) -> StepResult<i32> {
    let engine = ImageMetricEngine::new(ctx.model, images, metric_config)
        .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;

    let mut matrix_columns = vec!["explainer".to_string()];
    matrix_columns.extend(metric_header(metric_cols, &IMAGE_METRIC_COLUMNS));
    let mut matrix = Table::new(matrix_columns).expect("static columns");
    let mut provenance = Table::new(
        ["explainer", "metric", "n_instances", "n_undefined", "n_failed"]
            .map(String::from)
            .to_vec(),
    )
    .expect("static columns");

    let mut failures = Vec::new();
    for explainer in explainers {
        let results: Vec<_> = selection
            .par_iter()
            .map(|&row| (row, engine.row(explainer.as_ref(), row)))
            .collect();
        let mut ok_rows = Vec::with_capacity(results.len());
        for (row, result) in results {
            match result {
                Ok(r) => ok_rows.push(r),
                Err(e) => failures.push(FailureRecord {
                    explainer: explainer.name().to_string(),
                    instance: row,
                    error: e.to_string(),
                }),
            }
        }
        let n_failed = selection.len() - ok_rows.len();
        let (aggregate, excluded) = aggregate_image_rows(&ok_rows);
        let mut cells = vec![Cell::Text(explainer.name().to_string())];
        cells.extend(metric_cols.iter().map(|&c| Cell::Num(aggregate.as_array()[c])));
        matrix.push_row(cells).expect("fixed width");
        for &c in metric_cols {
            provenance
                .push_row(vec![
                    Cell::Text(explainer.name().to_string()),
                    Cell::Text(IMAGE_METRIC_COLUMNS[c].to_string()),
                    Cell::Int(ok_rows.len() as i64),
                    Cell::Int(excluded[c] as i64),
                    Cell::Int(n_failed as i64),
                ])
                .expect("fixed width");
        }
    }

    let ext = ctx.inv.format.extension();
    let matrix_name = format!("benchmark_matrix.{ext}");
    let prov_name = format!("benchmark_provenance.{ext}");
    write_table(&matrix, &ctx.inv.out_dir, &matrix_name, ctx.inv.format)?;
    write_table(&provenance, &ctx.inv.out_dir, &prov_name, ctx.inv.format)?;
    let outputs = vec![matrix_name, prov_name];
    write_manifest(ctx, selection.len(), &outputs, &failures)?;
    if !failures.is_empty() {
        eprintln!(
            "warning: {} cell computation(s) failed; see manifest.json",
            failures.len()
        );
    }
    Ok(EXIT_OK)
}
