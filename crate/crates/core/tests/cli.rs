//! End-to-end tests of the `attriq` binary: exit codes, report layout,
//! manifest contents, and thread-count invariance, all driven through the
//! shipped fixture configs plus purpose-built broken ones.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use attriq::io::{load_tensor, save_tensor, Dtype, TensorFile};
use attriq::tensor::Tensor;

const BIN: &str = env!("CARGO_BIN_EXE_attriq");

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .ancestors()
        .nth(2)
        .expect("workspace root")
        .to_path_buf()
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(repo_root())
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_manifest(dir: &Path) -> serde_json::Value {
    let raw = fs::read_to_string(dir.join("manifest.json")).expect("manifest.json exists");
    serde_json::from_str(&raw).expect("manifest parses")
}

fn write_config(dir: &Path, value: &serde_json::Value) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

#[test]
fn validate_summarizes_without_writing_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("never-created");
    let out = run(&[
        "validate",
        "--config",
        "fixtures/run_tabular_eval.json",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("config: ok"), "got: {text}");
    assert!(text.contains("explainers: saliency"), "got: {text}");
    assert!(!out_dir.exists(), "validate must not create the out dir");
}

#[test]
fn explain_writes_attribution_tables_sorted_by_magnitude() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "explain",
        "--config",
        "fixtures/run_tabular_eval.json",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let table = fs::read_to_string(tmp.path().join("attribution_i0_saliency.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("idx,feature,value,attribution"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    // regression fixture weights are [0.5, -1.25, 2.0, 3.5]; saliency is
    // the absolute gradient, so the order is fixed
    assert_eq!(rows[0][0], "3");
    // the feature column carries the CSV header names
    assert_eq!(rows[0][1], "petal_wid");
    let mags: Vec<f64> = rows.iter().map(|r| r[3].parse::<f64>().unwrap().abs()).collect();
    assert!(mags.windows(2).all(|w| w[0] >= w[1]), "not sorted: {mags:?}");

    let manifest = read_manifest(tmp.path());
    assert_eq!(manifest["command"], "explain");
    assert_eq!(manifest["n_instances"], 12);
    assert_eq!(manifest["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn evaluate_emits_canonical_header_and_per_instance_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "evaluate",
        "--config",
        "fixtures/run_tabular_eval.json",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let agg = fs::read_to_string(tmp.path().join("metrics_saliency_aggregate.csv")).unwrap();
    let mut lines = agg.lines();
    assert_eq!(
        lines.next(),
        Some("faithfulness,infidelity,sensitivity,comprehensiveness,sufficiency,monotonicity,complexity,sparseness")
    );
    let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(cells[6], "4.0", "complexity cell");
    assert_eq!(cells[7], "0.0", "sparseness cell");

    let inst = fs::read_to_string(tmp.path().join("metrics_saliency_instances.csv")).unwrap();
    let lines: Vec<&str> = inst.lines().collect();
    assert!(lines[0].starts_with("instance,faithfulness,"));
    assert_eq!(lines.len(), 1 + 12);
    assert!(lines[1].starts_with("0,"));
}

#[test]
fn benchmark_reports_are_invariant_to_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let (d1, d8) = (tmp.path().join("j1"), tmp.path().join("j8"));
    for (dir, jobs) in [(&d1, "1"), (&d8, "8")] {
        let out = run(&[
            "benchmark",
            "--config",
            "fixtures/run_tree_bench.json",
            "--out",
            dir.to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    }
    for name in ["benchmark_matrix.csv", "benchmark_provenance.csv"] {
        let a = fs::read(d1.join(name)).unwrap();
        let b = fs::read(d8.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between --jobs 1 and --jobs 8");
    }
    let mut m1 = read_manifest(&d1);
    let mut m8 = read_manifest(&d8);
    m1.as_object_mut().unwrap().remove("wall_time_ms");
    m8.as_object_mut().unwrap().remove("wall_time_ms");
    assert_eq!(m1, m8);
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = run(&["explain", "--config", "fixtures/no_such_config.json"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
}

#[test]
fn malformed_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    fs::write(&path, "{ not json").unwrap();
    let out = run(&["explain", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
}

#[test]
fn unknown_method_is_rejected_with_the_valid_list() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        &serde_json::json!({
            "model_path": "fixtures/linear_model.json",
            "data_path": "fixtures/iris_like.csv",
            "task": "multiclass-classification",
            "seed": 1,
            "explainers": [{"method": "shapley_sampling"}],
            "data": {"label_column": "species"}
        }),
    );
    let out = run(&["validate", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("shapley_sampling"), "got: {err}");
    assert!(err.contains("exact_shapley"), "error should list valid methods: {err}");
}

#[test]
fn out_of_range_instance_index_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        &serde_json::json!({
            "model_path": "fixtures/linear_model.json",
            "data_path": "fixtures/iris_like.csv",
            "task": "multiclass-classification",
            "seed": 1,
            "explainers": [{"method": "saliency"}],
            "instances": {"indices": [0, 99]},
            "data": {"label_column": "species"}
        }),
    );
    let out = run(&["evaluate", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("99"), "got: {}", stderr(&out));
}

#[test]
fn duplicate_methods_are_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        &serde_json::json!({
            "model_path": "fixtures/linear_model.json",
            "data_path": "fixtures/iris_like.csv",
            "task": "multiclass-classification",
            "seed": 1,
            "explainers": [{"method": "saliency"}, {"method": "saliency"}],
            "data": {"label_column": "species"}
        }),
    );
    let out = run(&["validate", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn image_method_on_a_tabular_model_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        &serde_json::json!({
            "model_path": "fixtures/linear_model.json",
            "data_path": "fixtures/images.npy",
            "task": "multiclass-classification",
            "seed": 1,
            "explainers": [{"method": "saliency_map"}]
        }),
    );
    let out = run(&["explain", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
}

#[test]
fn gradient_method_on_a_tree_model_is_a_computation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        &serde_json::json!({
            "model_path": "fixtures/tree_model.json",
            "data_path": "fixtures/iris_like.csv",
            "task": "multiclass-classification",
            "seed": 1,
            "explainers": [{"method": "integrated_gradients"}],
            "instances": {"head": 2},
            "data": {"label_column": "species"}
        }),
    );
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "explain",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "stderr: {}", stderr(&out));
    let manifest = read_manifest(&out_dir);
    assert_eq!(manifest["failures"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["warnings"], true);
}

#[test]
fn benchmark_isolates_failing_cells_and_still_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        &serde_json::json!({
            "model_path": "fixtures/tree_model.json",
            "data_path": "fixtures/iris_like.csv",
            "task": "multiclass-classification",
            "seed": 1,
            "explainers": [{"method": "exact_shapley"}, {"method": "saliency"}],
            "instances": {"head": 3},
            "data": {"label_column": "species"}
        }),
    );
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "benchmark",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("warning"), "got: {}", stderr(&out));

    let matrix = fs::read_to_string(out_dir.join("benchmark_matrix.csv")).unwrap();
    let saliency_row = matrix
        .lines()
        .find(|l| l.starts_with("saliency,"))
        .expect("saliency row present");
    assert!(saliency_row.contains("undefined"), "got: {saliency_row}");
    let shap_row = matrix
        .lines()
        .find(|l| l.starts_with("exact_shapley,"))
        .expect("exact_shapley row present");
    assert!(!shap_row.contains("undefined"), "got: {shap_row}");

    let provenance = fs::read_to_string(out_dir.join("benchmark_provenance.csv")).unwrap();
    assert!(provenance.contains("saliency,faithfulness,0,0,3"), "got: {provenance}");
    assert!(provenance.contains("exact_shapley,faithfulness,3,0,0"), "got: {provenance}");
    assert_eq!(read_manifest(&out_dir)["warnings"], true);
}

#[test]
fn seed_flag_overrides_the_config_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "evaluate",
        "--config",
        "fixtures/run_tabular_eval.json",
        "--seed",
        "123",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read_manifest(tmp.path())["seed"], 123);
}

#[test]
fn json_and_markdown_formats_are_honored() {
    let tmp = tempfile::tempdir().unwrap();
    let json_dir = tmp.path().join("json");
    let md_dir = tmp.path().join("md");
    for (dir, format) in [(&json_dir, "json"), (&md_dir, "markdown")] {
        let out = run(&[
            "evaluate",
            "--config",
            "fixtures/run_tabular_eval.json",
            "--out",
            dir.to_str().unwrap(),
            "--format",
            format,
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    }
    let raw = fs::read_to_string(json_dir.join("metrics_saliency_aggregate.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&raw).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 1);
    assert_eq!(parsed[0]["complexity"], 4.0);

    let md = fs::read_to_string(md_dir.join("metrics_saliency_aggregate.md")).unwrap();
    assert!(md.starts_with("| faithfulness"), "got: {md}");
}

#[test]
fn image_explain_writes_npy_and_pgm_maps() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "explain",
        "--config",
        "fixtures/run_image.json",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    for method in [
        "saliency_map",
        "grad_input_map",
        "integrated_gradients_map",
        "smoothgrad",
        "occlusion_sensitivity",
        "grad_cam",
    ] {
        for i in 0..4 {
            assert!(tmp.path().join(format!("map_i{i}_{method}.npy")).exists());
            assert!(tmp.path().join(format!("map_i{i}_{method}.pgm")).exists());
        }
    }
    let map = load_tensor(&tmp.path().join("map_i0_grad_cam.npy"))
        .unwrap()
        .into_tensor()
        .unwrap();
    assert_eq!(map.shape(), [8, 8]);
    let pgm = fs::read(tmp.path().join("map_i0_grad_cam.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n8 8\n255\n"), "unexpected pgm header");
    assert_eq!(pgm.len(), b"P5\n8 8\n255\n".len() + 64, "one byte per pixel");
}

#[test]
fn wrong_rank_image_stack_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let npy = tmp.path().join("flat.npy");
    save_tensor(
        &TensorFile::from_tensor(&Tensor::zeros(vec![2, 8, 8]), Dtype::F64),
        &npy,
    )
    .unwrap();
    let config = write_config(
        tmp.path(),
        &serde_json::json!({
            "model_path": "fixtures/net_model.json",
            "data_path": npy,
            "task": "multiclass-classification",
            "seed": 1,
            "explainers": [{"method": "saliency_map"}]
        }),
    );
    let out = run(&["explain", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("rank-4"), "got: {}", stderr(&out));
}

#[test]
fn jobs_env_var_is_accepted_as_fallback() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .current_dir(repo_root())
        .env("ATTRIQ_JOBS", "2")
        .args([
            "evaluate",
            "--config",
            "fixtures/run_tabular_eval.json",
            "--out",
            tmp.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
}
