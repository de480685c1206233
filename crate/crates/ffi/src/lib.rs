//! C ABI surface over the attriq engine: opaque model handles, integer
//! status codes, and a thread-local last-error message.
//!
//! Every function that can fail returns an [`AttriqStatus`]; on anything
//! other than `Ok` the caller can fetch a human-readable reason from
//! [`attriq_last_error_message`] (valid until the next failing call on the
//! same thread). Buffers are always caller-allocated; the length
//! conventions are documented per function. The matching C header is
//! generated by cbindgen into `include/attriq.h` at build time.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::slice;

use attriq::attrib::Background;
use attriq::bench::ExplainerConfig;
use attriq::io::TabularDataset;
use attriq::metrics::{MetricEngine, MetricsConfig, METRIC_COLUMNS};
use attriq::model::Model;

/// Result of every fallible call in this ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttriqStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The file could not be read or written.
    Io = 3,
    /// Arguments were structurally wrong: bad method name, length
    /// mismatch, out-of-range index, malformed model document.
    InvalidArgument = 4,
    /// The computation itself failed (for example a gradient method on a
    /// tree ensemble).
    ComputeFailed = 5,
    /// An output buffer is shorter than the documented requirement.
    BufferTooSmall = 6,
}

/// Opaque handle to a loaded model; create with [`attriq_model_load`],
/// destroy with [`attriq_model_free`].
pub struct AttriqModel {
    inner: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let sanitized = msg.into().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NULs removed");
    });
}

fn error_status(err: &attriq::Error) -> AttriqStatus {
    match err {
        attriq::Error::Io(_) => AttriqStatus::Io,
        _ => AttriqStatus::InvalidArgument,
    }
}

/// The engine version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn attriq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread; empty until
/// a call fails. The pointer stays valid until the next failing call on
/// the same thread.
#[no_mangle]
pub extern "C" fn attriq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn parse_utf8<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, AttriqStatus> {
    if ptr.is_null() {
        set_error(format!("{what} must not be null"));
        return Err(AttriqStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        AttriqStatus::InvalidUtf8
    })
}

/// Load a model document from `path` into a fresh handle written to
/// `*out`. On failure `*out` is untouched.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn attriq_model_load(
    path: *const c_char,
    out: *mut *mut AttriqModel,
) -> AttriqStatus {
    if out.is_null() {
        set_error("out must not be null");
        return AttriqStatus::NullArgument;
    }
    let path = match parse_utf8(path, "path") {
        Ok(p) => p,
        Err(status) => return status,
    };
    match attriq::io::load_model(std::path::Path::new(path)) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(AttriqModel { inner: model }));
            AttriqStatus::Ok
        }
        Err(e) => {
            let status = error_status(&e);
            set_error(format!("cannot load model {path}: {e}"));
            status
        }
    }
}

/// Release a handle returned by [`attriq_model_load`]; null is a no-op.
///
/// # Safety
/// `model` must be null or a pointer from [`attriq_model_load`] that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn attriq_model_free(model: *mut AttriqModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Flattened input length the model expects; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn attriq_model_n_inputs(model: *const AttriqModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.n_inputs())
}

/// Number of output classes; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn attriq_model_n_classes(model: *const AttriqModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.n_classes())
}

/// Model family name ("linear", "tree-ensemble", "sequential-net") as a
/// static string; empty for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn attriq_model_family(model: *const AttriqModel) -> *const c_char {
    match model.as_ref().map(|m| m.inner.family()) {
        Some("linear") => "linear\0".as_ptr() as *const c_char,
        Some("tree-ensemble") => "tree-ensemble\0".as_ptr() as *const c_char,
        Some("sequential-net") => "sequential-net\0".as_ptr() as *const c_char,
        _ => "\0".as_ptr() as *const c_char,
    }
}

/// Score `x` (length `x_len`, which must equal the model's input count).
/// Per-class scores are written to `scores` (length `scores_len >=`
/// class count) and the argmax class to `*predicted`; either output may
/// be null to skip it.
///
/// # Safety
/// All non-null pointers must reference buffers of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn attriq_model_predict(
    model: *const AttriqModel,
    x: *const f64,
    x_len: usize,
    scores: *mut f64,
    scores_len: usize,
    predicted: *mut usize,
) -> AttriqStatus {
    let Some(model) = model.as_ref() else {
        set_error("model must not be null");
        return AttriqStatus::NullArgument;
    };
    if x.is_null() {
        set_error("x must not be null");
        return AttriqStatus::NullArgument;
    }
    let x = slice::from_raw_parts(x, x_len);
    let output = match model.inner.predict_slice(x) {
        Ok(o) => o,
        Err(e) => {
            let status = error_status(&e);
            set_error(e.to_string());
            return status;
        }
    };
    if !scores.is_null() {
        if scores_len < output.scores.len() {
            set_error(format!(
                "scores buffer holds {scores_len} values but the model has {} classes",
                output.scores.len()
            ));
            return AttriqStatus::BufferTooSmall;
        }
        slice::from_raw_parts_mut(scores, output.scores.len()).copy_from_slice(&output.scores);
    }
    if !predicted.is_null() {
        *predicted = output.predicted_class;
    }
    AttriqStatus::Ok
}

fn build_explainer(
    method: &str,
    background: &Background,
) -> Result<Box<dyn attriq::attrib::TabularExplainer>, (AttriqStatus, String)> {
    let config: ExplainerConfig =
        serde_json::from_value(serde_json::json!({ "method": method }))
            .map_err(|e| (AttriqStatus::InvalidArgument, e.to_string()))?;
    config
        .build_tabular(background)
        .map_err(|e| (AttriqStatus::InvalidArgument, e.to_string()))
}

/// Explain one instance with a tabular method (same names and defaults as
/// the CLI: exact_shapley, kernel_shap, lime, integrated_gradients,
/// saliency, grad_x_input, feature_ablation).
///
/// `x` has `n_features` values; `background` is a row-major matrix of
/// `background_rows x n_features` reference samples (at least one row).
/// `target_class < 0` explains the model's own prediction. Attributions
/// are written to `out_values` (length `n_features`).
///
/// # Safety
/// All pointers must reference buffers of the stated lengths; `method`
/// must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn attriq_explain_tabular(
    model: *const AttriqModel,
    method: *const c_char,
    x: *const f64,
    n_features: usize,
    background: *const f64,
    background_rows: usize,
    target_class: i64,
    seed: u64,
    out_values: *mut f64,
) -> AttriqStatus {
    let Some(model) = model.as_ref() else {
        set_error("model must not be null");
        return AttriqStatus::NullArgument;
    };
    if x.is_null() || background.is_null() || out_values.is_null() {
        set_error("x, background, and out_values must not be null");
        return AttriqStatus::NullArgument;
    }
    let method = match parse_utf8(method, "method") {
        Ok(m) => m,
        Err(status) => return status,
    };
    if background_rows == 0 {
        set_error("background must contain at least one row");
        return AttriqStatus::InvalidArgument;
    }
    let x = slice::from_raw_parts(x, n_features);
    let flat = slice::from_raw_parts(background, background_rows * n_features);
    let rows: Vec<Vec<f64>> = flat.chunks(n_features).map(<[f64]>::to_vec).collect();
    let background = match Background::new(rows) {
        Ok(b) => b,
        Err(e) => {
            set_error(e.to_string());
            return AttriqStatus::InvalidArgument;
        }
    };
    let explainer = match build_explainer(method, &background) {
        Ok(e) => e,
        Err((status, msg)) => {
            set_error(msg);
            return status;
        }
    };
    let class = if target_class < 0 {
        match model.inner.predict_slice(x) {
            Ok(o) => o.predicted_class,
            Err(e) => {
                let status = error_status(&e);
                set_error(e.to_string());
                return status;
            }
        }
    } else {
        target_class as usize
    };
    match explainer.explain(&model.inner, x, class, seed) {
        Ok(attr) => {
            slice::from_raw_parts_mut(out_values, n_features).copy_from_slice(&attr.values);
            AttriqStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            AttriqStatus::ComputeFailed
        }
    }
}

/// Number of values produced per instance by [`attriq_metrics_tabular`].
#[no_mangle]
pub extern "C" fn attriq_metric_count() -> usize {
    METRIC_COLUMNS.len()
}

/// Name of metric column `index` (report order), or null when out of
/// range. The returned pointer is static.
#[no_mangle]
pub extern "C" fn attriq_metric_name(index: usize) -> *const c_char {
    const NAMES: [&str; 8] = [
        "faithfulness\0",
        "infidelity\0",
        "sensitivity\0",
        "comprehensiveness\0",
        "sufficiency\0",
        "monotonicity\0",
        "complexity\0",
        "sparseness\0",
    ];
    match NAMES.get(index) {
        Some(name) => name.as_ptr() as *const c_char,
        None => std::ptr::null(),
    }
}

/// Score one instance of a dataset with the full tabular metric suite.
///
/// `data` is a row-major `n_rows x n_features` matrix; it doubles as the
/// background set (baseline = column means, as in the CLI). The chosen
/// `method` explains row `instance` and the eight metric values are
/// written to `out_row` (length `out_len >= attriq_metric_count()`), in
/// report column order. Metrics that are undefined for the instance come
/// back as NaN.
///
/// # Safety
/// All pointers must reference buffers of the stated lengths; `method`
/// must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn attriq_metrics_tabular(
    model: *const AttriqModel,
    method: *const c_char,
    data: *const f64,
    n_rows: usize,
    n_features: usize,
    instance: usize,
    seed: u64,
    out_row: *mut f64,
    out_len: usize,
) -> AttriqStatus {
    let Some(model) = model.as_ref() else {
        set_error("model must not be null");
        return AttriqStatus::NullArgument;
    };
    if data.is_null() || out_row.is_null() {
        set_error("data and out_row must not be null");
        return AttriqStatus::NullArgument;
    }
    let method = match parse_utf8(method, "method") {
        Ok(m) => m,
        Err(status) => return status,
    };
    if out_len < METRIC_COLUMNS.len() {
        set_error(format!(
            "out_row holds {out_len} values but the suite has {} metrics",
            METRIC_COLUMNS.len()
        ));
        return AttriqStatus::BufferTooSmall;
    }
    if instance >= n_rows {
        set_error(format!(
            "instance index {instance} out of range (dataset has {n_rows} rows)"
        ));
        return AttriqStatus::InvalidArgument;
    }
    let flat = slice::from_raw_parts(data, n_rows * n_features);
    let rows: Vec<Vec<f64>> = flat.chunks(n_features).map(<[f64]>::to_vec).collect();
    let names = (0..n_features).map(|i| format!("f{i}")).collect();
    let dataset = match TabularDataset::new(rows.clone(), names, None) {
        Ok(d) => d,
        Err(e) => {
            set_error(e.to_string());
            return AttriqStatus::InvalidArgument;
        }
    };
    let background = match Background::new(rows) {
        Ok(b) => b,
        Err(e) => {
            set_error(e.to_string());
            return AttriqStatus::InvalidArgument;
        }
    };
    let explainer = match build_explainer(method, &background) {
        Ok(e) => e,
        Err((status, msg)) => {
            set_error(msg);
            return status;
        }
    };
    let config = MetricsConfig {
        seed,
        ..MetricsConfig::default()
    };
    let engine = match MetricEngine::new(&model.inner, &dataset, &config) {
        Ok(e) => e,
        Err(e) => {
            set_error(e.to_string());
            return AttriqStatus::InvalidArgument;
        }
    };
    match engine.row(explainer.as_ref(), instance) {
        Ok(row) => {
            slice::from_raw_parts_mut(out_row, METRIC_COLUMNS.len())
                .copy_from_slice(&row.as_array());
            AttriqStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            AttriqStatus::ComputeFailed
        }
    }
}
