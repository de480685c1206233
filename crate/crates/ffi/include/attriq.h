#ifndef ATTRIQ_H
#define ATTRIQ_H

/* Generated by cbindgen from the attriq-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call in this ABI.
 */
typedef enum AttriqStatus {
  ATTRIQ_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  ATTRIQ_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  ATTRIQ_STATUS_INVALID_UTF8 = 2,
  /**
   * The file could not be read or written.
   */
  ATTRIQ_STATUS_IO = 3,
  /**
   * Arguments were structurally wrong: bad method name, length
   * mismatch, out-of-range index, malformed model document.
   */
  ATTRIQ_STATUS_INVALID_ARGUMENT = 4,
  /**
   * The computation itself failed (for example a gradient method on a
   * tree ensemble).
   */
  ATTRIQ_STATUS_COMPUTE_FAILED = 5,
  /**
   * An output buffer is shorter than the documented requirement.
   */
  ATTRIQ_STATUS_BUFFER_TOO_SMALL = 6,
} AttriqStatus;

/**
 * Opaque handle to a loaded model; create with [`attriq_model_load`],
 * destroy with [`attriq_model_free`].
 */
typedef struct AttriqModel AttriqModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The engine version as a static NUL-terminated string.
 */
const char *attriq_version(void);

/**
 * Message describing the most recent failure on this thread; empty until
 * a call fails. The pointer stays valid until the next failing call on
 * the same thread.
 */
const char *attriq_last_error_message(void);

/**
 * Load a model document from `path` into a fresh handle written to
 * `*out`. On failure `*out` is untouched.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AttriqStatus attriq_model_load(const char *path, struct AttriqModel **out);

/**
 * Release a handle returned by [`attriq_model_load`]; null is a no-op.
 *
 * # Safety
 * `model` must be null or a pointer from [`attriq_model_load`] that has
 * not been freed yet.
 */
void attriq_model_free(struct AttriqModel *model);

/**
 * Flattened input length the model expects; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t attriq_model_n_inputs(const struct AttriqModel *model);

/**
 * Number of output classes; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t attriq_model_n_classes(const struct AttriqModel *model);

/**
 * Model family name ("linear", "tree-ensemble", "sequential-net") as a
 * static string; empty for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
const char *attriq_model_family(const struct AttriqModel *model);

/**
 * Score `x` (length `x_len`, which must equal the model's input count).
 * Per-class scores are written to `scores` (length `scores_len >=`
 * class count) and the argmax class to `*predicted`; either output may
 * be null to skip it.
 *
 * # Safety
 * All non-null pointers must reference buffers of the stated lengths.
 */
enum AttriqStatus attriq_model_predict(const struct AttriqModel *model,
                                       const double *x,
                                       size_t x_len,
                                       double *scores,
                                       size_t scores_len,
                                       size_t *predicted);

/**
 * Explain one instance with a tabular method (same names and defaults as
 * the CLI: exact_shapley, kernel_shap, lime, integrated_gradients,
 * saliency, grad_x_input, feature_ablation).
 *
 * `x` has `n_features` values; `background` is a row-major matrix of
 * `background_rows x n_features` reference samples (at least one row).
 * `target_class < 0` explains the model's own prediction. Attributions
 * are written to `out_values` (length `n_features`).
 *
 * # Safety
 * All pointers must reference buffers of the stated lengths; `method`
 * must be NUL-terminated.
 */
enum AttriqStatus attriq_explain_tabular(const struct AttriqModel *model,
                                         const char *method,
                                         const double *x,
                                         size_t n_features,
                                         const double *background,
                                         size_t background_rows,
                                         int64_t target_class,
                                         uint64_t seed,
                                         double *out_values);

/**
 * Number of values produced per instance by [`attriq_metrics_tabular`].
 */
size_t attriq_metric_count(void);

/**
 * Name of metric column `index` (report order), or null when out of
 * range. The returned pointer is static.
 */
const char *attriq_metric_name(size_t index);

/**
 * Score one instance of a dataset with the full tabular metric suite.
 *
 * `data` is a row-major `n_rows x n_features` matrix; it doubles as the
 * background set (baseline = column means, as in the CLI). The chosen
 * `method` explains row `instance` and the eight metric values are
 * written to `out_row` (length `out_len >= attriq_metric_count()`), in
 * report column order. Metrics that are undefined for the instance come
 * back as NaN.
 *
 * # Safety
 * All pointers must reference buffers of the stated lengths; `method`
 * must be NUL-terminated.
 */
enum AttriqStatus attriq_metrics_tabular(const struct AttriqModel *model,
                                         const char *method,
                                         const double *data,
                                         size_t n_rows,
                                         size_t n_features,
                                         size_t instance,
                                         uint64_t seed,
                                         double *out_row,
                                         size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ATTRIQ_H */
