#ifndef HYDROSENSE_H
#define HYDROSENSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_POINTER = 1,
  HS_STATUS_INVALID_ARGUMENT = 2,
  HS_STATUS_IO = 3,
  HS_STATUS_PARSE = 4,
  HS_STATUS_NUMERIC = 5,
  HS_STATUS_DEGENERATE = 6,
  HS_STATUS_PANIC = 7,
} HsStatus;

/**
 * A loaded checkpoint.
 */
typedef struct HsModel HsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hs_version(void);

/**
 * Message of the last failed call on this thread, or an empty string.
 * Valid until the next call on this thread.
 */
const char *hs_last_error(void);

/**
 * Loads a checkpoint file into `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum HsStatus hs_model_load(const char *path, struct HsModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from [`hs_model_load`] and not be freed twice.
 */
void hs_model_free(struct HsModel *model);

/**
 * Hidden size, static and dynamic input counts, and lookback length.
 * Any output pointer may be null.
 *
 * # Safety
 * `m` must be a live model; non-null outputs must be writable.
 */
enum HsStatus hs_model_dims(const struct HsModel *m,
                            size_t *hidden,
                            size_t *n_static,
                            size_t *n_dynamic,
                            size_t *lookback);

/**
 * Standardized prediction for one window, written to `*yhat`.
 *
 * # Safety
 * Pointers must reference `n_static`, `steps * n_dynamic` and 1 values.
 */
enum HsStatus hs_model_predict(const struct HsModel *m,
                               const double *x_s,
                               size_t n_static,
                               const double *x_d,
                               size_t steps,
                               size_t n_dynamic,
                               double *yhat);

/**
 * Prediction and its gradient with respect to the standardized static
 * inputs (`n_static` values into `grad`).
 *
 * # Safety
 * Pointers must reference `n_static`, `steps * n_dynamic`, 1 and
 * `n_static` values.
 */
enum HsStatus hs_model_static_gradient(const struct HsModel *m,
                                       const double *x_s,
                                       size_t n_static,
                                       const double *x_d,
                                       size_t steps,
                                       size_t n_dynamic,
                                       double *yhat,
                                       double *grad);

/**
 * 5th and 95th percentiles (linear interpolation between order statistics).
 *
 * # Safety
 * `q` must reference `n` values; outputs must be writable.
 */
enum HsStatus hs_flow_percentiles(const double *q, size_t n, double *q05, double *q95);

/**
 * Min-max scaling of `n` values into `out`. `*degenerate` is set to 1 when
 * all values are equal (the output is then all zeros), else 0.
 *
 * # Safety
 * `v` and `out` must reference `n` values; `degenerate` may be null.
 */
enum HsStatus hs_normalize_unit(const double *v, size_t n, double *out, int32_t *degenerate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYDROSENSE_H */
