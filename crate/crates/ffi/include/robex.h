/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef ROBEX_H
#define ROBEX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum RobexStatus {
  ROBEX_STATUS_OK = 0,
  ROBEX_STATUS_NULL_POINTER = 1,
  /**
   * Bad value or buffer length.
   */
  ROBEX_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Unreadable file or malformed model text.
   */
  ROBEX_STATUS_IO = 3,
  ROBEX_STATUS_NUMERIC = 4,
  ROBEX_STATUS_PANIC = 5,
} RobexStatus;

/**
 * Attribution methods available through the C ABI.
 */
typedef enum RobexMethod {
  ROBEX_METHOD_GRAD = 0,
  /**
   * Uses `baseline` and `steps`.
   */
  ROBEX_METHOD_IG = 1,
  /**
   * Uses `baseline` as the reference value.
   */
  ROBEX_METHOD_LOO = 2,
  /**
   * Uses `seed`.
   */
  ROBEX_METHOD_RANDOM = 3,
  /**
   * Uses `baseline` as a single background point, `steps` samples and `seed`.
   */
  ROBEX_METHOD_EG = 4,
} RobexMethod;

/**
 * Opaque model handle.
 */
typedef struct RobexModel RobexModel;

/**
 * Attack settings; `robex_attack_config_default` fills in the defaults.
 * A non-positive `eps_cap` means `2·√d`; `use_clip` enables the box.
 */
typedef struct RobexAttackConfig {
  double step_size;
  uint32_t num_steps;
  uint32_t binsearch_iters;
  double eps_cap;
  bool use_clip;
  double clip_lo;
  double clip_hi;
} RobexAttackConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *robex_last_error(void);

/**
 * Loads a model JSON file into `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RobexStatus robex_model_load(const char *path, struct RobexModel **out);

/**
 * Parses model JSON text into `*out`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RobexStatus robex_model_from_json(const char *json, struct RobexModel **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void robex_model_free(struct RobexModel *model);

/**
 * Input dimension, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t robex_model_input_dim(const struct RobexModel *model);

/**
 * Number of classes, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t robex_model_num_classes(const struct RobexModel *model);

/**
 * Writes the logits of `x` into `logits` (capacity `logits_len`).
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum RobexStatus robex_model_forward(const struct RobexModel *model,
                                     const double *x,
                                     size_t x_len,
                                     double *logits,
                                     size_t logits_len);

/**
 * Writes the predicted class of `x` into `*class_out`.
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum RobexStatus robex_model_predict(const struct RobexModel *model,
                                     const double *x,
                                     size_t x_len,
                                     size_t *class_out);

struct RobexAttackConfig robex_attack_config_default(void);

/**
 * Smallest L2 perturbation found on the features `subset[0..subset_len]`
 * that changes the prediction of `x` (`target < 0`) or makes `target` the
 * prediction. Writes the norm, success and cap flags, and optionally the
 * perturbation (`delta_out` may be null).
 *
 * # Safety
 * Pointers must be valid for the given lengths; `config` may be null for
 * defaults.
 */
enum RobexStatus robex_min_perturbation(const struct RobexModel *model,
                                        const double *x,
                                        size_t x_len,
                                        const size_t *subset,
                                        size_t subset_len,
                                        int64_t target,
                                        const struct RobexAttackConfig *config,
                                        double *norm_out,
                                        bool *success_out,
                                        bool *capped_out,
                                        double *delta_out,
                                        size_t delta_len);

/**
 * Attribution scores of `x` under `method`. `baseline` (length `x_len`) is
 * required by IG, LOO and EG and ignored otherwise. `ranking_out` may be
 * null; when given it receives feature indices, most relevant first.
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum RobexStatus robex_attribution(const struct RobexModel *model,
                                   enum RobexMethod method,
                                   const double *x,
                                   size_t x_len,
                                   const double *baseline,
                                   size_t steps,
                                   uint64_t seed,
                                   double *scores_out,
                                   size_t scores_len,
                                   size_t *ranking_out,
                                   size_t ranking_len);

/**
 * Trapezoidal area under the curve through `(xs[i], ys[i])`.
 *
 * # Safety
 * `xs` and `ys` must hold `len` values.
 */
enum RobexStatus robex_auc(const double *xs, const double *ys, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBEX_H */
