#ifndef VKOGA_IE_H
#define VKOGA_IE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. `VKIE_STATUS_OK` is zero.
typedef enum VkieStatus {
  VKIE_STATUS_OK = 0,
  VKIE_STATUS_NULL_POINTER = 1,
  VKIE_STATUS_INVALID_ARGUMENT = 2,
  VKIE_STATUS_DIMENSION_MISMATCH = 3,
  VKIE_STATUS_IO = 4,
  VKIE_STATUS_FORMAT = 5,
  VKIE_STATUS_NUMERICAL = 6,
  VKIE_STATUS_PANIC = 7,
} VkieStatus;

// Greedy selection rule for [`vkie_train`].
typedef enum VkieRule {
  VKIE_RULE_F = 0,
  VKIE_RULE_P = 1,
  VKIE_RULE_FP = 2,
} VkieRule;

// Opaque trained surrogate.
typedef struct VkieModel VkieModel;

// Statistics of a [`vkie_burgers_integrate`] run.
typedef struct VkieRunStats {
  size_t steps;
  size_t total_iterations;
  double mean_iterations;
  double mean_initializer_residual;
  double wall_time_s;
  // 1 if every step converged, 0 if the run stopped early.
  int32_t completed;
} VkieRunStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *vkie_version(void);

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *vkie_last_error_message(void);

// Loads a model file and stores a new handle in `*out`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum VkieStatus vkie_model_load(const char *path, struct VkieModel **out);

// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
enum VkieStatus vkie_model_save(const struct VkieModel *model, const char *path);

// Releases a handle. NULL is ignored.
//
// # Safety
// `model` must come from this library and must not be used afterwards.
void vkie_model_free(struct VkieModel *model);

// Input dimension `1 + state_dim`; 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t vkie_model_input_dim(const struct VkieModel *model);

// # Safety
// `model` must be NULL or a live handle.
size_t vkie_model_output_dim(const struct VkieModel *model);

// # Safety
// `model` must be NULL or a live handle.
size_t vkie_model_num_centers(const struct VkieModel *model);

// Kernel shape parameter; NaN for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
double vkie_model_epsilon(const struct VkieModel *model);

// Evaluates the model at a raw input `x` of length `input_dim`.
//
// # Safety
// `x` must point to `x_len` doubles and `out` to `out_len` writable doubles.
enum VkieStatus vkie_model_eval(const struct VkieModel *model,
                                const double *x,
                                size_t x_len,
                                double *out,
                                size_t out_len);

// Predicts the next state from `u_prev` for timestep `dt`.
//
// # Safety
// `u_prev` must point to `len` doubles and `out` to `len` writable doubles.
enum VkieStatus vkie_model_predict_step(const struct VkieModel *model,
                                        double dt,
                                        const double *u_prev,
                                        double *out,
                                        size_t len);

// Trains a one-step surrogate on raw pairs at a fixed shape parameter.
//
// `inputs` is row-major `n x (state_dim + 1)` with rows `(dt, u)`, and
// `targets` is row-major `n x state_dim`. `max_centers = 0` means no cap.
//
// # Safety
// Array pointers must cover the stated sizes; `out` must be valid.
enum VkieStatus vkie_train(const double *inputs,
                           const double *targets,
                           size_t n,
                           size_t state_dim,
                           double epsilon,
                           double tolerance,
                           size_t max_centers,
                           enum VkieRule rule,
                           struct VkieModel **out);

// Gaussian kernel value `exp(-epsilon^2 |x - y|^2)`.
//
// # Safety
// `x` and `y` must point to `dim` doubles; `out` must be valid.
enum VkieStatus vkie_gaussian(const double *x,
                              const double *y,
                              size_t dim,
                              double epsilon,
                              double *out);

// Integrates the Burgers Riemann problem with implicit Euler.
//
// With `model` NULL each Newton solve starts from the previous state,
// otherwise from the model prediction. `final_state` may be NULL; if given
// it receives the last computed state (`cells` values). A run that stops
// early returns `VKIE_STATUS_NUMERICAL` with `stats.completed = 0`.
//
// # Safety
// `model` must be NULL or a live handle, `stats` valid, and `final_state`
// NULL or `cells` writable doubles.
enum VkieStatus vkie_burgers_integrate(size_t cells,
                                       double half_width,
                                       double u_left,
                                       double u_right,
                                       double dt,
                                       double t_end,
                                       const struct VkieModel *model,
                                       struct VkieRunStats *stats,
                                       double *final_state);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VKOGA_IE_H */
