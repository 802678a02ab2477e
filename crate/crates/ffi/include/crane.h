#ifndef CRANE_H
#define CRANE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CraneStatus {
  CRANE_STATUS_OK = 0,
  /**
   * Null pointer, bad UTF-8 or an index out of range.
   */
  CRANE_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Configuration could not be read, parsed or validated.
   */
  CRANE_STATUS_CONFIG_ERROR = 2,
  /**
   * A solver failed, diverged or met degenerate input.
   */
  CRANE_STATUS_NUMERICAL_ERROR = 3,
  /**
   * Reading or writing files failed.
   */
  CRANE_STATUS_IO_ERROR = 4,
  CRANE_STATUS_PANIC = 5,
} CraneStatus;

/**
 * Run configuration.
 */
typedef struct CraneConfig CraneConfig;

/**
 * Kernels and gains on the kernel grid.
 */
typedef struct CraneKernels CraneKernels;

/**
 * Result of a closed-loop run.
 */
typedef struct CraneSimulation CraneSimulation;

/**
 * One time sample of a simulation.
 */
typedef struct CraneSample {
  double t;
  double phi;
  double phi_dot;
  double xp;
  double u;
  double v;
  /**
   * `max(|alpha|, |beta|, |Xp|, |y|)` at this sample.
   */
  double magnitude;
} CraneSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *crane_last_error_message(void);

/**
 * Creates a configuration holding the default values.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum CraneStatus crane_config_new(struct CraneConfig **out);

/**
 * Loads and validates a configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for writes.
 */
enum CraneStatus crane_config_load(const char *path, struct CraneConfig **out);

/**
 * Sets one configuration key using the configuration-file syntax.
 * Validation happens when the configuration is used.
 *
 * # Safety
 * `cfg` must come from this library; `key` and `value` must be
 * NUL-terminated strings.
 */
enum CraneStatus crane_config_set(struct CraneConfig *cfg, const char *key, const char *value);

/**
 * Checks every validation rule, including the CFL condition.
 *
 * # Safety
 * `cfg` must come from this library.
 */
enum CraneStatus crane_config_validate(const struct CraneConfig *cfg);

/**
 * # Safety
 * `cfg` must come from this library or be null; it is invalid afterwards.
 */
void crane_config_free(struct CraneConfig *cfg);

/**
 * Computes the direct and inverse kernels and the feedback gains.
 *
 * # Safety
 * `cfg` must come from this library and `out` be valid for writes.
 */
enum CraneStatus crane_kernels_compute(const struct CraneConfig *cfg, struct CraneKernels **out);

/**
 * Writes the constants `mu`, `a0` and `b0` of the control law.
 *
 * # Safety
 * `k` must come from this library; the output pointers must be valid.
 */
enum CraneStatus crane_kernels_constants(const struct CraneKernels *k,
                                         double *mu,
                                         double *a0,
                                         double *b0);

/**
 * Number of grid nodes `n + 1` of the kernel grid.
 *
 * # Safety
 * `k` must come from this library or be null (returns 0).
 */
size_t crane_kernels_node_count(const struct CraneKernels *k);

/**
 * Evaluates `L_field(x, xi)` for the inverse kernels (`inverse != 0`) or
 * the direct kernels, with `field` 0..3 in the order aa, ab, ba, bb.
 * Requires `0 <= xi <= x <= 1`.
 *
 * # Safety
 * `k` must come from this library and `out` be valid for writes.
 */
enum CraneStatus crane_kernels_value(const struct CraneKernels *k,
                                     int32_t inverse,
                                     uint32_t field,
                                     double x,
                                     double xi,
                                     double *out);

/**
 * Copies the gain profiles `a` and `b` into caller buffers of length
 * [`crane_kernels_node_count`].
 *
 * # Safety
 * `k` must come from this library; `a` and `b` must point to `len`
 * writable doubles.
 */
enum CraneStatus crane_kernels_gains(const struct CraneKernels *k,
                                     double *a,
                                     double *b,
                                     size_t len);

/**
 * # Safety
 * `k` must come from this library or be null; it is invalid afterwards.
 */
void crane_kernels_free(struct CraneKernels *k);

/**
 * Runs the closed loop with previously computed kernels.
 *
 * # Safety
 * `cfg` and `k` must come from this library and `out` be valid for writes.
 */
enum CraneStatus crane_simulate(const struct CraneConfig *cfg,
                                const struct CraneKernels *k,
                                struct CraneSimulation **out);

/**
 * Number of time samples, including `t = 0`.
 *
 * # Safety
 * `sim` must come from this library or be null (returns 0).
 */
size_t crane_simulation_len(const struct CraneSimulation *sim);

/**
 * # Safety
 * `sim` must come from this library and `out` be valid for writes.
 */
enum CraneStatus crane_simulation_sample(const struct CraneSimulation *sim,
                                         size_t index,
                                         struct CraneSample *out);

/**
 * Observed settling times. A flag of 0 means the run ended before the
 * state settled and the matching time is left untouched.
 *
 * # Safety
 * `sim` must come from this library; the output pointers must be valid.
 */
enum CraneStatus crane_simulation_settling(const struct CraneSimulation *sim,
                                           double *t0,
                                           int32_t *has_t0,
                                           double *t1,
                                           int32_t *has_t1);

/**
 * # Safety
 * `sim` must come from this library or be null; it is invalid afterwards.
 */
void crane_simulation_free(struct CraneSimulation *sim);

/**
 * Runs the full pipeline and writes every CSV artifact into `out_dir`.
 *
 * # Safety
 * `cfg` must come from this library and `out_dir` be a NUL-terminated
 * string.
 */
enum CraneStatus crane_run_pipeline(const struct CraneConfig *cfg, const char *out_dir);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CRANE_H */
