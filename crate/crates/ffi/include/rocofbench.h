#ifndef ROCOFBENCH_H
#define ROCOFBENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RbStatus {
  RB_STATUS_OK = 0,
  RB_STATUS_INVALID_INPUT = 1,
  RB_STATUS_CONFIG = 2,
  RB_STATUS_NUMERICAL = 3,
  RB_STATUS_PARSE = 4,
  RB_STATUS_IO = 5,
  RB_STATUS_NULL_POINTER = 6,
  RB_STATUS_PANIC = 7,
} RbStatus;

typedef enum RbClass {
  RB_CLASS_P = 0,
  RB_CLASS_M = 1,
} RbClass;

typedef enum RbAlgorithm {
  RB_ALGORITHM_E_IPDFT = 0,
  RB_ALGORITHM_I_IPDFT = 1,
  RB_ALGORITHM_TFM = 2,
} RbAlgorithm;

typedef enum RbRocofMode {
  RB_ROCOF_MODE_FINITE_DIFFERENCE = 0,
  RB_ROCOF_MODE_DERIVATIVE = 1,
} RbRocofMode;

/**
 * Measurement chain and relay of a preset UFLS scenario.
 */
typedef enum RbChain {
  /**
   * PLL meter with the frequency-staged relay.
   */
  RB_CHAIN_PLL_STAGED = 0,
  /**
   * Class P static PMU with the ROCOF relay.
   */
  RB_CHAIN_PMU1_ROCOF = 1,
  /**
   * Class M dynamic PMU with the ROCOF relay.
   */
  RB_CHAIN_PMU2_ROCOF = 2,
  /**
   * Noise-free simulated readings with the ROCOF relay.
   */
  RB_CHAIN_IDEAL_ROCOF = 3,
} RbChain;

/**
 * Estimator configuration handle.
 */
typedef struct RbEstimator RbEstimator;

/**
 * UFLS scenario handle.
 */
typedef struct RbScenario RbScenario;

/**
 * Estimate stream handle.
 */
typedef struct RbStream RbStream;

/**
 * One reporting instant. `rocof_valid` is 0 where the ROCOF is undefined.
 */
typedef struct RbEstimate {
  double t_mid;
  double amplitude;
  double phase;
  double freq;
  double rocof;
  uint8_t rocof_valid;
  uint8_t converged;
} RbEstimate;

typedef struct RbErrorStats {
  double mean;
  double std;
  double p95_abs;
  /**
   * NaN when the correlation is undefined.
   */
  double pearson;
  size_t n;
} RbErrorStats;

typedef struct RbUflsSummary {
  uint8_t blackout;
  /**
   * NaN without a blackout.
   */
  double blackout_t;
  double eens_mwh;
  double shed_mw;
  double nadir_t;
  double nadir_hz;
} RbUflsSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *rb_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rb_version(void);

/**
 * Creates an estimator for `fs` Hz sampling at 50 Hz nominal and 50 frames/s.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum RbStatus rb_estimator_new(enum RbClass class_,
                               enum RbAlgorithm algorithm,
                               enum RbRocofMode mode,
                               double fs,
                               struct RbEstimator **out);

/**
 * # Safety
 * `h` must be null or a handle from [`rb_estimator_new`] not yet freed.
 */
void rb_estimator_free(struct RbEstimator *h);

/**
 * Window length of the estimator in samples.
 *
 * # Safety
 * `h` must be a live estimator handle.
 */
size_t rb_estimator_window_len(const struct RbEstimator *h);

/**
 * Runs the estimator over `n` samples starting at time 0.
 *
 * # Safety
 * `h` must be a live estimator handle, `samples` must point to `n` readable
 * doubles and `out` to storage for one handle.
 */
enum RbStatus rb_estimate_stream(const struct RbEstimator *h,
                                 const double *samples,
                                 size_t n,
                                 struct RbStream **out);

/**
 * # Safety
 * `s` must be null or a live stream handle.
 */
size_t rb_stream_len(const struct RbStream *s);

/**
 * Copies estimate `i` into `out`.
 *
 * # Safety
 * `s` must be a live stream handle and `out` writable.
 */
enum RbStatus rb_stream_get(const struct RbStream *s, size_t i, struct RbEstimate *out);

/**
 * # Safety
 * `s` must be null or a stream handle not yet freed.
 */
void rb_stream_free(struct RbStream *s);

/**
 * Error statistics of `est - reference` over `n` pairs.
 *
 * # Safety
 * `est` and `reference` must point to `n` readable doubles, `out` writable.
 */
enum RbStatus rb_rfe_stats(const double *est,
                           const double *reference,
                           size_t n,
                           struct RbErrorStats *out);

/**
 * Calibrated default UFLS scenario for a chain.
 *
 * # Safety
 * `out` must be writable.
 */
enum RbStatus rb_ufls_scenario_new(enum RbChain chain, struct RbScenario **out);

/**
 * Scenario from a TOML document with `relay` and `measurement` tables and
 * optional `grid`, `noise` and `sim` tables.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` writable.
 */
enum RbStatus rb_ufls_scenario_from_toml(const char *toml, struct RbScenario **out);

/**
 * Overrides the aggregate inertia constant, s.
 *
 * # Safety
 * `h` must be a live scenario handle.
 */
enum RbStatus rb_ufls_scenario_set_inertia(struct RbScenario *h, double inertia);

/**
 * # Safety
 * `h` must be a live scenario handle and `out` writable.
 */
enum RbStatus rb_ufls_run(const struct RbScenario *h, struct RbUflsSummary *out);

/**
 * # Safety
 * `h` must be null or a scenario handle not yet freed.
 */
void rb_ufls_scenario_free(struct RbScenario *h);

/**
 * Owned copy of the last error message.
 *
 * # Safety
 * The returned string must be released with [`rb_string_free`].
 */
char *rb_last_error_copy(void);

/**
 * # Safety
 * `s` must be null or a string from [`rb_last_error_copy`] not yet freed.
 */
void rb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROCOFBENCH_H */
