#ifndef SGDLAB_H
#define SGDLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SGDLAB_FAMILY_POLY 0

#define SGDLAB_FAMILY_POLY_LOG 1

#define SGDLAB_FAMILY_LOG_POWER 2

#define SGDLAB_REGIME_LOCAL_A 0

#define SGDLAB_REGIME_LOCAL_B 1

#define SGDLAB_REGIME_UNIFIED 2

#define SGDLAB_REGIME_GLOBAL 3

#define SGDLAB_QUANTITY_MIN_F_GAP 0

#define SGDLAB_QUANTITY_F_GAP 1

#define SGDLAB_QUANTITY_MIN_GRAD_SQ 2

#define SGDLAB_QUANTITY_ITERATE_GAP 3

typedef enum SgdlabStatus {
  SGDLAB_STATUS_OK = 0,
  SGDLAB_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8 or JSON.
   */
  SGDLAB_STATUS_INVALID_STRING = 2,
  /**
   * Unknown name, bad parameter or bad config field.
   */
  SGDLAB_STATUS_INVALID_ARGUMENT = 3,
  SGDLAB_STATUS_OUT_OF_SCOPE = 4,
  SGDLAB_STATUS_DOMAIN = 5,
  SGDLAB_STATUS_DIVERGENCE = 6,
  SGDLAB_STATUS_INSUFFICIENT_DATA = 7,
  SGDLAB_STATUS_DEGENERATE_SAMPLE = 8,
  SGDLAB_STATUS_HYPOTHESIS = 9,
  SGDLAB_STATUS_UNSUPPORTED_REGIME = 10,
  SGDLAB_STATUS_ASSUMPTION = 11,
  SGDLAB_STATUS_IO = 12,
  SGDLAB_STATUS_PANIC = 13,
} SgdlabStatus;

typedef struct SgdlabExperiment SgdlabExperiment;

typedef struct SgdlabLandscape SgdlabLandscape;

typedef struct SgdlabSchedule SgdlabSchedule;

typedef struct SgdlabScheduleSpec {
  /**
   * One of the `SGDLAB_FAMILY_*` constants.
   */
  int32_t family;
  double gamma0;
  double c;
  double cprime;
  double s;
  /**
   * Hölder exponent, used by the log-power family only.
   */
  double alpha;
} SgdlabScheduleSpec;

typedef struct SgdlabBudgetParams {
  double alpha;
  double l;
  double beta;
  double zeta;
  double kappa;
  /**
   * NaN selects the schedule's own limiting ratio.
   */
  double rho;
  int32_t regime;
  int32_t quantity;
  /**
   * NaN leaves the iterate exponent at its default.
   */
  double sigma;
} SgdlabBudgetParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *sgdlab_last_error(void);

const char *sgdlab_version(void);

/**
 * `params_json` is an optional JSON object of numeric parameters, e.g.
 * `{"q": 1.5}`; pass null for the defaults.
 */
enum SgdlabStatus sgdlab_landscape_new(const char *name,
                                       const char *params_json,
                                       struct SgdlabLandscape **out);

void sgdlab_landscape_free(struct SgdlabLandscape *land);

enum SgdlabStatus sgdlab_landscape_dim(const struct SgdlabLandscape *land, size_t *out);

enum SgdlabStatus sgdlab_landscape_value(const struct SgdlabLandscape *land,
                                         const double *theta,
                                         size_t dim,
                                         double *out);

/**
 * Writes `dim` gradient entries to `out`.
 */
enum SgdlabStatus sgdlab_landscape_gradient(const struct SgdlabLandscape *land,
                                            const double *theta,
                                            size_t dim,
                                            double *out);

enum SgdlabStatus sgdlab_schedule_new(const struct SgdlabScheduleSpec *spec,
                                      struct SgdlabSchedule **out);

void sgdlab_schedule_free(struct SgdlabSchedule *sch);

/**
 * Step size at `n >= 1`.
 */
enum SgdlabStatus sgdlab_schedule_gamma(const struct SgdlabSchedule *sch, uint64_t n, double *out);

/**
 * `Sigma_n = gamma_1 + ... + gamma_{n+1}`, for `n >= 1`.
 */
enum SgdlabStatus sgdlab_schedule_partial_sum(const struct SgdlabSchedule *sch,
                                              uint64_t n,
                                              double *out);

/**
 * Smallest `n` with `gamma_n <= t`.
 */
enum SgdlabStatus sgdlab_schedule_gamma_inverse(const struct SgdlabSchedule *sch,
                                                double t,
                                                uint64_t *out);

/**
 * Closed-form inverse of the partial sums, as used by the budgets.
 */
enum SgdlabStatus sgdlab_schedule_sigma_inverse(const struct SgdlabSchedule *sch,
                                                double t,
                                                uint64_t *out);

/**
 * Iteration count for accuracy `eps` with probability `1 - delta`.
 * Saturates at `UINT64_MAX`.
 */
enum SgdlabStatus sgdlab_budget(const struct SgdlabSchedule *sch,
                                const struct SgdlabBudgetParams *params,
                                double eps,
                                double delta,
                                uint64_t *out_n);

/**
 * Parses and validates an experiment config given as JSON text.
 */
enum SgdlabStatus sgdlab_experiment_from_json(const char *json, struct SgdlabExperiment **out);

void sgdlab_experiment_free(struct SgdlabExperiment *exp);

/**
 * Runs the ensemble and writes series.csv, report.json and manifest.json
 * into `out_dir`. `jobs == 0` uses every core. On success `out_exit_code`
 * receives the command-line exit code of the run: 0 pass, 2 fail,
 * 3 inconclusive, 4 divergence.
 */
enum SgdlabStatus sgdlab_experiment_run(const struct SgdlabExperiment *exp,
                                        const char *out_dir,
                                        size_t jobs,
                                        int32_t *out_exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SGDLAB_H */
