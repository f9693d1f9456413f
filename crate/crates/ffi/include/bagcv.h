/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef BAGCV_H
#define BAGCV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum BcvStatus {
  BCV_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  BCV_STATUS_NULL_POINTER = 1,
  /**
   * An argument is outside the domain of the operation.
   */
  BCV_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The input data are unusable (non-finite values, too few points).
   */
  BCV_STATUS_DATA = 3,
  /**
   * A numerical routine failed.
   */
  BCV_STATUS_NUMERICAL = 4,
  /**
   * No mixture could be fitted.
   */
  BCV_STATUS_FIT = 5,
  /**
   * Pilot estimation of the subsample size failed.
   */
  BCV_STATUS_ESTIMATION = 6,
  /**
   * Internal error; the library caught a panic.
   */
  BCV_STATUS_PANIC = 7,
} BcvStatus;

/**
 * Gaussian mixture density.
 */
typedef struct BcvMixture BcvMixture;

/**
 * Sorted, finite univariate sample.
 */
typedef struct BcvSample BcvSample;

/**
 * Outcome of full-sample cross-validation.
 */
typedef struct BcvCvResult {
  double h_opt;
  double cv_min;
  double search_lo;
  double search_hi;
  /**
   * Nonzero when the coarse grid minimum was at an interval end.
   */
  int32_t boundary_hit;
  size_t evaluations;
} BcvCvResult;

/**
 * Settings of the bagged selector. Zero `lower` and `upper` select the
 * default search interval; zero `nb_sub` means `m` bins.
 */
typedef struct BcvBagOptions {
  size_t m;
  size_t n_resamples;
  uint64_t seed;
  double lower;
  double upper;
  /**
   * Nonzero for binned CV on subsamples, zero for exact.
   */
  int32_t binned;
  size_t nb_sub;
} BcvBagOptions;

typedef struct BcvBagResult {
  double h_bag;
  size_t boundary_hits;
  size_t failures;
  double elapsed_seconds;
} BcvBagResult;

/**
 * Minimiser of the AMSE and the constants behind it.
 */
typedef struct BcvAmseResult {
  size_t m_hat;
  /**
   * Nonzero when the minimiser is m = n.
   */
  int32_t boundary;
  double a;
  double c;
  double mu_rescale;
  double mu_cv;
  /**
   * Pilot fits that failed (always 0 for known densities).
   */
  size_t pilot_failures;
} BcvAmseResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *bcv_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *bcv_last_error_message(void);

/**
 * Copies `len` values into a new sample.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be writable.
 */
enum BcvStatus bcv_sample_new(const double *values, size_t len, struct BcvSample **out_sample);

/**
 * # Safety
 * `sample` must come from this library and not be freed twice. NULL is a no-op.
 */
void bcv_sample_free(struct BcvSample *sample);

/**
 * Number of observations, or 0 for NULL.
 *
 * # Safety
 * `sample` must be NULL or a live handle.
 */
size_t bcv_sample_len(const struct BcvSample *sample);

/**
 * Least-squares CV criterion at bandwidth `h`.
 *
 * # Safety
 * Pointers must be live/writable.
 */
enum BcvStatus bcv_cv_score(const struct BcvSample *sample, double h, double *out_score);

/**
 * Full-sample CV bandwidth on `[lower, upper]` (both 0: default interval).
 *
 * # Safety
 * Pointers must be live/writable.
 */
enum BcvStatus bcv_cv_minimize(const struct BcvSample *sample,
                               double lower,
                               double upper,
                               struct BcvCvResult *out_result);

/**
 * Default options: binned subsamples, default interval.
 */
struct BcvBagOptions bcv_bag_options_default(size_t m, size_t n_resamples, uint64_t seed);

/**
 * Bagged CV bandwidth. When `per_resample` is not NULL it receives the
 * `n_resamples` rescaled subsample bandwidths (NaN for failed ones).
 *
 * # Safety
 * Pointers must be live; `per_resample` must hold `n_resamples` doubles.
 */
enum BcvStatus bcv_bagged_bandwidth(const struct BcvSample *sample,
                                    const struct BcvBagOptions *options,
                                    struct BcvBagResult *out_result,
                                    double *per_resample);

/**
 * Estimates the AMSE-optimal subsample size from `s` pilot mixture fits on
 * subsamples of size `r` (0: default).
 *
 * # Safety
 * Pointers must be live/writable.
 */
enum BcvStatus bcv_estimate_m0(const struct BcvSample *sample,
                               size_t n_resamples,
                               size_t s,
                               size_t r,
                               uint64_t seed,
                               struct BcvAmseResult *out_result);

/**
 * Mixture from `k` weights, means and standard deviations.
 *
 * # Safety
 * The arrays must hold `k` doubles; `out_mixture` must be writable.
 */
enum BcvStatus bcv_mixture_new(const double *weights,
                               const double *means,
                               const double *sds,
                               size_t k,
                               struct BcvMixture **out_mixture);

/**
 * Named reference mixture ("D1", "claw", "bimodal", "std_normal", ...).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out_mixture` must be writable.
 */
enum BcvStatus bcv_mixture_preset(const char *name, struct BcvMixture **out_mixture);

/**
 * Fits a mixture with at most `max_components` components by EM, choosing
 * the number of components by BIC.
 *
 * # Safety
 * Pointers must be live/writable.
 */
enum BcvStatus bcv_mixture_fit(const struct BcvSample *sample,
                               size_t max_components,
                               uint64_t seed,
                               struct BcvMixture **out_mixture);

/**
 * # Safety
 * `mixture` must come from this library and not be freed twice. NULL is a no-op.
 */
void bcv_mixture_free(struct BcvMixture *mixture);

/**
 * Number of components, or 0 for NULL.
 *
 * # Safety
 * `mixture` must be NULL or a live handle.
 */
size_t bcv_mixture_components(const struct BcvMixture *mixture);

/**
 * Density at each of `len` points.
 *
 * # Safety
 * `xs` and `out_values` must hold `len` doubles.
 */
enum BcvStatus bcv_mixture_pdf(const struct BcvMixture *mixture,
                               const double *xs,
                               size_t len,
                               double *out_values);

/**
 * Draws `n` observations.
 *
 * # Safety
 * Pointers must be live/writable.
 */
enum BcvStatus bcv_mixture_sample(const struct BcvMixture *mixture,
                                  size_t n,
                                  uint64_t seed,
                                  struct BcvSample **out_sample);

/**
 * Bandwidth minimising the exact MISE at sample size `n`.
 *
 * # Safety
 * Pointers must be live/writable.
 */
enum BcvStatus bcv_mixture_h_mise(const struct BcvMixture *mixture, size_t n, double *out_h);

/**
 * AMSE-optimal subsample size when the density is known.
 *
 * # Safety
 * Pointers must be live/writable.
 */
enum BcvStatus bcv_mixture_optimal_m(const struct BcvMixture *mixture,
                                     size_t n,
                                     size_t n_resamples,
                                     struct BcvAmseResult *out_result);

/**
 * Kernel density estimate with bandwidth `h` at `len` points.
 *
 * # Safety
 * `xs` and `out_values` must hold `len` doubles.
 */
enum BcvStatus bcv_kde_eval(const struct BcvSample *sample,
                            double h,
                            const double *xs,
                            size_t len,
                            double *out_values);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BAGCV_H */
