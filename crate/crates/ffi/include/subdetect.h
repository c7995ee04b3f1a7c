#ifndef SUBDETECT_H
#define SUBDETECT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * The seven constituent statistics.
 */
typedef enum SdDetectorKind {
  SD_DETECTOR_KIND_LINEAR = 0,
  SD_DETECTOR_KIND_TRUNC_CHI2_AXIS1 = 1,
  SD_DETECTOR_KIND_TRUNC_CHI2_AXIS2 = 2,
  SD_DETECTOR_KIND_MAX_LIN_AXIS1 = 3,
  SD_DETECTOR_KIND_MAX_LIN_AXIS2 = 4,
  SD_DETECTOR_KIND_MAX_TRUNC_CHI2_AXIS1 = 5,
  SD_DETECTOR_KIND_MAX_TRUNC_CHI2_AXIS2 = 6,
} SdDetectorKind;

typedef enum SdRegime {
  SD_REGIME_PHI_A = 0,
  SD_REGIME_PHI_B = 1,
  SD_REGIME_PSI_BETA_C = 2,
  SD_REGIME_PSI_BETA_D = 3,
} SdRegime;

/**
 * Result of every fallible call.
 */
typedef enum SdStatus {
  SD_STATUS_OK = 0,
  SD_STATUS_INVALID_SHAPE = 1,
  SD_STATUS_INVALID_SUPPORT = 2,
  SD_STATUS_INVALID_ARGUMENT = 3,
  SD_STATUS_DIMENSION_MISMATCH = 4,
  SD_STATUS_NON_FINITE = 5,
  SD_STATUS_ENUMERATION_CAP = 6,
  SD_STATUS_INSUFFICIENT_REPLICATES = 7,
  SD_STATUS_OVERFLOW = 8,
  SD_STATUS_CONFIG = 9,
  SD_STATUS_IO = 10,
  SD_STATUS_NULL_POINTER = 11,
  SD_STATUS_PANIC = 12,
} SdStatus;

/**
 * Opaque detector with its threshold and cutoff.
 */
typedef struct SdDetector SdDetector;

/**
 * Opaque dense row-major matrix.
 */
typedef struct SdMatrix SdMatrix;

typedef struct SdRateBreakdown {
  double psi12;
  double psi21;
  double phi12;
  double phi21;
  double beta12;
  double beta21;
  double rate;
  double rate_tilde;
  enum SdRegime regime;
} SdRateBreakdown;

typedef struct SdSecondMoment {
  double second_moment;
  double log_second_moment;
  double tv_upper_bound;
  double minimax_risk_lower_bound;
} SdSecondMoment;

typedef struct SdTestOutcome {
  enum SdDetectorKind kind;
  double statistic;
  double cutoff;
  bool reject;
  uint64_t work_count;
} SdTestOutcome;

typedef struct SdRiskEstimate {
  double mu;
  double type_one;
  double type_one_se;
  double type_two;
  double type_two_se;
  double risk;
  uint64_t n_reps;
} SdRiskEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sd_version(void);

/**
 * Default cap on subsets visited by a Bonferroni scan.
 */
uint64_t sd_default_cap(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated and
 * NUL-terminated) and returns the full message length, or 0 if none.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t sd_last_error_message(char *buf, size_t len);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum SdStatus sd_rate_breakdown(size_t d1,
                                size_t d2,
                                size_t s1,
                                size_t s2,
                                struct SdRateBreakdown *out);

/**
 * `E[Z^2 | |Z| > tau]`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SdStatus sd_nu_tau(double tau, double *out);

/**
 * `log C(n, k)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SdStatus sd_log_binom(uint64_t n, uint64_t k, double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum SdStatus sd_second_moment_exact(size_t d1,
                                     size_t d2,
                                     size_t s1,
                                     size_t s2,
                                     double mu,
                                     struct SdSecondMoment *out);

/**
 * Copies a row-major `rows x cols` array into a new matrix.
 *
 * # Safety
 * `data` must be valid for `rows * cols` reads and `out` for writes.
 */
enum SdStatus sd_matrix_new(size_t rows, size_t cols, const double *data, struct SdMatrix **out);

/**
 * Draws `Y = X + E` with `mu` on the leading `s1 x s2` block; `mu = 0` is the null.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SdStatus sd_matrix_sample(size_t d1,
                               size_t d2,
                               size_t s1,
                               size_t s2,
                               double mu,
                               uint64_t seed,
                               uint64_t stream,
                               struct SdMatrix **out);

/**
 * # Safety
 * `m` must be null or a live handle.
 */
size_t sd_matrix_rows(const struct SdMatrix *m);

/**
 * # Safety
 * `m` must be null or a live handle.
 */
size_t sd_matrix_cols(const struct SdMatrix *m);

/**
 * # Safety
 * `m` must be a live handle and `out` valid for writes.
 */
enum SdStatus sd_matrix_get(const struct SdMatrix *m, size_t row, size_t col, double *out);

/**
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void sd_matrix_free(struct SdMatrix *m);

/**
 * A detector with the default theoretical threshold and cutoff; `kind` is
 * an `SdDetectorKind` value.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SdStatus sd_detector_theoretical(uint32_t kind,
                                      size_t d1,
                                      size_t d2,
                                      size_t s1,
                                      size_t s2,
                                      struct SdDetector **out);

/**
 * The statistic selected by the dominating rate term, with theoretical cutoff.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SdStatus sd_delta_star(size_t d1, size_t d2, size_t s1, size_t s2, struct SdDetector **out);

/**
 * A copy of `det` whose cutoff is the conservative null quantile at `level`.
 *
 * # Safety
 * `det` must be a live handle and `out` valid for writes.
 */
enum SdStatus sd_detector_calibrate(const struct SdDetector *det,
                                    double level,
                                    size_t n_reps,
                                    uint64_t seed,
                                    uint64_t cap,
                                    struct SdDetector **out);

/**
 * # Safety
 * `det` must be null or a live handle.
 */
enum SdDetectorKind sd_detector_kind(const struct SdDetector *det);

/**
 * The cutoff, or NaN for a null handle.
 *
 * # Safety
 * `det` must be null or a live handle.
 */
double sd_detector_cutoff(const struct SdDetector *det);

/**
 * # Safety
 * `det` and `y` must be live handles and `out` valid for writes.
 */
enum SdStatus sd_detector_evaluate(const struct SdDetector *det,
                                   const struct SdMatrix *y,
                                   uint64_t cap,
                                   struct SdTestOutcome *out);

/**
 * Monte Carlo type I, type II and total risk of `det` at signal `mu` with
 * the planted block in the leading rows and columns.
 *
 * # Safety
 * `det` must be a live handle and `out` valid for writes.
 */
enum SdStatus sd_estimate_risk(const struct SdDetector *det,
                               double mu,
                               size_t n_reps,
                               uint64_t seed,
                               uint64_t cap,
                               struct SdRiskEstimate *out);

/**
 * # Safety
 * `det` must be null or a handle not yet freed.
 */
void sd_detector_free(struct SdDetector *det);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBDETECT_H */
