#ifndef WEIGHTED_MINNORM_H
#define WEIGHTED_MINNORM_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum WmnStatus {
  WMN_STATUS_OK = 0,
  WMN_STATUS_NULL_POINTER = 1,
  WMN_STATUS_INVALID_DIMENSION = 2,
  WMN_STATUS_INVALID_CONFIGURATION = 3,
  WMN_STATUS_INVALID_RANGE = 4,
  WMN_STATUS_OUT_OF_REGIME = 5,
  WMN_STATUS_WRONG_REGIME = 6,
  WMN_STATUS_STRUCTURE_VIOLATION = 7,
  WMN_STATUS_SINGULAR_SYSTEM = 8,
  WMN_STATUS_SINGULAR_CONSTANT = 9,
  WMN_STATUS_NUMERICAL_INCONSISTENCY = 10,
  WMN_STATUS_UNKNOWN_TARGET = 11,
  WMN_STATUS_IO = 12,
  WMN_STATUS_BUFFER_TOO_SMALL = 13,
  WMN_STATUS_PANIC = 99,
} WmnStatus;

/**
 * Solver selection for [`wmn_weighted_minnorm`].
 */
typedef enum WmnSolverPath {
  WMN_SOLVER_PATH_DENSE_SVD = 0,
  WMN_SOLVER_PATH_CIRCULANT_FFT = 1,
} WmnSolverPath;

/**
 * Opaque coefficient spectrum `t_j = (j+1)^-1` with decay `r`.
 */
typedef struct WmnSpectrum WmnSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a spectrum of dimension `dim` and decay `r`.
 *
 * # Safety
 * `out` must be a valid pointer; the handle must be released with
 * [`wmn_spectrum_free`].
 */
enum WmnStatus wmn_spectrum_new(size_t dim, double r, struct WmnSpectrum **out);

/**
 * Releases a spectrum. Null is ignored.
 *
 * # Safety
 * `spectrum` must come from [`wmn_spectrum_new`] and not be used again.
 */
void wmn_spectrum_free(struct WmnSpectrum *spectrum);

/**
 * Ambient dimension `D`, or 0 for a null handle.
 *
 * # Safety
 * `spectrum` must be null or a live handle.
 */
size_t wmn_spectrum_dim(const struct WmnSpectrum *spectrum);

/**
 * Normalizing constant `c_r`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum WmnStatus wmn_spectrum_c_r(const struct WmnSpectrum *spectrum, double *out);

/**
 * Closed-form risk of the weighted min-norm estimator on an aligned grid
 * `n | D`, `n | p`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum WmnStatus wmn_risk_over_closed(const struct WmnSpectrum *spectrum,
                                    size_t n,
                                    size_t p,
                                    double q,
                                    double *out_risk);

/**
 * Closed-form risk of least squares for `p <= n`, `n | D`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum WmnStatus wmn_risk_under_closed(const struct WmnSpectrum *spectrum,
                                     size_t n,
                                     size_t p,
                                     double *out_risk);

/**
 * Rate bound `a n^(-2r+1) + b n^(-2r) p^(-2r+1)` and its large-`D` limit.
 *
 * # Safety
 * Pointers must be valid.
 */
enum WmnStatus wmn_asymptotic_bound(const struct WmnSpectrum *spectrum,
                                    size_t n,
                                    size_t p,
                                    double *out_bound,
                                    double *out_large_d_bound);

/**
 * Concentration constant `T_q` and the raw tail `2 exp(-min(x^2, x))`,
 * `x = t / T_q`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum WmnStatus wmn_concentration_bound(double r,
                                       double q,
                                       double t,
                                       double *out_tq,
                                       double *out_tail);

/**
 * Weighted min-norm interpolant from `n` samples `y` with `p >= n`
 * features. Writes `D` coefficients (zero beyond `p`). `y_im` may be null
 * for real data.
 *
 * # Safety
 * `y_re` (and `y_im` when non-null) must hold `n` values; the outputs must
 * hold `out_len` values.
 */
enum WmnStatus wmn_weighted_minnorm(const struct WmnSpectrum *spectrum,
                                    size_t n,
                                    size_t p,
                                    double q,
                                    enum WmnSolverPath path,
                                    const double *y_re,
                                    const double *y_im,
                                    double *out_re,
                                    double *out_im,
                                    size_t out_len);

/**
 * Least-squares fit `F^* y / n` for `p <= n`; writes `dim` coefficients.
 *
 * # Safety
 * As for [`wmn_weighted_minnorm`].
 */
enum WmnStatus wmn_least_squares(size_t dim,
                                 size_t n,
                                 size_t p,
                                 const double *y_re,
                                 const double *y_im,
                                 double *out_re,
                                 double *out_im,
                                 size_t out_len);

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *wmn_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEIGHTED_MINNORM_H */
