/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef SO3_FRECHET_H
#define SO3_FRECHET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum {
  SO3_STATUS_OK = 0,
  SO3_STATUS_NULL_POINTER = 1,
  SO3_STATUS_INVALID_ARGUMENT = 2,
  SO3_STATUS_ANGLE_NEAR_PI = 3,
  SO3_STATUS_NOT_A_ROTATION = 4,
  SO3_STATUS_NON_ISOTROPIC_NOISE = 5,
  SO3_STATUS_NO_CONVERGENCE = 6,
  SO3_STATUS_COVARIANCE_BLOWUP = 7,
  SO3_STATUS_EMPTY = 8,
  SO3_STATUS_OUT_OF_RANGE = 9,
  SO3_STATUS_IO = 10,
  SO3_STATUS_PANIC = 11,
} So3Status;

/**
 * Covariance law used by the predictor.
 */
typedef enum {
  SO3_VARIANT_GENERAL = 0,
  SO3_VARIANT_ISOTROPIC_CURVATURE = 1,
} So3Variant;

/**
 * Simulated ensemble at the terminal time.
 */
typedef struct So3Ensemble So3Ensemble;

/**
 * Predicted mean and covariance trajectory.
 */
typedef struct So3Trajectory So3Trajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *so3_version(void);

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library from the same thread.
 */
const char *so3_last_error_message(void);

/**
 * Exponential of algebra coordinates `c[3]` into `out[9]`.
 *
 * # Safety
 * `c` must point to 3 doubles and `out` to 9 writable doubles.
 */
So3Status so3_exp(const double *c, double *out);

/**
 * Logarithm of the rotation `g[9]` into `out[3]`.
 *
 * # Safety
 * `g` must point to 9 doubles and `out` to 3 writable doubles.
 */
So3Status so3_log(const double *g, double *out);

/**
 * Riemannian distance between two rotations.
 *
 * # Safety
 * `a` and `b` must point to 9 doubles each; `out` must be writable.
 */
So3Status so3_distance(const double *a, const double *b, double *out);

/**
 * Fréchet mean of `n` rotations stored back to back (`9 n` doubles).
 * `cov_out` and `iterations_out` may be null.
 *
 * # Safety
 * `members` must point to `9 n` doubles, `mean_out` to 9 writable doubles,
 * `cov_out` (if non-null) to 9 writable doubles.
 */
So3Status so3_frechet_mean(const double *members,
                           size_t n,
                           double tol,
                           size_t max_iter,
                           double *mean_out,
                           double *cov_out,
                           size_t *iterations_out);

/**
 * Integrates the mean/covariance system from the identity for the
 * conjugation drift `b(X) = X^T A X` and isotropic noise `sigma`.
 *
 * # Safety
 * `a` must point to 9 doubles; `out` must be a valid location for a handle.
 */
So3Status so3_trajectory_new(const double *a,
                             double sigma,
                             double horizon,
                             size_t steps,
                             So3Variant variant,
                             So3Trajectory **out);

/**
 * Number of states (`steps + 1`), or 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or a handle from [`so3_trajectory_new`].
 */
size_t so3_trajectory_len(const So3Trajectory *traj);

/**
 * Time, mean (9) and covariance (9) of state `index`.
 *
 * # Safety
 * `traj` must be a live handle; the output pointers must be writable.
 */
So3Status so3_trajectory_state(const So3Trajectory *traj,
                               size_t index,
                               double *t_out,
                               double *mean_out,
                               double *cov_out);

/**
 * Releases a trajectory; null is ignored.
 *
 * # Safety
 * `traj` must be null or a handle not yet freed.
 */
void so3_trajectory_free(So3Trajectory *traj);

/**
 * Simulates `n_paths` paths from the identity and keeps the terminal slice.
 *
 * # Safety
 * `a` must point to 9 doubles; `out` must be a valid location for a handle.
 */
So3Status so3_ensemble_simulate(const double *a,
                                double sigma,
                                double horizon,
                                size_t steps,
                                uint64_t seed,
                                size_t n_paths,
                                double ball_radius,
                                So3Ensemble **out);

/**
 * Number of members, or 0 for a null handle.
 *
 * # Safety
 * `ens` must be null or a handle from [`so3_ensemble_simulate`].
 */
size_t so3_ensemble_len(const So3Ensemble *ens);

/**
 * Number of paths stopped at the ball boundary, or 0 for a null handle.
 *
 * # Safety
 * `ens` must be null or a live handle.
 */
size_t so3_ensemble_stopped_count(const So3Ensemble *ens);

/**
 * Member `index` as a row-major rotation.
 *
 * # Safety
 * `ens` must be a live handle and `out` must point to 9 writable doubles.
 */
So3Status so3_ensemble_member(const So3Ensemble *ens, size_t index, double *out);

/**
 * Fréchet mean and empirical covariance of the terminal slice.
 * `cov_out` and `iterations_out` may be null.
 *
 * # Safety
 * `ens` must be a live handle; `mean_out` must point to 9 writable doubles.
 */
So3Status so3_ensemble_frechet_mean(const So3Ensemble *ens,
                                    double tol,
                                    size_t max_iter,
                                    double *mean_out,
                                    double *cov_out,
                                    size_t *iterations_out);

/**
 * Releases an ensemble; null is ignored.
 *
 * # Safety
 * `ens` must be null or a handle not yet freed.
 */
void so3_ensemble_free(So3Ensemble *ens);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SO3_FRECHET_H */
