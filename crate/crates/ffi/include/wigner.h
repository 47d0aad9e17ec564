#ifndef WIGNER_H
#define WIGNER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum WignerStatus {
  WIGNER_STATUS_OK = 0,
  WIGNER_STATUS_NULL_POINTER = 1,
  WIGNER_STATUS_INVALID_UTF8 = 2,
  /**
   * Invalid configuration or argument.
   */
  WIGNER_STATUS_CONFIG = 3,
  /**
   * CFL violation, non-finite field, failed solve.
   */
  WIGNER_STATUS_NUMERICAL = 4,
  WIGNER_STATUS_IO = 5,
  /**
   * The output buffer is shorter than required.
   */
  WIGNER_STATUS_BUFFER_TOO_SMALL = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  WIGNER_STATUS_PANIC = 7,
} WignerStatus;

/**
 * Opaque solver handle.
 */
typedef struct WignerSolver WignerSolver;

/**
 * Phase-space moments of the current field.
 */
typedef struct WignerMoments {
  double time;
  double mass;
  double mean_x;
  double mean_v;
  double var_x;
  double var_v;
  double cov_xv;
  double uncertainty;
  double normalized_cov;
  /**
   * Nonzero when a variance vanished and `normalized_cov` was set to 0.
   */
  int32_t degenerate;
} WignerMoments;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a solver from TOML configuration text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum WignerStatus wigner_solver_from_toml(const char *toml, struct WignerSolver **out);

/**
 * Creates a solver from a bundled preset such as `"harmonic"`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum WignerStatus wigner_solver_from_preset(const char *name, struct WignerSolver **out);

/**
 * Releases a solver; null is ignored.
 *
 * # Safety
 * `solver` must come from a constructor here and not be used afterwards.
 */
void wigner_solver_free(struct WignerSolver *solver);

/**
 * Advances the field by `n_steps` whole time steps.
 *
 * # Safety
 * `solver` must be a live handle.
 */
enum WignerStatus wigner_solver_step(struct WignerSolver *solver, size_t n_steps);

/**
 * Current time, number of grid points, basis size and time step.
 *
 * # Safety
 * `solver` must be a live handle; null output pointers are skipped.
 */
enum WignerStatus wigner_solver_info(const struct WignerSolver *solver,
                                     double *time,
                                     size_t *nx,
                                     size_t *n_basis,
                                     double *dt);

/**
 * Writes the `nx` grid points.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum WignerStatus wigner_solver_x_grid(const struct WignerSolver *solver, double *buf, size_t len);

/**
 * Writes the probability density at the `nx` grid points.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum WignerStatus wigner_solver_density(const struct WignerSolver *solver, double *buf, size_t len);

/**
 * Writes the coefficients, point-major: `buf[j * n_basis + k] = a_k(x_j)`.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum WignerStatus wigner_solver_coefficients(const struct WignerSolver *solver,
                                             double *buf,
                                             size_t len);

/**
 * Computes the phase-space moments of the current field.
 *
 * # Safety
 * `out` must be writable.
 */
enum WignerStatus wigner_solver_moments(const struct WignerSolver *solver,
                                        struct WignerMoments *out);

/**
 * Copies the last error message of this thread, NUL-terminated and
 * truncated to `len` bytes. Returns the full message length without the NUL,
 * so a caller can retry with a larger buffer.
 *
 * # Safety
 * `buf` must hold `len` bytes, or be null with `len == 0`.
 */
size_t wigner_last_error(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WIGNER_H */
