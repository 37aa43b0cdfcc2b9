#ifndef HMA_H
#define HMA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HmaStatus {
  HMA_STATUS_OK = 0,
  HMA_STATUS_NULL_POINTER = 1,
  HMA_STATUS_CONFIG = 2,
  HMA_STATUS_SOLVER = 3,
  HMA_STATUS_IO = 4,
  HMA_STATUS_CHECK = 5,
  HMA_STATUS_GAUDUCHON = 6,
  HMA_STATUS_BUFFER_TOO_SMALL = 7,
  HMA_STATUS_PANIC = 8,
} HmaStatus;

/**
 * A validated scenario: grid, metric and right-hand side.
 */
typedef struct HmaProblem HmaProblem;

/**
 * A converged solve of an [`HmaProblem`].
 */
typedef struct HmaSolution HmaSolution;

/**
 * Scalar results of a solve.
 */
typedef struct HmaSolveStats {
  double b;
  double final_residual;
  size_t newton_iters;
  size_t krylov_iters_total;
  double min_eigenvalue;
  double phi_sup;
  double phi_inf;
  size_t point_count;
} HmaSolveStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *hma_last_error_message(void);

/**
 * Parses and validates a scenario from TOML text.
 *
 * # Safety
 * `toml` must be a nul-terminated string and `out` a writable pointer.
 */
enum HmaStatus hma_problem_from_toml(const char *toml, struct HmaProblem **out);

/**
 * Reads a scenario file.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a writable pointer.
 */
enum HmaStatus hma_problem_load(const char *path, struct HmaProblem **out);

/**
 * # Safety
 * `problem` must come from `hma_problem_*` and not be used afterwards. Null is ignored.
 */
void hma_problem_free(struct HmaProblem *problem);

/**
 * Complex dimension `n`, or 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t hma_problem_dimension(const struct HmaProblem *problem);

/**
 * Number of grid points, or 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t hma_problem_point_count(const struct HmaProblem *problem);

/**
 * Solves the problem. `tol <= 0` keeps the scenario's residual target.
 *
 * # Safety
 * `problem` must be a live handle and `out` a writable pointer.
 */
enum HmaStatus hma_solve(const struct HmaProblem *problem, double tol, struct HmaSolution **out);

/**
 * # Safety
 * `solution` must come from `hma_solve` and not be used afterwards. Null is ignored.
 */
void hma_solution_free(struct HmaSolution *solution);

/**
 * # Safety
 * `solution` must be a live handle and `out` a writable pointer.
 */
enum HmaStatus hma_solution_stats(const struct HmaSolution *solution, struct HmaSolveStats *out);

/**
 * Copies `φ` in row-major grid order into `buf`, which must hold
 * `point_count` values.
 *
 * # Safety
 * `solution` must be a live handle and `buf` must point to `len` writable doubles.
 */
enum HmaStatus hma_solution_phi(const struct HmaSolution *solution, double *buf, size_t len);

/**
 * Runs estimate checks and returns one JSON record per line in `*json_out`,
 * to be released with [`hma_string_free`]. `checks` is a comma-separated
 * filter, or null for all checks. Returns `HMA_STATUS_CHECK` when a
 * theorem-backed check fails; the report is still written.
 *
 * # Safety
 * Handles must be live, `checks` null or nul-terminated, `json_out` writable.
 */
enum HmaStatus hma_diagnose(const struct HmaProblem *problem,
                            const struct HmaSolution *solution,
                            const char *checks,
                            char **json_out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void hma_string_free(char *s);

/**
 * Computes the Gauduchon conformal factor `u` (with `sup u = 0`) of the
 * problem's metric into `buf`. `tol <= 0` uses the scenario default.
 *
 * # Safety
 * `problem` must be a live handle, `buf` must point to `len` writable doubles,
 * `residual_out` must be null or writable.
 */
enum HmaStatus hma_gauduchon(const struct HmaProblem *problem,
                             double tol,
                             double *buf,
                             size_t len,
                             double *residual_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HMA_H */
