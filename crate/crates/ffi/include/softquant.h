#ifndef SOFTQUANT_H
#define SOFTQUANT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum SqStatus {
  SQ_STATUS_OK = 0,
  SQ_STATUS_NULL_POINTER = 1,
  SQ_STATUS_INVALID_ARGUMENT = 2,
  SQ_STATUS_INVALID_CONFIG = 3,
  SQ_STATUS_NOT_EXECUTED = 4,
  SQ_STATUS_BUFFER_TOO_SMALL = 5,
  SQ_STATUS_RUNTIME = 6,
  SQ_STATUS_PANIC = 7,
} SqStatus;

// One optimizer run at a fixed lambda and seed.
typedef struct SqRun SqRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call into the library from the
// same thread.
const char *sq_last_error(void);

// Library version as a static NUL-terminated string.
const char *sq_version(void);

// Smooth minimum of `n` values under probability weights; `lambda = 0`
// gives the minimum over positively weighted values.
//
// # Safety
// `values` and `weights` must point to `n` doubles, `out` to one.
enum SqStatus sq_smooth_min(const double *values,
                            const double *weights,
                            size_t n,
                            double lambda,
                            double *out);

// Gibbs density `sigma_j` of `n` values, written to `out[0..n]`. Requires
// `lambda > 0`.
//
// # Safety
// `values` and `weights` must point to `n` doubles, `out` to `n` writable ones.
enum SqStatus sq_softmin(const double *values,
                         const double *weights,
                         size_t n,
                         double lambda,
                         double *out);

// Index of the smallest positively weighted value, lowest index on ties.
//
// # Safety
// `values` and `weights` must point to `n` doubles, `out` to one `size_t`.
enum SqStatus sq_hard_assignment(const double *values,
                                 const double *weights,
                                 size_t n,
                                 size_t *out);

// Optimal value of the regularized transport problem between `p` (length
// `n`) and reference weights `q` (length `m`) for the row-major `n x m`
// cost matrix.
//
// # Safety
// Pointers must reference `n`, `m` and `n * m` doubles; `out` one double.
enum SqStatus sq_closed_form_value(const double *p,
                                   size_t n,
                                   const double *q,
                                   size_t m,
                                   const double *cost,
                                   double lambda,
                                   double *out);

// Creates a run from a built-in recipe. `iterations = 0` keeps the
// recipe's budget.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum SqStatus sq_run_from_recipe(const char *name,
                                 double lambda,
                                 uint64_t seed,
                                 uint64_t iterations,
                                 struct SqRun **out);

// Creates a run from the first recipe of a TOML recipe document.
// `iterations = 0` keeps the document's budget.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum SqStatus sq_run_from_toml(const char *toml,
                               double lambda,
                               uint64_t seed,
                               uint64_t iterations,
                               struct SqRun **out);

// Runs the optimizer; calling it again recomputes the same result.
//
// # Safety
// `run` must come from `sq_run_from_*` and not be freed.
enum SqStatus sq_run_execute(struct SqRun *run);

// Number of atoms `m` and dimension `d` of the run.
//
// # Safety
// `run` must be a live handle; `m` and `dim` valid pointers.
enum SqStatus sq_run_shape(const struct SqRun *run, size_t *m, size_t *dim);

// Final atom locations, row-major `m x d`, into `buf` of length `len`.
//
// # Safety
// `run` must be a live handle; `buf` must hold `len` doubles.
enum SqStatus sq_run_locations(const struct SqRun *run, double *buf, size_t len);

// Final atom weights into `buf` of length `len`.
//
// # Safety
// `run` must be a live handle; `buf` must hold `len` doubles.
enum SqStatus sq_run_weights(const struct SqRun *run, double *buf, size_t len);

// Number of distinct final locations at the recipe's merge radius.
//
// # Safety
// `run` must be a live handle; `out` a valid pointer.
enum SqStatus sq_run_distinct_count(const struct SqRun *run, size_t *out);

// Final objective at the run's lambda on the evaluation sample.
//
// # Safety
// `run` must be a live handle; `out` a valid pointer.
enum SqStatus sq_run_objective(const struct SqRun *run, double *out);

// Releases a run; null is ignored.
//
// # Safety
// `run` must be null or a handle not freed before.
void sq_run_free(struct SqRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOFTQUANT_H */
