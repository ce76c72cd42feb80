#ifndef TSP_H
#define TSP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every function.
typedef enum TspStatus {
  TSP_STATUS_OK = 0,
  TSP_STATUS_NULL_POINTER = 1,
  TSP_STATUS_INVALID_ARGUMENT = 2,
  TSP_STATUS_DIMENSION_MISMATCH = 3,
  TSP_STATUS_NOT_T_SPD = 4,
  TSP_STATUS_IMAGINARY_RESIDUE = 5,
  TSP_STATUS_DIVERGED = 6,
  TSP_STATUS_IO = 7,
  TSP_STATUS_PARSE = 8,
  TSP_STATUS_BUFFER_TOO_SMALL = 9,
  TSP_STATUS_PANIC = 99,
} TspStatus;

// Opaque solve outcome: the solution tensor and its run record.
typedef struct TspSolution TspSolution;

// Opaque real tensor of shape m×n×l.
typedef struct TspTensor TspTensor;

// Solver options. String fields may be null for their defaults; `q = 0`
// means ⌈m/τ⌉ and a NaN `theta` means the method default.
typedef struct TspSolveOptions {
  // Method name such as "NTSP" or "ATSP-MD-II".
  const char *method;
  // slice, block, gaussian, fourier-row or fourier-gaussian (default slice).
  const char *sketch;
  size_t tau;
  size_t q;
  // uniform, slice-norm, sketch-norm or fourier-row-norm (default uniform).
  const char *prob;
  double theta;
  double tol;
  size_t max_iters;
  uint64_t seed;
} TspSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the next failing call.
const char *tsp_last_error(void);

// Creates an m×n×l tensor from `len = m·n·l` entries in row-major (i, j, k) order.
//
// # Safety
// `data` must point to `len` readable doubles and `out` must be writable.
enum TspStatus tsp_tensor_new(size_t m,
                              size_t n,
                              size_t l,
                              const double *data,
                              size_t len,
                              struct TspTensor **out);

// Reads a `.tns` file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum TspStatus tsp_tensor_load(const char *path, struct TspTensor **out);

// Writes a `.tns` file.
//
// # Safety
// `t` must be a live handle and `path` a NUL-terminated string.
enum TspStatus tsp_tensor_save(const struct TspTensor *t, const char *path);

// Writes the shape into the three out-parameters.
//
// # Safety
// `t` must be a live handle; the out-pointers must be writable.
enum TspStatus tsp_tensor_dims(const struct TspTensor *t, size_t *m, size_t *n, size_t *l);

// Copies the entries in row-major (i, j, k) order into `buf` of capacity `len`.
//
// # Safety
// `t` must be a live handle and `buf` must hold `len` writable doubles.
enum TspStatus tsp_tensor_copy(const struct TspTensor *t, double *buf, size_t len);

// Releases a tensor; null is ignored.
//
// # Safety
// `t` must come from this library and not be used afterwards.
void tsp_tensor_free(struct TspTensor *t);

// out = a ∗ b.
//
// # Safety
// `a`, `b` must be live handles and `out` writable.
enum TspStatus tsp_tprod(const struct TspTensor *a,
                         const struct TspTensor *b,
                         struct TspTensor **out);

// Options with every field at its default (NTSP, slice sketches, tol 1e-6).
struct TspSolveOptions tsp_solve_options_default(void);

// Solves a ∗ X = b. `truth` may be null; ε is then the relative residual.
//
// # Safety
// Handles must be live, `opts` readable and `out` writable.
enum TspStatus tsp_solve(const struct TspTensor *a,
                         const struct TspTensor *b,
                         const struct TspTensor *truth,
                         const struct TspSolveOptions *opts,
                         struct TspSolution **out);

// Copies the solution into a new tensor handle.
//
// # Safety
// `s` must be a live handle and `out` writable.
enum TspStatus tsp_solution_x(const struct TspSolution *s, struct TspTensor **out);

// Iterations run, final ε, and whether the stopping tolerance was met.
//
// # Safety
// `s` must be a live handle; non-null out-pointers must be writable.
enum TspStatus tsp_solution_summary(const struct TspSolution *s,
                                    size_t *iterations,
                                    double *epsilon,
                                    bool *converged);

// Writes the iteration trace as CSV.
//
// # Safety
// `s` must be a live handle and `path` a NUL-terminated string.
enum TspStatus tsp_solution_write_trace(const struct TspSolution *s, const char *path);

// Releases a solution; null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void tsp_solution_free(struct TspSolution *s);

// Rate constants of the spatial family described by `opts` (method ignored),
// as a JSON string released with [`tsp_string_free`]. Q is the identity.
//
// # Safety
// `a` must be a live handle, `opts` readable and `out` writable.
enum TspStatus tsp_rate_report_json(const struct TspTensor *a,
                                    const struct TspSolveOptions *opts,
                                    size_t samples,
                                    char **out);

// Releases a string returned by this library; null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void tsp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TSP_H */
