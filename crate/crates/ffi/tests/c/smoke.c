#include <math.h>
#include <stdio.h>
#include "tsp.h"

#define CHECK(call)                                                      \
  do {                                                                   \
    TspStatus s_ = (call);                                               \
    if (s_ != TSP_STATUS_OK) {                                           \
      fprintf(stderr, "%s -> %d: %s\n", #call, s_, tsp_last_error());    \
      return 1;                                                          \
    }                                                                    \
  } while (0)

int main(void) {
  /* A is 6x3x2 and X is 3x1x2, row-major (i, j, k) */
  double a[36], x[6];
  unsigned int state = 12345u;
  for (int i = 0; i < 36; i++) {
    state = state * 1103515245u + 12345u;
    a[i] = (double)(state >> 8) / (double)(1u << 24) - 0.5;
  }
  for (int i = 0; i < 6; i++) x[i] = cos(0.3 * i);
  TspTensor *ta = NULL, *tx = NULL, *tb = NULL, *sol = NULL;
  CHECK(tsp_tensor_new(6, 3, 2, a, 36, &ta));
  CHECK(tsp_tensor_new(3, 1, 2, x, 6, &tx));
  CHECK(tsp_tprod(ta, tx, &tb));

  TspSolveOptions o = tsp_solve_options_default();
  o.method = "ATSP-MD";
  o.tol = 1e-10;
  TspSolution *s = NULL;
  CHECK(tsp_solve(ta, tb, tx, &o, &s));
  size_t iters = 0;
  double eps = 1.0;
  bool ok = false;
  CHECK(tsp_solution_summary(s, &iters, &eps, &ok));
  CHECK(tsp_solution_x(s, &sol));
  double got[6];
  CHECK(tsp_tensor_copy(sol, got, 6));
  double err = 0.0;
  for (int i = 0; i < 6; i++) err += (got[i] - x[i]) * (got[i] - x[i]);

  if (tsp_tensor_new(2, 2, 2, a, 7, &sol) != TSP_STATUS_DIMENSION_MISMATCH || tsp_last_error() == NULL) return 2;

  printf("iterations=%zu epsilon=%g converged=%d err=%g\n", iters, eps, ok, sqrt(err));
  tsp_solution_free(s);
  tsp_tensor_free(ta);
  tsp_tensor_free(tx);
  tsp_tensor_free(tb);
  return ok && sqrt(err) < 1e-8 ? 0 : 3;
}
