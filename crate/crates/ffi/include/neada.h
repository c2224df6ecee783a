#ifndef NEADA_H
#define NEADA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  NEADA_STATUS_OK = 0,
  NEADA_STATUS_NULL_POINTER = 1,
  NEADA_STATUS_INVALID_ARGUMENT = 2,
  NEADA_STATUS_SHAPE_MISMATCH = 3,
  NEADA_STATUS_OUT_OF_RANGE = 4,
  NEADA_STATUS_RUNTIME = 5,
  NEADA_STATUS_PANIC = 6,
} NeadaStatus;

typedef enum {
  /**
   * Squared gradient mapping at most `1/(t+1)`.
   */
  NEADA_CRITERION_I = 0,
  /**
   * Exactly `t+1` inner iterations.
   */
  NEADA_CRITERION_II = 1,
  NEADA_CRITERION_GRAD_OR_CAP = 2,
  /**
   * `fixed_k` inner iterations.
   */
  NEADA_CRITERION_FIXED = 3,
} NeadaCriterion;

typedef enum {
  NEADA_PSI_KIND_GDA = 0,
  NEADA_PSI_KIND_ADAGRAD = 1,
  NEADA_PSI_KIND_ADAM = 2,
  NEADA_PSI_KIND_AMSGRAD = 3,
} NeadaPsiKind;

/**
 * Opaque test problem.
 */
typedef struct NeadaProblem NeadaProblem;

/**
 * Opaque recorded run.
 */
typedef struct NeadaTrajectory NeadaTrajectory;

/**
 * NeAda with a scalar AdaGrad outer step and a generalized AdaGrad inner
 * learner.
 */
typedef struct {
  double eta;
  double v0;
  size_t batch;
  NeadaCriterion criterion;
  uint64_t fixed_k;
  uint64_t outer_steps;
  /**
   * 0 means unlimited.
   */
  uint64_t max_oracle_calls;
  double inner_eta;
  double inner_alpha;
  double inner_v0;
  bool cold_start;
} NeadaNeAdaConfig;

/**
 * Averaging function; `gamma` is read for Adam and AMSGrad only.
 */
typedef struct {
  NeadaPsiKind kind;
  double gamma;
} NeadaPsi;

typedef struct {
  double eta_x;
  double eta_y;
  double beta_x;
  double beta_y;
  NeadaPsi psi_x;
  NeadaPsi psi_y;
  double v0_x;
  double v0_y;
  uint64_t steps;
} NeadaNonNestedConfig;

/**
 * One recorded outer step. `dist_y_star` is NaN when unavailable.
 */
typedef struct {
  uint64_t outer_t;
  uint64_t inner_iters;
  uint64_t oracle_calls_x;
  uint64_t oracle_calls_y;
  double grad_x_norm;
  double grad_map_y;
  double dist_y_star;
  double stationarity;
  double value;
  double v_outer;
} NeadaRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread. Valid until the next call
 * into the library from this thread; empty when nothing failed yet.
 */
const char *neada_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *neada_version(void);

/**
 * `f(x, y) = -y²/2 + L x y - L² x²/2` with scalar `x`, `y`.
 *
 * # Safety
 * `out` must be writable.
 */
NeadaStatus neada_problem_quadratic(double l, NeadaProblem **out);

/**
 * McCormick composite with `x, y ∈ R²`.
 *
 * # Safety
 * `out` must be writable.
 */
NeadaStatus neada_problem_mccormick(NeadaProblem **out);

/**
 * # Safety
 * `p` must come from a `neada_problem_*` constructor and not be used afterwards.
 */
void neada_problem_free(NeadaProblem *p);

/**
 * # Safety
 * `p` must be a live problem handle; `dim_x`, `dim_y` writable.
 */
NeadaStatus neada_problem_dims(const NeadaProblem *p, size_t *dim_x, size_t *dim_y);

/**
 * Objective value and exact gradients at `(x, y)`. `grad_x`/`grad_y` may be
 * null when not wanted; otherwise they must hold `nx`/`ny` values.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
NeadaStatus neada_problem_eval(const NeadaProblem *p,
                               const double *x,
                               size_t nx,
                               const double *y,
                               size_t ny,
                               double *value,
                               double *grad_x,
                               double *grad_y);

/**
 * Defaults: `eta = 1`, `v0 = 1`, batch 1, criterion I, 100 outer steps,
 * inner `eta = 1`, `alpha = 0.5`, `v0 = 1`, warm start.
 */
NeadaNeAdaConfig neada_neada_config_default(void);

/**
 * Non-nested adaptive descent-ascent. Gradients carry N(0, sigma²) noise
 * drawn from a generator seeded with `seed`.
 *
 * # Safety
 * `cfg` must be readable, `x0`/`y0` valid for `nx`/`ny` values and `out`
 * writable.
 */
NeadaStatus neada_run_nonnested(const NeadaProblem *p,
                                const NeadaNonNestedConfig *cfg,
                                double sigma,
                                uint64_t seed,
                                const double *x0,
                                size_t nx,
                                const double *y0,
                                size_t ny,
                                NeadaTrajectory **out);

/**
 * NeAda with scalar AdaGrad outer steps.
 *
 * # Safety
 * As for [`neada_run_nonnested`].
 */
NeadaStatus neada_run_neada(const NeadaProblem *p,
                            const NeadaNeAdaConfig *cfg,
                            double sigma,
                            uint64_t seed,
                            const double *x0,
                            size_t nx,
                            const double *y0,
                            size_t ny,
                            NeadaTrajectory **out);

/**
 * Number of recorded rows; 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live trajectory handle.
 */
size_t neada_trajectory_len(const NeadaTrajectory *t);

/**
 * 1 when the run stopped on a non-finite iterate, 0 otherwise.
 *
 * # Safety
 * `t` must be a live trajectory handle.
 */
int32_t neada_trajectory_diverged(const NeadaTrajectory *t);

/**
 * # Safety
 * `t` must be a live trajectory handle and `row` writable.
 */
NeadaStatus neada_trajectory_row(const NeadaTrajectory *t, size_t index, NeadaRow *row);

/**
 * Copies the final iterates; `nx`/`ny` must equal the problem dimensions.
 *
 * # Safety
 * `x`/`y` must be writable for `nx`/`ny` values.
 */
NeadaStatus neada_trajectory_final(const NeadaTrajectory *t,
                                   double *x,
                                   size_t nx,
                                   double *y,
                                   size_t ny);

/**
 * # Safety
 * `t` must be null or a live handle that is not used afterwards.
 */
void neada_trajectory_free(NeadaTrajectory *t);

/**
 * `|∇ₓf|` after `steps` GDA steps on the quadratic, from `grad0`.
 *
 * # Safety
 * `out` must be writable.
 */
NeadaStatus neada_lemma1_gda_predict(double l,
                                     double r,
                                     double eta_x,
                                     double grad0,
                                     uint64_t steps,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEADA_H */
