#ifndef IMPULSE_HUM_H
#define IMPULSE_HUM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IhumBc {
  IHUM_BC_DIRICHLET = 0,
  IHUM_BC_NEUMANN = 1,
  IHUM_BC_DYNAMIC = 2,
} IhumBc;

typedef enum IhumScheme {
  IHUM_SCHEME_MATRIX_EXPONENTIAL = 0,
  IHUM_SCHEME_CRANK_NICOLSON = 1,
} IhumScheme;

typedef enum IhumStatus {
  IHUM_STATUS_OK = 0,
  IHUM_STATUS_NULL_POINTER = 1,
  IHUM_STATUS_INVALID_ARGUMENT = 2,
  IHUM_STATUS_INVALID_PROBLEM = 3,
  IHUM_STATUS_BREAKDOWN = 4,
  IHUM_STATUS_BUFFER_TOO_SMALL = 5,
  IHUM_STATUS_NOT_SOLVED = 6,
  IHUM_STATUS_PANIC = 7,
} IhumStatus;

// Opaque solver handle.
typedef struct IhumSolver IhumSolver;

// Problem parameters. Obtain defaults from [`ihum_config_default`].
typedef struct IhumConfig {
  enum IhumBc bc;
  double final_time;
  double tau;
  double omega_start;
  double omega_end;
  size_t n_x;
  double eps;
  double tol;
  size_t max_iter;
  enum IhumScheme scheme;
  // Time step, used only by `IHUM_SCHEME_CRANK_NICOLSON`.
  double dt;
} IhumConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Fills `out` with the reference configuration (Dirichlet boundary).
//
// # Safety
// `out` must be null or point to writable memory for one `IhumConfig`.
enum IhumStatus ihum_config_default(struct IhumConfig *out);

// Creates a solver. On success `*out` receives a handle to release with
// [`ihum_solver_free`].
//
// # Safety
// `config` must point to a valid `IhumConfig`; `out` must be writable.
enum IhumStatus ihum_solver_new(const struct IhumConfig *config, struct IhumSolver **out);

// Releases a solver. Null is accepted.
//
// # Safety
// `solver` must be null or a handle from [`ihum_solver_new`] not yet freed.
void ihum_solver_free(struct IhumSolver *solver);

// Number of degrees of freedom of the discrete state.
//
// # Safety
// `solver` must be a live handle; `out` must be writable.
enum IhumStatus ihum_solver_dof_count(const struct IhumSolver *solver, size_t *out);

// Replaces the initial datum with `len` values, one per degree of freedom.
// Discards any previous solution.
//
// # Safety
// `solver` must be a live handle; `values` must point to `len` doubles.
enum IhumStatus ihum_solver_set_datum(struct IhumSolver *solver, const double *values, size_t len);

// Runs conjugate gradient and simulates the controlled state.
//
// # Safety
// `solver` must be a live handle.
enum IhumStatus ihum_solver_solve(struct IhumSolver *solver);

// # Safety
// `solver` must be a live handle; `out` must be writable.
enum IhumStatus ihum_solver_iterations(const struct IhumSolver *solver, size_t *out);

// # Safety
// `solver` must be a live handle; `out` must be writable.
enum IhumStatus ihum_solver_converged(const struct IhumSolver *solver, bool *out);

// Weighted L² norm of the controlled state at the final time.
//
// # Safety
// `solver` must be a live handle; `out` must be writable.
enum IhumStatus ihum_solver_final_norm(const struct IhumSolver *solver, double *out);

// L² norm of the impulse over the control region.
//
// # Safety
// `solver` must be a live handle; `out` must be writable.
enum IhumStatus ihum_solver_control_norm(const struct IhumSolver *solver, double *out);

// Copies the impulse control (one value per degree of freedom) into `buf`.
//
// # Safety
// `solver` must be a live handle; `buf` must hold `len` doubles.
enum IhumStatus ihum_solver_copy_control(const struct IhumSolver *solver, double *buf, size_t len);

// Copies the controlled final state into `buf`.
//
// # Safety
// `solver` must be a live handle; `buf` must hold `len` doubles.
enum IhumStatus ihum_solver_copy_final_state(const struct IhumSolver *solver,
                                             double *buf,
                                             size_t len);

// Message for the most recent failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *ihum_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IMPULSE_HUM_H */
