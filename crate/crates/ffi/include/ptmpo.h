#ifndef PTMPO_H
#define PTMPO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every call.
 */
typedef enum PtmpoStatus {
  PTMPO_STATUS_OK = 0,
  PTMPO_STATUS_NULL_POINTER = 1,
  PTMPO_STATUS_DIMENSION = 2,
  PTMPO_STATUS_INVALID_ARGUMENT = 3,
  PTMPO_STATUS_NUMERICAL = 4,
  PTMPO_STATUS_IO = 5,
  PTMPO_STATUS_FORMAT = 6,
  PTMPO_STATUS_PANIC = 7,
} PtmpoStatus;

/*
 Opaque process tensor handle.
 */
typedef struct PtmpoProcessTensor PtmpoProcessTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length without the NUL.
 */
size_t ptmpo_last_error_message(char *buf, size_t len);

/*
 Reads a process tensor file.
 */
enum PtmpoStatus ptmpo_pt_load(const char *path, struct PtmpoProcessTensor **out);

/*
 Writes a process tensor file.
 */
enum PtmpoStatus ptmpo_pt_save(const struct PtmpoProcessTensor *pt, const char *path);

/*
 Releases a handle. Null is ignored.
 */
void ptmpo_pt_free(struct PtmpoProcessTensor *pt);

/*
 Number of time steps `T`.
 */
enum PtmpoStatus ptmpo_pt_steps(const struct PtmpoProcessTensor *pt, size_t *out);

/*
 System Hilbert space dimension `S`.
 */
enum PtmpoStatus ptmpo_pt_system_dim(const struct PtmpoProcessTensor *pt, size_t *out);

/*
 Time step.
 */
enum PtmpoStatus ptmpo_pt_dt(const struct PtmpoProcessTensor *pt, double *out);

/*
 Bond dimensions for bonds `0..=T` (`T + 1` entries). Fails with
 `Dimension` when `len` is too small; `out_len` always receives `T + 1`.
 */
enum PtmpoStatus ptmpo_pt_bond_profile(const struct PtmpoProcessTensor *pt,
                                       size_t *buf,
                                       size_t len,
                                       size_t *out_len);

/*
 Hierarchy process tensor from `n_terms` exponentials
 `C(t) = sum_k alpha_k exp(i gamma_k t)`, `C(t)^* = sum_k alpha_tilde_k exp(i gamma_k t)`.
 `alpha`, `alpha_tilde` and `gamma` hold `n_terms` complex values; `coupling`
 is the `S x S` system coupling operator.
 */
enum PtmpoStatus ptmpo_heom_build(const double *alpha,
                                  const double *alpha_tilde,
                                  const double *gamma,
                                  size_t n_terms,
                                  const double *coupling,
                                  size_t system_dim,
                                  size_t depth,
                                  double dt,
                                  size_t steps,
                                  struct PtmpoProcessTensor **out);

/*
 Recompressed copy with relative singular value threshold `eps_rel`.
 `max_discarded` (optional) receives the largest discarded relative singular value.
 */
enum PtmpoStatus ptmpo_pt_recompress(const struct PtmpoProcessTensor *pt,
                                     double eps_rel,
                                     struct PtmpoProcessTensor **out,
                                     double *max_discarded);

/*
 `exp(-i [H, .] dt)` for an `S x S` Hamiltonian; writes `L x L` complex values.
 */
enum PtmpoStatus ptmpo_step_propagator(const double *hamiltonian,
                                       size_t system_dim,
                                       double dt,
                                       double *out_prop);

/*
 Reduced states `rho_0..rho_T` for `T` step propagators (`T * L * L` complex
 values) and an initial state (`L` complex values). Writes `(T + 1) * L`
 complex values.
 */
enum PtmpoStatus ptmpo_pt_dynamics(const struct PtmpoProcessTensor *pt,
                                   const double *props,
                                   const double *rho0,
                                   double *out_states);

/*
 Terminal cost `1 - Re tr(target^dagger rho_T)` and its gradient with respect
 to every step propagator, `dZ/dU_k[mu][nu]` (`T * L * L` complex values,
 holomorphic convention: `dZ = Re sum G[mu][nu] dU[mu][nu]`).
 */
enum PtmpoStatus ptmpo_pt_gradient(const struct PtmpoProcessTensor *pt,
                                   const double *props,
                                   const double *rho0,
                                   const double *target,
                                   double *out_cost,
                                   double *out_grad);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PTMPO_H */
