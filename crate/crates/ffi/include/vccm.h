#ifndef VCCM_H
#define VCCM_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VccmStatus {
  VCCM_STATUS_OK = 0,
  VCCM_STATUS_NULL_POINTER = 1,
  VCCM_STATUS_INVALID_UTF8 = 2,
  VCCM_STATUS_INVALID_ARGUMENT = 3,
  VCCM_STATUS_INFEASIBLE = 4,
  VCCM_STATUS_VALIDATION_FAILED = 5,
  VCCM_STATUS_SIMULATION = 6,
  VCCM_STATUS_IO = 7,
  VCCM_STATUS_PANIC = 8,
} VccmStatus;

typedef enum VccmControllerKind {
  VCCM_CONTROLLER_KIND_VCCM = 0,
  VCCM_CONTROLLER_KIND_GSC1 = 1,
  VCCM_CONTROLLER_KIND_GSC2 = 2,
  VCCM_CONTROLLER_KIND_GLPV = 3,
} VccmControllerKind;

/**
 * A contraction certificate (W(σ), Y(σ)).
 */
typedef struct VccmCertificate VccmCertificate;

/**
 * A tracking law built for one system.
 */
typedef struct VccmController VccmController;

/**
 * A plant with its embedding, scheduling map and target.
 */
typedef struct VccmSystem VccmSystem;

/**
 * A recorded closed-loop run.
 */
typedef struct VccmTrajectory VccmTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *vccm_last_error(void);

/**
 * Releases a string returned by this library.
 */
void vccm_string_free(char *s);

/**
 * Builds a registry system by name.
 */
enum VccmStatus vccm_system_from_name(const char *name, struct VccmSystem **out);

/**
 * Builds a system from its JSON description.
 */
enum VccmStatus vccm_system_from_json(const char *json, struct VccmSystem **out);

/**
 * State, input, disturbance and output dimensions.
 */
enum VccmStatus vccm_system_dims(const struct VccmSystem *sys,
                                 size_t *n,
                                 size_t *m,
                                 size_t *p,
                                 size_t *q);

void vccm_system_free(struct VccmSystem *sys);

/**
 * Built-in certificate of a registry system.
 */
enum VccmStatus vccm_certificate_reference(const struct VccmSystem *sys,
                                           struct VccmCertificate **out);

/**
 * Solves the stabilization conditions with contraction rate `lambda` on a
 * `grid_points`-per-axis grid, W of degree `w_degree` and Y of degree `y_degree`.
 */
enum VccmStatus vccm_synthesize(const struct VccmSystem *sys,
                                double lambda,
                                uint32_t w_degree,
                                uint32_t y_degree,
                                size_t grid_points,
                                struct VccmCertificate **out);

enum VccmStatus vccm_certificate_from_json(const char *json, struct VccmCertificate **out);

/**
 * JSON text of a certificate; release it with [`vccm_string_free`].
 */
enum VccmStatus vccm_certificate_to_json(const struct VccmCertificate *cert, char **out);

/**
 * Gain K(σ) = Y(σ)W(σ)⁻¹ at one scheduling point, written row-major into
 * `gain` (capacity `len` ≥ m·n).
 */
enum VccmStatus vccm_certificate_gain(const struct VccmCertificate *cert,
                                      const double *sigma,
                                      size_t sigma_len,
                                      double *gain,
                                      size_t len);

/**
 * Dense validation of `cert` for `sys`. Returns `VCCM_STATUS_VALIDATION_FAILED`
 * (with `margin` still written) when a block condition fails.
 */
enum VccmStatus vccm_certificate_validate(const struct VccmSystem *sys,
                                          const struct VccmCertificate *cert,
                                          size_t grid_points,
                                          double *margin);

void vccm_certificate_free(struct VccmCertificate *cert);

/**
 * Creates a controller; `cert` may be null for the gain-scheduled laws.
 */
enum VccmStatus vccm_controller_new(const struct VccmSystem *sys,
                                    enum VccmControllerKind kind,
                                    const struct VccmCertificate *cert,
                                    struct VccmController **out);

void vccm_controller_free(struct VccmController *ctrl);

/**
 * Simulates the closed loop to the set-point with family parameter `setpoint`
 * from `x0` (length n) with fixed step `dt` up to `t_end`.
 */
enum VccmStatus vccm_simulate_setpoint(const struct VccmSystem *sys,
                                       const struct VccmController *ctrl,
                                       double setpoint,
                                       const double *x0,
                                       size_t n,
                                       double t_end,
                                       double dt,
                                       struct VccmTrajectory **out);

/**
 * Number of recorded samples.
 */
enum VccmStatus vccm_trajectory_len(const struct VccmTrajectory *tr, size_t *len);

/**
 * Time and state of sample `k`; `x` has capacity `n`.
 */
enum VccmStatus vccm_trajectory_sample(const struct VccmTrajectory *tr,
                                       size_t k,
                                       double *t,
                                       double *x,
                                       size_t n);

/**
 * First time the state left the blow-up bound, or NaN.
 */
enum VccmStatus vccm_trajectory_blowup_time(const struct VccmTrajectory *tr, double *t);

/**
 * Exponential fit of |x − x*| over the default window.
 */
enum VccmStatus vccm_trajectory_decay(const struct VccmTrajectory *tr, double *lambda, double *r);

enum VccmStatus vccm_trajectory_write_csv(const struct VccmTrajectory *tr, const char *path);

void vccm_trajectory_free(struct VccmTrajectory *tr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VCCM_H */
