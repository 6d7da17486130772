#ifndef PARAXIAL_H
#define PARAXIAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PxStatus {
  PX_STATUS_OK = 0,
  PX_STATUS_NULL_POINTER = 1,
  PX_STATUS_INVALID_ARGUMENT = 2,
  PX_STATUS_PRECONDITION = 3,
  /**
   * Collapse regime or degenerate beam: the quantity is undefined.
   */
  PX_STATUS_DEGENERATE = 4,
  /**
   * The field reached the domain boundary.
   */
  PX_STATUS_DOMAIN_OVERFLOW = 5,
  /**
   * Non-finite field during propagation.
   */
  PX_STATUS_INSTABILITY = 6,
  PX_STATUS_IO = 7,
  /**
   * A Rust panic was caught at the boundary.
   */
  PX_STATUS_INTERNAL = 8,
} PxStatus;

/**
 * Sampled transverse field on a square periodic grid.
 */
typedef struct PxField PxField;

/**
 * Longitudinal profile α(u).
 */
typedef struct PxProfile PxProfile;

/**
 * Result of a propagation run.
 */
typedef struct PxRecord PxRecord;

typedef struct PxGrid {
  /**
   * Points per side, a power of two ≥ 64.
   */
  size_t n;
  double extent;
  double du;
  size_t record_stride;
} PxGrid;

/**
 * Coefficients of `2ik ∂ψ/∂u = −εΔψ + γ|ψ|²ψ + εk²α²(u)r²ψ`.
 * `epsilon` is +1 (atomic) or −1 (optical); `alpha` is borrowed.
 */
typedef struct PxParams {
  double k;
  int32_t epsilon;
  double gamma;
  const struct PxProfile *alpha;
} PxParams;

typedef struct PxMoments {
  double r2;
  double q;
  double k_exp;
  double v_exp;
  double u_exp;
  double h0;
  double w2;
  double centroid_x;
  double centroid_y;
  double mean_kx;
  double mean_ky;
  int32_t epsilon;
} PxMoments;

/**
 * One recorded sample. `k_exp` and `v_exp` are NaN when not available.
 */
typedef struct PxSample {
  double u;
  double r2;
  double w2;
  double q;
  double k_exp;
  double v_exp;
  double u_exp;
  double h0;
  double mi4;
  double inv_r;
} PxSample;

typedef struct PxDiagnostics {
  size_t steps;
  double max_norm_drift_per_step;
  double norm_drift;
  /**
   * NaN unless α is constant.
   */
  double energy_drift;
  double mi4_drift;
  bool collapse_regime;
} PxDiagnostics;

/**
 * Ray matrix `[[a, b], [c, d]]` with unit determinant.
 */
typedef struct PxMatrix {
  double a;
  double b;
  double c;
  double d;
} PxMatrix;

/**
 * `1/q = 1/R + i·imag` with `imag = M_I²/(k w²)`.
 */
typedef struct PxInverseQ {
  double inv_r;
  double imag;
} PxInverseQ;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. Valid
 * until the next failing call on the same thread.
 */
const char *px_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *px_version(void);

enum PxStatus px_profile_constant(double value, struct PxProfile **out_profile);

/**
 * `values[i]` on `[breaks[i-1], breaks[i])`; needs `n_values = n_breaks + 1`.
 */
enum PxStatus px_profile_piecewise(const double *breaks,
                                   size_t n_breaks,
                                   const double *values,
                                   size_t n_values,
                                   struct PxProfile **out_profile);

/**
 * `α²(u) = mean_sq (1 + depth sin(angular_frequency u + phase))`.
 */
enum PxStatus px_profile_sinusoidal_squared(double mean_sq,
                                            double depth,
                                            double angular_frequency,
                                            double phase,
                                            struct PxProfile **out_profile);

/**
 * Linear interpolation of `(u[i], values[i])`, clamped outside the table.
 */
enum PxStatus px_profile_tabulated(const double *u,
                                   const double *values,
                                   size_t len,
                                   struct PxProfile **out_profile);

void px_profile_free(struct PxProfile *profile);

/**
 * Normalized Gaussian `exp(−r²/2σ² + ikr²/2R)` centered on the grid.
 * `curvature_radius = 0` means a flat phase.
 */
enum PxStatus px_field_gaussian(const struct PxGrid *grid,
                                double sigma,
                                double k,
                                double curvature_radius,
                                struct PxField **out_field);

/**
 * Field from `n*n` row-major samples given as interleaved (re, im) pairs,
 * `2*n*n` doubles. The field is normalized.
 */
enum PxStatus px_field_from_samples(size_t n,
                                    double extent,
                                    const double *re_im,
                                    struct PxField **out_field);

/**
 * Copies the samples as interleaved (re, im) pairs into `re_im`, which
 * holds `capacity` doubles; `out_len` receives `2*n*n`.
 */
enum PxStatus px_field_samples(const struct PxField *field,
                               double *re_im,
                               size_t capacity,
                               size_t *out_len);

void px_field_free(struct PxField *field);

enum PxStatus px_field_moments(const struct PxField *field,
                               const struct PxParams *params,
                               double u,
                               struct PxMoments *out_moments);

/**
 * `M_I⁴ = ε⟨r²⟩⟨Ĥ₀⟩ − ⟨Q̂⟩²`.
 */
enum PxStatus px_quality_factor(const struct PxMoments *m, double *out_mi4);

/**
 * Linear density `1/(2|a_s|)` at which a Gaussian reaches `M_I = 0`.
 */
enum PxStatus px_self_trapping_threshold(double a_s, double *out_n1d);

/**
 * Runs the split-step solver from `u0` to `u1`.
 */
enum PxStatus px_propagate(const struct PxField *field,
                           const struct PxParams *params,
                           const struct PxGrid *grid,
                           double u0,
                           double u1,
                           struct PxRecord **out_record);

/**
 * Number of recorded samples; 0 for a null record.
 */
size_t px_record_len(const struct PxRecord *record);

enum PxStatus px_record_sample(const struct PxRecord *record,
                               size_t index,
                               struct PxSample *out_sample);

enum PxStatus px_record_diagnostics(const struct PxRecord *record, struct PxDiagnostics *out_diag);

/**
 * Copy of the field at the end of the run, as a new handle.
 */
enum PxStatus px_record_final_field(const struct PxRecord *record, struct PxField **out_field);

void px_record_free(struct PxRecord *record);

enum PxStatus px_free_matrix(double u, struct PxMatrix *out_matrix);

enum PxStatus px_harmonic_matrix(double alpha, double u, struct PxMatrix *out_matrix);

/**
 * `m2 · m1`: first `m1`, then `m2`.
 */
enum PxStatus px_compose(const struct PxMatrix *m2,
                         const struct PxMatrix *m1,
                         struct PxMatrix *out_matrix);

/**
 * Integrates `M′ = [[0, 1], [−α², 0]] M` from the identity over `[u0, u1]`.
 */
enum PxStatus px_matrix_ode(const struct PxProfile *alpha,
                            double u0,
                            double u1,
                            double step,
                            struct PxMatrix *out_matrix);

/**
 * Complex curvature of a beam from its moments and `M_I⁴`.
 */
enum PxStatus px_q_from_moments(const struct PxMoments *m,
                                double mi4,
                                double k,
                                struct PxInverseQ *out_q);

/**
 * Möbius action of a ray matrix on `q`.
 */
enum PxStatus px_propagate_q(const struct PxInverseQ *q,
                             const struct PxMatrix *m,
                             struct PxInverseQ *out_q);

/**
 * `w² = M_I²/(k·imag)`.
 */
enum PxStatus px_q_width2(const struct PxInverseQ *q, double mi4, double k, double *out_w2);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARAXIAL_H */
