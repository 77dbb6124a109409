#ifndef COHERENT_SOLITON_H
#define COHERENT_SOLITON_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CsEngine {
  CS_ENGINE_AUTO = 0,
  CS_ENGINE_DENSE_EIG = 1,
  CS_ENGINE_KRYLOV = 2,
} CsEngine;

typedef enum CsClassicalMode {
  CS_CLASSICAL_MODE_LATTICE_ODE = 0,
  CS_CLASSICAL_MODE_SPLIT_STEP = 1,
} CsClassicalMode;

typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_POINTER = 1,
  CS_STATUS_INVALID_PARAMETER = 2,
  CS_STATUS_DIMENSION_BUDGET = 3,
  CS_STATUS_DIMENSION_MISMATCH = 4,
  CS_STATUS_TRUNCATION = 5,
  CS_STATUS_NON_FINITE = 6,
  CS_STATUS_CONVERGENCE = 7,
  CS_STATUS_IO = 8,
  CS_STATUS_BUFFER_TOO_SMALL = 9,
  CS_STATUS_PANIC = 10,
} CsStatus;

typedef struct CsField CsField;

typedef struct CsModel CsModel;

typedef struct CsState CsState;

/**
 * Knobs shared by the quantum-classical comparisons.
 */
typedef struct CsOptions {
  /**
   * Classical step size.
   */
  double dt;
  enum CsEngine engine;
  size_t krylov_dim;
  double tolerance;
  size_t dense_threshold;
  double max_tail;
  /**
   * Nonzero aborts on truncation overflow; zero only logs.
   */
  uint8_t strict_truncation;
  enum CsClassicalMode classical_mode;
} CsOptions;

/**
 * Short-time fit `r(Δt) ≈ 1 + s₁Δt + s₂Δt²`.
 */
typedef struct CsSlope {
  double s1_re;
  double s1_im;
  double s2_re;
  double s2_im;
  double s1_err;
  double s2_err;
  /**
   * Imaginary part of `-i (c/Δ) Σ|α|⁴`; the real part is zero.
   */
  double predicted_im;
  double relative_error;
  /**
   * Nonzero when the smallest-half refit agrees with `s₁` within its error bar.
   */
  uint8_t consistent;
} CsSlope;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *cs_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the next
 * failing call on the same thread.
 */
const char *cs_last_error_message(void);

struct CsOptions cs_options_default(void);

/**
 * Periodic lattice of `sites` sites, spacing `spacing`, coupling `c`, per-site
 * cutoff `n_max`. Fails with `DimensionBudget` before allocating a large basis.
 *
 * # Safety
 * `out` must be a valid pointer to writable handle storage.
 */
enum CsStatus cs_model_new(size_t sites,
                           double spacing,
                           double coupling,
                           size_t n_max,
                           struct CsModel **out);

/**
 * # Safety
 * `model` is NULL or a handle from [`cs_model_new`] not yet freed.
 */
void cs_model_free(struct CsModel *model);

/**
 * Hilbert-space dimension, 0 for NULL.
 *
 * # Safety
 * `model` is NULL or a live handle.
 */
size_t cs_model_dim(const struct CsModel *model);

/**
 * Field from `sites` samples `re[j] + i im[j]` on a grid of the given spacing.
 *
 * # Safety
 * `re` and `im` point to `sites` readable doubles; `out` is writable.
 */
enum CsStatus cs_field_from_values(size_t sites,
                                   double spacing,
                                   const double *re,
                                   const double *im,
                                   struct CsField **out);

/**
 * Bright soliton at t = 0 with amplitude `eta`, profile coupling `coupling < 0`,
 * centre `center` and velocity `velocity`.
 *
 * # Safety
 * `out` is writable.
 */
enum CsStatus cs_field_bright(size_t sites,
                              double spacing,
                              double eta,
                              double coupling,
                              double center,
                              double velocity,
                              struct CsField **out);

/**
 * Gray soliton pair at t = 0: background `rho`, grayness `angle`, `coupling > 0`.
 *
 * # Safety
 * `out` is writable.
 */
enum CsStatus cs_field_gray(size_t sites,
                            double spacing,
                            double rho,
                            double angle,
                            double coupling,
                            double center,
                            struct CsField **out);

/**
 * New field equal to `field` times `factor`.
 *
 * # Safety
 * `field` is a live handle; `out` is writable.
 */
enum CsStatus cs_field_scaled(const struct CsField *field, double factor, struct CsField **out);

/**
 * # Safety
 * `field` is NULL or a live handle.
 */
void cs_field_free(struct CsField *field);

/**
 * Number of samples, 0 for NULL.
 *
 * # Safety
 * `field` is NULL or a live handle.
 */
size_t cs_field_len(const struct CsField *field);

/**
 * Copies the samples into `re`/`im`, each of capacity `len`.
 *
 * # Safety
 * `re` and `im` point to `len` writable doubles.
 */
enum CsStatus cs_field_values(const struct CsField *field, double *re, double *im, size_t len);

/**
 * Coherent state of `field` on `model`'s truncated basis.
 *
 * # Safety
 * Handles are live; `out` is writable.
 */
enum CsStatus cs_coherent_state(const struct CsField *field,
                                const struct CsModel *model,
                                double max_tail,
                                uint8_t strict,
                                struct CsState **out);

/**
 * # Safety
 * `state` is NULL or a live handle.
 */
void cs_state_free(struct CsState *state);

/**
 * 2-norm, NaN for NULL.
 *
 * # Safety
 * `state` is NULL or a live handle.
 */
double cs_state_norm(const struct CsState *state);

/**
 * `⟨s|t⟩` into `re`/`im`.
 *
 * # Safety
 * Handles are live; `re` and `im` are writable.
 */
enum CsStatus cs_state_inner(const struct CsState *a,
                             const struct CsState *b,
                             double *re,
                             double *im);

/**
 * `max_j ‖(b_j - α_j)|s⟩‖`.
 *
 * # Safety
 * Handles are live; `out` is writable.
 */
enum CsStatus cs_eigen_residual(const struct CsState *state,
                                const struct CsField *field,
                                const struct CsModel *model,
                                double *out);

/**
 * `⟨s|ψ̂(x_j)|s⟩` for every site into `re`/`im` of capacity `len`.
 *
 * # Safety
 * Handles are live; `re` and `im` point to `len` writable doubles.
 */
enum CsStatus cs_field_expectation(const struct CsState *state,
                                   const struct CsModel *model,
                                   double *re,
                                   double *im,
                                   size_t len);

/**
 * `e^{-iHt}|s⟩` with `model`'s Hamiltonian.
 *
 * # Safety
 * Handles are live; `options` is NULL (defaults) or readable; `out` is writable.
 */
enum CsStatus cs_evolve(const struct CsState *state,
                        const struct CsModel *model,
                        double t,
                        const struct CsOptions *options,
                        struct CsState **out);

/**
 * `r(t_k)` for the `n` ascending times, written to `r_re`/`r_im` of length `n`.
 *
 * # Safety
 * Handles are live; `times`, `r_re` and `r_im` point to `n` doubles; `options` is
 * NULL or readable.
 */
enum CsStatus cs_overlap_series(const struct CsField *field,
                                const struct CsModel *model,
                                const double *times,
                                size_t n,
                                const struct CsOptions *options,
                                double *r_re,
                                double *r_im);

/**
 * Fits the short-time expansion of `r` over `n ≥ 3` step sizes.
 *
 * # Safety
 * Handles are live; `dts` points to `n` doubles; `options` is NULL or readable;
 * `out` is writable.
 */
enum CsStatus cs_short_time_slope(const struct CsField *field,
                                  const struct CsModel *model,
                                  const double *dts,
                                  size_t n,
                                  const struct CsOptions *options,
                                  struct CsSlope *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COHERENT_SOLITON_H */
