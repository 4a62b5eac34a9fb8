#ifndef FMEASURE_H
#define FMEASURE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum FmStatus {
  FM_STATUS_OK = 0,
  FM_STATUS_NULL_POINTER = 1,
  FM_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Instability, overflow, a vanishing denominator or a truncation
   * budget violation.
   */
  FM_STATUS_NUMERIC_FAILURE = 3,
  /**
   * Output buffer shorter than the grid.
   */
  FM_STATUS_BUFFER_TOO_SMALL = 4,
  FM_STATUS_PANIC = 5,
} FmStatus;

/**
 * Splitting scheme selector for [`fm_fundamental_solution`].
 */
typedef enum FmScheme {
  FM_SCHEME_LIE = 0,
  FM_SCHEME_STRANG = 1,
} FmScheme;

/**
 * Opaque transition kernel.
 */
typedef struct FmKernel FmKernel;

/**
 * Opaque potential.
 */
typedef struct FmPotential FmPotential;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *fm_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `cap > 0`). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t fm_last_error(char *buf, size_t cap);

/**
 * Heat kernel with diffusion coefficient `d`.
 *
 * # Safety
 * `kernel` must point to writable storage for one pointer.
 */
enum FmStatus fm_kernel_heat(double d, struct FmKernel **kernel);

/**
 * Ornstein–Uhlenbeck kernel.
 *
 * # Safety
 * `kernel` must point to writable storage for one pointer.
 */
enum FmStatus fm_kernel_ou(double theta, double sigma, struct FmKernel **kernel);

/**
 * Spectral kernel with multiplier `exp(-t sum coeffs[i] (ik)^orders[i])`.
 *
 * # Safety
 * `orders` and `coeffs` must each hold `len` elements.
 */
enum FmStatus fm_kernel_spectral(const uint32_t *orders,
                                 const double *coeffs,
                                 size_t len,
                                 struct FmKernel **kernel);

/**
 * # Safety
 * `kernel` must be null or a handle from an `fm_kernel_*` constructor that
 * has not been freed.
 */
void fm_kernel_free(struct FmKernel *kernel);

/**
 * `p(x, y, t)`; `im` may be null.
 *
 * # Safety
 * `kernel` must be a live handle; `re` must be writable.
 */
enum FmStatus fm_kernel_eval(const struct FmKernel *kernel,
                             double x,
                             double y,
                             double t,
                             double *re,
                             double *im);

/**
 * # Safety
 * `potential` must point to writable storage for one pointer.
 */
enum FmStatus fm_potential_constant(double c, struct FmPotential **potential);

/**
 * `omega^2 x^2 / 2`.
 *
 * # Safety
 * `potential` must point to writable storage for one pointer.
 */
enum FmStatus fm_potential_harmonic(double omega, struct FmPotential **potential);

/**
 * Piecewise-linear potential through `(xs[i], vs[i])`.
 *
 * # Safety
 * `xs` and `vs` must each hold `len` elements.
 */
enum FmStatus fm_potential_table(const double *xs,
                                 const double *vs,
                                 size_t len,
                                 struct FmPotential **potential);

/**
 * # Safety
 * `potential` must be null or a live handle.
 */
void fm_potential_free(struct FmPotential *potential);

/**
 * Time-sliced column `x -> phi_V(x, y; t)` on the grid `[a, b]` with `n`
 * points, written to `re` / `im` (capacity `cap`).
 *
 * # Safety
 * Handles must be live; `re` (and `im` unless null) must hold `cap` values.
 */
enum FmStatus fm_fundamental_solution(const struct FmKernel *kernel,
                                      const struct FmPotential *potential,
                                      double a,
                                      double b,
                                      size_t n,
                                      double y,
                                      double t,
                                      size_t slices,
                                      enum FmScheme scheme,
                                      double *re,
                                      double *im,
                                      size_t cap);

/**
 * Volterra-marched column at time `t` with `steps` time steps.
 *
 * # Safety
 * As [`fm_fundamental_solution`].
 */
enum FmStatus fm_volterra_solve(const struct FmKernel *kernel,
                                const struct FmPotential *potential,
                                double a,
                                double b,
                                size_t n,
                                double y,
                                double t,
                                size_t steps,
                                double *re,
                                double *im,
                                size_t cap);

/**
 * Dyson partial sum of order `order` over `segments` segments of `steps`
 * time steps each. `bound` (nullable) receives the L1 remainder bound.
 *
 * # Safety
 * As [`fm_fundamental_solution`]; `bound` must be null or writable.
 */
enum FmStatus fm_dyson_sum(const struct FmKernel *kernel,
                           const struct FmPotential *potential,
                           double a,
                           double b,
                           size_t n,
                           double y,
                           double t,
                           size_t order,
                           size_t steps,
                           size_t segments,
                           double *re,
                           double *im,
                           size_t cap,
                           double *bound);

/**
 * Bridge Monte Carlo estimate of `phi_V(x, y; t)` for the heat kernel with
 * diffusion `d`.
 *
 * # Safety
 * `potential` must be live; `value` and `stderr` must be writable.
 */
enum FmStatus fm_mc_estimate(const struct FmPotential *potential,
                             double x,
                             double y,
                             double t,
                             double d,
                             size_t n_paths,
                             size_t steps,
                             uint64_t seed,
                             double *value,
                             double *stderr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FMEASURE_H */
