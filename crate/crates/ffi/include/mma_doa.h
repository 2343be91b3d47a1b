#ifndef MMA_DOA_H
#define MMA_DOA_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define MMA_OBJECTIVE_ML 0

#define MMA_OBJECTIVE_SIMPLIFIED 1

typedef enum MmaStatus {
  MMA_STATUS_OK = 0,
  MMA_STATUS_NULL_POINTER = 1,
  MMA_STATUS_INVALID_INPUT = 2,
  MMA_STATUS_DOMAIN = 3,
  MMA_STATUS_POLE = 4,
  MMA_STATUS_ILL_CONDITIONED = 5,
  MMA_STATUS_NOT_IDENTIFIABLE = 6,
  MMA_STATUS_DIMENSION_MISMATCH = 7,
  MMA_STATUS_NON_FINITE = 8,
  MMA_STATUS_PARSE = 9,
  MMA_STATUS_IO = 10,
  MMA_STATUS_BUFFER_TOO_SMALL = 11,
  MMA_STATUS_PANIC = 12,
} MmaStatus;

/**
 * Fitted multi-port power pattern.
 */
typedef struct MmaPattern MmaPattern;

typedef struct MmaEstimate {
  double theta;
  /**
   * 0 in 2D.
   */
  double phi;
  double signal_power;
  double noise_var;
  double objective_value;
  bool converged;
  bool floor_active;
} MmaEstimate;

typedef struct MmaFisher {
  double crb_theta;
  /**
   * NaN in 2D.
   */
  double crb_phi;
  double condition;
  /**
   * Number of parameters: 3 in 2D, 4 in 3D.
   */
  size_t size;
  bool singular;
  bool floor_active;
} MmaFisher;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mma_version(void);

/**
 * Message of the last failure on this thread, or NULL. Valid until the next
 * failing call on the same thread.
 */
const char *mma_last_error(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum MmaStatus mma_pattern_load(const char *path, struct MmaPattern **out);

/**
 * # Safety
 * `pattern` must be a live handle and `path` a NUL-terminated string.
 */
enum MmaStatus mma_pattern_save(const struct MmaPattern *pattern, const char *path);

/**
 * Random smooth nonnegative pattern of amplitude order `order` (power order `2 * order`).
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum MmaStatus mma_pattern_synth(uint64_t seed,
                                 size_t ports,
                                 int dimension,
                                 size_t order,
                                 double smoothness,
                                 struct MmaPattern **out);

/**
 * Fits a calibration CSV. `truncation_tol <= 0` keeps the full order.
 * `residual_rms` may be NULL.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `out` a writable pointer.
 */
enum MmaStatus mma_pattern_fit_csv(const char *path,
                                   int dimension,
                                   size_t order,
                                   double truncation_tol,
                                   struct MmaPattern **out,
                                   double *residual_rms);

/**
 * # Safety
 * `pattern` must be NULL or a handle not yet freed.
 */
void mma_pattern_free(struct MmaPattern *pattern);

/**
 * Port count, or 0 for NULL.
 *
 * # Safety
 * `pattern` must be NULL or a live handle.
 */
size_t mma_pattern_ports(const struct MmaPattern *pattern);

/**
 * 2 or 3, or 0 for NULL.
 *
 * # Safety
 * `pattern` must be NULL or a live handle.
 */
int mma_pattern_dimension(const struct MmaPattern *pattern);

/**
 * Floored per-port gains. `floor_active` may be NULL.
 *
 * # Safety
 * `gains` must hold `len` doubles.
 */
enum MmaStatus mma_pattern_eval(const struct MmaPattern *pattern,
                                double theta,
                                double phi,
                                double *gains,
                                size_t len,
                                bool *floor_active);

/**
 * Angular gradient of the gains; `dphi` is all zero in 2D.
 *
 * # Safety
 * `dtheta` and `dphi` must each hold `len` doubles.
 */
enum MmaStatus mma_pattern_eval_grad(const struct MmaPattern *pattern,
                                     double theta,
                                     double phi,
                                     double *dtheta,
                                     double *dphi,
                                     size_t len);

/**
 * One `snapshots`-snapshot power measurement drawn from random stream
 * `(seed, stream)`.
 *
 * # Safety
 * `powers` must hold `len` doubles.
 */
enum MmaStatus mma_simulate(const struct MmaPattern *pattern,
                            double theta,
                            double phi,
                            double signal_power,
                            double noise_var,
                            size_t snapshots,
                            uint64_t seed,
                            uint64_t stream,
                            double *powers,
                            size_t len);

/**
 * Estimates direction, signal power and noise variance from `len` port powers.
 * Theta is searched over `[theta_lo, theta_hi]`; pass NaN for both to search
 * the full range.
 *
 * # Safety
 * `powers` must hold `len` doubles and `out` must be writable.
 */
enum MmaStatus mma_estimate(const struct MmaPattern *pattern,
                            const double *powers,
                            size_t len,
                            size_t snapshots,
                            int objective,
                            double theta_lo,
                            double theta_hi,
                            struct MmaEstimate *out);

/**
 * Fisher information and bounds. When `matrix` is not NULL it receives the
 * row-major information matrix and must hold `matrix_len >= size * size` doubles.
 *
 * # Safety
 * `out` must be writable; `matrix` as above.
 */
enum MmaStatus mma_fisher(const struct MmaPattern *pattern,
                          double theta,
                          double phi,
                          double signal_power,
                          double noise_var,
                          size_t snapshots,
                          struct MmaFisher *out,
                          double *matrix,
                          size_t matrix_len);

/**
 * Exact density of one port's `snapshots`-snapshot mean power; NaN on invalid arguments.
 */
double mma_power_pdf(double x,
                     double gain,
                     double signal_power,
                     double noise_var,
                     size_t snapshots);

/**
 * Mean port power `gain * signal_power + noise_var`.
 */
double mma_power_mean(double gain, double signal_power, double noise_var);

/**
 * Variance of the `snapshots`-snapshot mean port power; NaN when `snapshots == 0`.
 */
double mma_power_var(double gain, double signal_power, double noise_var, size_t snapshots);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MMA_DOA_H */
