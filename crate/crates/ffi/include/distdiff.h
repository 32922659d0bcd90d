#ifndef DISTDIFF_H
#define DISTDIFF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Sampler selector for `distdiff_sample`.
 */
typedef enum DistdiffSampler {
  DISTDIFF_SAMPLER_DDIM = 0,
  DISTDIFF_SAMPLER_DDPM = 1,
  DISTDIFF_SAMPLER_GRADIENT_ESTIMATION = 2,
} DistdiffSampler;

/**
 * Status codes shared by every entry point.
 */
typedef enum DistdiffStatus {
  DISTDIFF_STATUS_OK = 0,
  DISTDIFF_STATUS_NULL_POINTER = 1,
  DISTDIFF_STATUS_DIMENSION_MISMATCH = 2,
  DISTDIFF_STATUS_NON_UNIQUE_PROJECTION = 3,
  DISTDIFF_STATUS_UNDEFINED_RATIO = 4,
  DISTDIFF_STATUS_INVALID_PARAM = 5,
  DISTDIFF_STATUS_INTERNAL_PANIC = 6,
} DistdiffStatus;

/**
 * Opaque point-cloud handle.
 */
typedef struct DistdiffCloud DistdiffCloud;

/**
 * Opaque schedule handle.
 */
typedef struct DistdiffSchedule DistdiffSchedule;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Build a cloud from `count` points of dimension `dim`, row-major.
 *
 * # Safety
 * `data` must point to `count * dim` readable doubles and `out` to a
 * writable handle slot.
 */
enum DistdiffStatus distdiff_cloud_new(const double *data,
                                       size_t count,
                                       size_t dim,
                                       struct DistdiffCloud **out);

/**
 * # Safety
 * `handle` must come from `distdiff_cloud_new` (or be null).
 */
void distdiff_cloud_free(struct DistdiffCloud *handle);

/**
 * # Safety
 * `handle` must be a live cloud handle; out-pointers must be writable.
 */
enum DistdiffStatus distdiff_cloud_info(const struct DistdiffCloud *handle,
                                        size_t *out_count,
                                        size_t *out_dim,
                                        double *out_diameter);

/**
 * # Safety
 * `x` must hold `dim` doubles matching the cloud dimension.
 */
enum DistdiffStatus distdiff_cloud_distance(const struct DistdiffCloud *handle,
                                            const double *x,
                                            size_t dim,
                                            double *out);

/**
 * Nearest point, its distance, the point index, and the tie flag
 * (1 when a second point attains the distance within tolerance).
 *
 * # Safety
 * `x` and `out_nearest` must hold `dim` doubles.
 */
enum DistdiffStatus distdiff_cloud_project(const struct DistdiffCloud *handle,
                                           const double *x,
                                           size_t dim,
                                           double *out_nearest,
                                           double *out_distance,
                                           size_t *out_index,
                                           int32_t *out_tie);

/**
 * Soft-minimum of squared distances at temperature `sigma^2`.
 *
 * # Safety
 * `x` must hold `dim` doubles.
 */
enum DistdiffStatus distdiff_smoothed_sq_distance(const struct DistdiffCloud *handle,
                                                  const double *x,
                                                  size_t dim,
                                                  double sigma,
                                                  double *out);

/**
 * Closed-form denoiser over the cloud; writes the noise estimate and the
 * implied clean point.
 *
 * # Safety
 * `x`, `out_epsilon`, `out_x0_hat` must hold `dim` doubles each.
 */
enum DistdiffStatus distdiff_ideal_denoise(const struct DistdiffCloud *handle,
                                           const double *x,
                                           size_t dim,
                                           double sigma,
                                           double *out_epsilon,
                                           double *out_x0_hat);

/**
 * Largest admissible constant step size for error level `eta` and ratio
 * slack `nu` over `n_steps` steps.
 *
 * # Safety
 * `out` must be writable.
 */
enum DistdiffStatus distdiff_beta_star(double eta, double nu, size_t n_steps, double *out);

/**
 * Large-step-count limits: the total sigma ratio and the total distance
 * ratio of the constant-step schedule.
 *
 * # Safety
 * Out-pointers must be writable.
 */
enum DistdiffStatus distdiff_limit_ratios(double eta,
                                          double nu,
                                          double *out_sigma_ratio,
                                          double *out_dist_ratio);

/**
 * Geometric schedule from `sigma_top` down to `sigma_bottom` in `steps`.
 *
 * # Safety
 * `out` must point to a writable handle slot.
 */
enum DistdiffStatus distdiff_schedule_loglinear(double sigma_top,
                                                double sigma_bottom,
                                                size_t steps,
                                                struct DistdiffSchedule **out);

/**
 * Constant-step schedule with per-step shrink `beta`.
 *
 * # Safety
 * `out` must point to a writable handle slot.
 */
enum DistdiffStatus distdiff_schedule_constant_beta(double sigma_top,
                                                    double beta,
                                                    size_t steps,
                                                    struct DistdiffSchedule **out);

/**
 * # Safety
 * `handle` must come from a schedule constructor (or be null).
 */
void distdiff_schedule_free(struct DistdiffSchedule *handle);

/**
 * # Safety
 * `handle` must be a live schedule handle.
 */
enum DistdiffStatus distdiff_schedule_num_steps(const struct DistdiffSchedule *handle, size_t *out);

/**
 * `sigma_t` for `t` in `0..=num_steps`.
 *
 * # Safety
 * `handle` must be a live schedule handle.
 */
enum DistdiffStatus distdiff_schedule_sigma(const struct DistdiffSchedule *handle,
                                            size_t t,
                                            double *out);

/**
 * Two-sided admissibility verdict for the `(eta, nu)` error model;
 * writes 1 when admissible.
 *
 * # Safety
 * `handle` must be a live schedule handle; `out` writable.
 */
enum DistdiffStatus distdiff_schedule_is_admissible(const struct DistdiffSchedule *handle,
                                                    double eta,
                                                    double nu,
                                                    int32_t *out);

/**
 * Run one trajectory with the closed-form denoiser over the cloud,
 * Gaussian-initialized at the top noise level. Writes the terminal point
 * and its distance to the cloud.
 *
 * # Safety
 * `out_final` must hold `dim` doubles; handles must be live.
 */
enum DistdiffStatus distdiff_sample(const struct DistdiffCloud *cloud,
                                    const struct DistdiffSchedule *schedule,
                                    enum DistdiffSampler sampler,
                                    double gamma,
                                    int32_t terminal_full_step,
                                    uint64_t seed,
                                    double *out_final,
                                    double *out_distance);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISTDIFF_H */
