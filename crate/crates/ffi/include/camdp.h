#ifndef CAMDP_H
#define CAMDP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Grid points per event, `k = 0..=20`.
 */
#define CAMDP_HORIZON 21

typedef enum CamdpStatus {
  CAMDP_STATUS_OK = 0,
  CAMDP_STATUS_NULL_POINTER = 1,
  CAMDP_STATUS_INVALID_ARGUMENT = 2,
  CAMDP_STATUS_IO = 3,
  CAMDP_STATUS_PARSE = 4,
  CAMDP_STATUS_NUMERIC = 5,
  CAMDP_STATUS_PANIC = 6,
} CamdpStatus;

/**
 * Per-step noise model.
 */
typedef struct CamdpNoiseModel CamdpNoiseModel;

/**
 * Loaded policy network.
 */
typedef struct CamdpPolicy CamdpPolicy;

/**
 * Vector in the radial / tangential / normal frame.
 */
typedef struct CamdpRtn {
  double r;
  double t;
  double n;
} CamdpRtn;

typedef struct CamdpManeuverPlan {
  /**
   * rad
   */
  double delta_theta;
  uint32_t n_rev;
  /**
   * s
   */
  double transit_period;
  /**
   * km
   */
  double transit_radius;
  /**
   * km/s
   */
  double transit_speed;
  /**
   * km/s
   */
  double delta_v;
  double propellant_kg;
} CamdpManeuverPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *camdp_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated and
 * NUL-terminated when `len > 0`) and returns the full message length in
 * bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t camdp_last_error_message(char *buf, size_t len);

/**
 * Collision probability on the conjunction plane from a relative state
 * (km, km/s), the combined 3×3 RTN covariance (km², row-major) and the
 * object radii (km). `foster_steps` = 0 selects the small-object
 * approximation, otherwise the quadrature with that many steps (≥ 16).
 *
 * # Safety
 * `covariance` must point to 9 doubles; `out` must be writable.
 */
enum CamdpStatus camdp_bplane_poc(struct CamdpRtn rel_position,
                                  struct CamdpRtn rel_velocity,
                                  const double *covariance,
                                  double r_t,
                                  double r_c,
                                  uint32_t foster_steps,
                                  double *out);

/**
 * PoC of an MDP state under the default risk model: miss distance and
 * along-track sigma in km, hard-body radius in km.
 *
 * # Safety
 * `out` must be writable.
 */
enum CamdpStatus camdp_state_poc(double d_m, double sigma_t, double hbr_km, double *out);

/**
 * Miss distance (km) at which the state PoC drops by the factor `lambda`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CamdpStatus camdp_safe_miss_distance(double d_m,
                                          double sigma_t,
                                          double hbr_km,
                                          double lambda,
                                          double *out);

/**
 * Phasing maneuver from a circular service orbit at `altitude_km`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CamdpStatus camdp_plan_maneuver(double delta_theta,
                                     uint32_t n_rev,
                                     double altitude_km,
                                     double m_o,
                                     double isp,
                                     double delta_r_cap_km,
                                     struct CamdpManeuverPlan *out);

/**
 * Phase shift (rad) moving the miss distance from `d_m` to `d_m_prime`
 * (km) for a service orbit of radius `r_s` (km).
 *
 * # Safety
 * `out` must be writable.
 */
enum CamdpStatus camdp_phase_shift_for_miss(struct CamdpRtn rho0,
                                            double d_m,
                                            double d_m_prime,
                                            double r_s,
                                            double *out);

/**
 * Fuel-minimizing revolution count for the time left to TCA.
 *
 * # Safety
 * `out` must be writable.
 */
enum CamdpStatus camdp_optimal_revolutions(double delta_theta,
                                           double time_remaining_hr,
                                           double altitude_km,
                                           double delta_r_cap_km,
                                           uint32_t *out);

/**
 * Action of the 24-hour cut-off policy: 1 to maneuver, 0 to delay.
 *
 * # Safety
 * `out` must be writable.
 */
enum CamdpStatus camdp_cutoff_action(double d_m,
                                     double sigma_t,
                                     double hbr_km,
                                     bool moved,
                                     uint32_t k,
                                     uint32_t *out);

/**
 * Loads a policy checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CamdpStatus camdp_policy_load(const char *path, struct CamdpPolicy **out);

/**
 * # Safety
 * `policy` must be null or a handle from [`camdp_policy_load`] not yet
 * freed.
 */
void camdp_policy_free(struct CamdpPolicy *policy);

/**
 * Action probabilities `[delay, maneuver]` for a state.
 *
 * # Safety
 * `policy` must be a live handle; `out` must point to 2 writable doubles.
 */
enum CamdpStatus camdp_policy_probabilities(const struct CamdpPolicy *policy,
                                            double d_m,
                                            double sigma_t,
                                            bool moved,
                                            uint32_t k,
                                            double *out);

/**
 * Greedy action for a state: 1 to maneuver, 0 to delay.
 *
 * # Safety
 * `policy` must be a live handle; `out` must be writable.
 */
enum CamdpStatus camdp_policy_act(const struct CamdpPolicy *policy,
                                  double d_m,
                                  double sigma_t,
                                  bool moved,
                                  uint32_t k,
                                  uint32_t *out);

/**
 * The built-in reference noise model.
 *
 * # Safety
 * `out` must be writable.
 */
enum CamdpStatus camdp_noise_model_reference(struct CamdpNoiseModel **out);

/**
 * Loads a noise model TOML file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CamdpStatus camdp_noise_model_load(const char *path, struct CamdpNoiseModel **out);

/**
 * # Safety
 * `model` must be null or a live handle not yet freed.
 */
void camdp_noise_model_free(struct CamdpNoiseModel *model);

/**
 * Simulates `n_events` unmaneuvered events. Event `i`, grid index `k`
 * lands at `[i * CAMDP_HORIZON + k]` of `out_d_m` and `out_sigma_t` (km),
 * each of which must hold `len = n_events * CAMDP_HORIZON` doubles.
 *
 * # Safety
 * `model` must be a live handle; both outputs must be valid for `len`
 * doubles.
 */
enum CamdpStatus camdp_noise_model_simulate(const struct CamdpNoiseModel *model,
                                            size_t n_events,
                                            uint64_t seed,
                                            double *out_d_m,
                                            double *out_sigma_t,
                                            size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAMDP_H */
