#ifndef UAVNOMA_H
#define UAVNOMA_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UavnomaStatus {
  UAVNOMA_STATUS_OK = 0,
  UAVNOMA_STATUS_NULL_POINTER = 1,
  UAVNOMA_STATUS_INVALID_ARGUMENT = 2,
  UAVNOMA_STATUS_SHAPE_MISMATCH = 3,
  UAVNOMA_STATUS_IO = 4,
  UAVNOMA_STATUS_CHECKPOINT = 5,
  UAVNOMA_STATUS_CONFIG = 6,
  UAVNOMA_STATUS_BUFFER_TOO_SMALL = 7,
  UAVNOMA_STATUS_PANIC = 8,
} UavnomaStatus;

typedef enum UavnomaSpectrum {
  UAVNOMA_SPECTRUM_MM_WAVE = 0,
  UAVNOMA_SPECTRUM_SUB6 = 1,
} UavnomaSpectrum;

typedef enum UavnomaLinkMode {
  UAVNOMA_LINK_MODE_ALWAYS_LOS = 0,
  UAVNOMA_LINK_MODE_EXPECTED = 1,
  UAVNOMA_LINK_MODE_BERNOULLI_PER_STEP = 2,
  UAVNOMA_LINK_MODE_BERNOULLI_PER_EPISODE = 3,
} UavnomaLinkMode;

/**
 * Environment plus the random stream that drives it.
 */
typedef struct UavnomaEnv UavnomaEnv;

typedef struct UavnomaNet UavnomaNet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *uavnoma_version(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into the library from the same thread.
 */
const char *uavnoma_last_error(void);

/**
 * Elevation angle (radians) of a UAV at `(x, y, h)` seen from `(ux, uy)`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum UavnomaStatus uavnoma_elevation_angle(double x,
                                           double y,
                                           double h,
                                           double ux,
                                           double uy,
                                           double *out);

/**
 * # Safety
 * `out` must be valid for one write.
 */
enum UavnomaStatus uavnoma_received_sinr(double p_t,
                                         double gain,
                                         double g_mimo,
                                         double alpha,
                                         double beta,
                                         double sigma2,
                                         double *out);

/**
 * # Safety
 * `out` must be valid for one write.
 */
enum UavnomaStatus uavnoma_user_rate(double w_bw, double sinr, double *out);

/**
 * # Safety
 * `rates` must be valid for `n` reads and `out` for one write.
 */
enum UavnomaStatus uavnoma_jain_fairness(const double *rates, size_t n, double *out);

/**
 * Default four-user environment for a band, with the band's default
 * reward weights and `r_min` in bits/s.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum UavnomaStatus uavnoma_env_new_default(enum UavnomaSpectrum spectrum,
                                           enum UavnomaLinkMode link_mode,
                                           double r_min,
                                           struct UavnomaEnv **out);

/**
 * Environment described by a TOML config file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for one write.
 */
enum UavnomaStatus uavnoma_env_from_config(const char *path, struct UavnomaEnv **out);

/**
 * # Safety
 * `env` must be null or a handle from this library not yet freed.
 */
void uavnoma_env_free(struct UavnomaEnv *env);

/**
 * Observation length; 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
size_t uavnoma_env_state_len(const struct UavnomaEnv *env);

/**
 * # Safety
 * `env` must be null or a live handle.
 */
size_t uavnoma_env_action_count(const struct UavnomaEnv *env);

/**
 * # Safety
 * `env` must be null or a live handle.
 */
size_t uavnoma_env_user_count(const struct UavnomaEnv *env);

/**
 * Reseeds the environment's random stream and resets it, writing the
 * initial observation to `state` (capacity `state_cap`).
 *
 * # Safety
 * `env` must be a live handle and `state` valid for `state_cap` writes.
 */
enum UavnomaStatus uavnoma_env_reset(struct UavnomaEnv *env,
                                     uint64_t seed,
                                     double *state,
                                     size_t state_cap);

/**
 * Applies `action`, writing the next observation, the reward and the
 * per-user rates (bits/s). `rates` may be null to skip them.
 *
 * # Safety
 * `env` must be a live handle; `state` valid for `state_cap` writes,
 * `reward` for one write, and `rates` null or valid for `rates_cap`.
 */
enum UavnomaStatus uavnoma_env_step(struct UavnomaEnv *env,
                                    size_t action,
                                    double *state,
                                    size_t state_cap,
                                    double *reward,
                                    double *rates,
                                    size_t rates_cap);

/**
 * Current UAV position `(x, y, h)` in metres.
 *
 * # Safety
 * `env` must be a live handle and `xyz` valid for three writes.
 */
enum UavnomaStatus uavnoma_env_uav_position(const struct UavnomaEnv *env, double *xyz);

/**
 * Loads a checkpoint written by the `uavnoma` binary.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for one write.
 */
enum UavnomaStatus uavnoma_net_load(const char *path, struct UavnomaNet **out);

/**
 * # Safety
 * `net` must be null or a handle from this library not yet freed.
 */
void uavnoma_net_free(struct UavnomaNet *net);

/**
 * # Safety
 * `net` must be null or a live handle.
 */
size_t uavnoma_net_input_dim(const struct UavnomaNet *net);

/**
 * # Safety
 * `net` must be null or a live handle.
 */
size_t uavnoma_net_action_count(const struct UavnomaNet *net);

/**
 * Q-values of one state.
 *
 * # Safety
 * `net` must be a live handle, `state` valid for `state_len` reads and
 * `q` for `q_cap` writes.
 */
enum UavnomaStatus uavnoma_net_q_values(const struct UavnomaNet *net,
                                        const double *state,
                                        size_t state_len,
                                        double *q,
                                        size_t q_cap);

/**
 * Greedy action for one state; ties go to the lowest index.
 *
 * # Safety
 * `net` must be a live handle, `state` valid for `state_len` reads and
 * `action` for one write.
 */
enum UavnomaStatus uavnoma_net_greedy_action(const struct UavnomaNet *net,
                                             const double *state,
                                             size_t state_len,
                                             size_t *action);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UAVNOMA_H */
