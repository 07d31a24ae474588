#ifndef RSAC_H
#define RSAC_H

/* Generated by cbindgen from the rsac-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define RSAC_OK 0

#define RSAC_ERR_NULL -1

#define RSAC_ERR_DIM -2

#define RSAC_ERR_ARG -3

#define RSAC_ERR_IO -4

#define RSAC_ERR_CONTRACT -5

#define RSAC_ERR_PANIC -6

/**
 * Opaque environment handle.
 */
typedef struct RsacEnv RsacEnv;

/**
 * Opaque policy handle with its own action-sampling stream.
 */
typedef struct RsacPolicy RsacPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *rsac_version(void);

/**
 * Static description of a status code.
 */
const char *rsac_error_message(int32_t code);

/**
 * Create an environment: kind 0 = claw, 1 = kitty. On success writes the
 * new handle to `out`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
int32_t rsac_env_new(int32_t kind, struct RsacEnv **out);

/**
 * Release an environment handle. NULL is a no-op.
 *
 * # Safety
 * `env` must be a pointer returned by [`rsac_env_new`], not yet freed.
 */
void rsac_env_free(struct RsacEnv *env);

/**
 * # Safety
 * `env` and `out` must be valid pointers.
 */
int32_t rsac_env_n_joints(const struct RsacEnv *env, size_t *out);

/**
 * # Safety
 * `env` and `out` must be valid pointers.
 */
int32_t rsac_env_obs_dim(const struct RsacEnv *env, size_t *out);

/**
 * Start an episode. `damaged`/`n_damaged` name the damaged joints;
 * `frozen_angles` may be NULL (angles sampled from the feasible ranges
 * using `seed`) or point to `n_damaged` explicit values in ascending joint
 * order. `mode` 0 = frozen, 1 = random-action. The initial observation is
 * written to `obs_out` (length `obs_len` == obs_dim).
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
int32_t rsac_env_reset(struct RsacEnv *env,
                       const uint32_t *damaged,
                       size_t n_damaged,
                       const double *frozen_angles,
                       int32_t mode,
                       uint64_t seed,
                       double *obs_out,
                       size_t obs_len);

/**
 * Advance one step. Writes the next observation, reward, and the terminal
 * and success flags (0/1).
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
int32_t rsac_env_step(struct RsacEnv *env,
                      const double *action,
                      size_t action_len,
                      double *obs_out,
                      size_t obs_len,
                      double *reward_out,
                      uint8_t *terminal_out,
                      uint8_t *success_out);

/**
 * The per-step task scalar (claw valve angle, kitty goal distance).
 *
 * # Safety
 * `env` and `out` must be valid pointers.
 */
int32_t rsac_env_task_scalar(const struct RsacEnv *env, double *out);

/**
 * Load a policy from a checkpoint file (NUL-terminated UTF-8 path).
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` a valid pointer.
 */
int32_t rsac_policy_load(const char *path, struct RsacPolicy **out);

/**
 * Release a policy handle. NULL is a no-op.
 *
 * # Safety
 * `policy` must be a pointer returned by [`rsac_policy_load`], not yet freed.
 */
void rsac_policy_free(struct RsacPolicy *policy);

/**
 * # Safety
 * `policy` and `out` must be valid pointers.
 */
int32_t rsac_policy_obs_dim(const struct RsacPolicy *policy, size_t *out);

/**
 * # Safety
 * `policy` and `out` must be valid pointers.
 */
int32_t rsac_policy_action_dim(const struct RsacPolicy *policy, size_t *out);

/**
 * NUL-terminated policy id string; caller frees with [`rsac_string_free`].
 *
 * # Safety
 * `policy` must be a valid handle.
 */
char *rsac_policy_id(const struct RsacPolicy *policy);

/**
 * Free a string returned by this library. NULL is a no-op.
 *
 * # Safety
 * `s` must have been returned by [`rsac_policy_id`], not yet freed.
 */
void rsac_string_free(char *s);

/**
 * Reseed the stochastic-action stream.
 *
 * # Safety
 * `policy` must be a valid handle.
 */
int32_t rsac_policy_seed(struct RsacPolicy *policy, uint64_t seed);

/**
 * Compute an action for a flat observation
 * [task features | joint sensors | q flags]. `deterministic` != 0 uses the
 * squashed mean; otherwise samples from the policy's stream.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
int32_t rsac_policy_act(struct RsacPolicy *policy,
                        const double *obs,
                        size_t obs_len,
                        uint8_t deterministic,
                        double *action_out,
                        size_t action_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RSAC_H */
