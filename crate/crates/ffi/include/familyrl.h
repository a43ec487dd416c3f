#ifndef FAMILYRL_H
#define FAMILYRL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum FrlStatus {
  FRL_STATUS_OK = 0,
  FRL_STATUS_NULL_POINTER = 1,
  FRL_STATUS_INVALID_UTF8 = 2,
  FRL_STATUS_DOMAIN = 3,
  FRL_STATUS_DIMENSION = 4,
  FRL_STATUS_DIVERGENCE = 5,
  FRL_STATUS_OUT_OF_RANGE = 6,
  FRL_STATUS_NOT_READY = 7,
  FRL_STATUS_CONFIG = 8,
  FRL_STATUS_PARSE = 9,
  FRL_STATUS_IO = 10,
  FRL_STATUS_INTERNAL = 11,
  FRL_STATUS_PANIC = 12,
} FrlStatus;

/**
 * Opaque sliding-window bandit with its own random generator.
 */
typedef struct FrlBandit FrlBandit;

/**
 * Opaque run configuration.
 */
typedef struct FrlConfig FrlConfig;

/**
 * Opaque `(beta_j, gamma_j)` family.
 */
typedef struct FrlFamily FrlFamily;

/**
 * Opaque result of a training run.
 */
typedef struct FrlRun FrlRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Release with [`frl_string_free`].
 */
char *frl_last_error_message(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from this library and not yet freed.
 */
void frl_string_free(char *s);

/**
 * Library version as a static NUL-terminated string.
 */
const char *frl_version(void);

/**
 * `h(x)` with the default epsilon.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum FrlStatus frl_h(double x, double *out);

/**
 * `h^-1(x)` with the default epsilon.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum FrlStatus frl_h_inverse(double x, double *out);

/**
 * Human normalized score.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum FrlStatus frl_hns(double agent, double human, double random, double *out);

/**
 * Capped human normalized score.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum FrlStatus frl_chns(double agent, double human, double random, double *out);

/**
 * `eta max|d| + (1 - eta) mean|d|` over `len` TD errors.
 *
 * # Safety
 * `td` must point to `len` readable doubles; `out` must be valid for a write.
 */
enum FrlStatus frl_sequence_priority(const double *td, size_t len, double eta, double *out);

/**
 * Exploration rate of actor `index` out of `num_actors`.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum FrlStatus frl_actor_epsilon(size_t index,
                                 size_t num_actors,
                                 double base,
                                 double alpha,
                                 double *out);

/**
 * Behavior probability of the taken action under epsilon-greedy.
 */
double frl_behavior_probability(bool is_greedy_action, double epsilon, size_t action_count);

/**
 * Family of `num_policies` members from the default schedule.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum FrlStatus frl_family_new(size_t num_policies, struct FrlFamily **out);

/**
 * # Safety
 * `family` must be a live handle.
 */
enum FrlStatus frl_family_len(const struct FrlFamily *family, size_t *out);

/**
 * # Safety
 * `family` must be a live handle; `beta` and `gamma` valid for writes.
 */
enum FrlStatus frl_family_get(const struct FrlFamily *family,
                              size_t j,
                              double *beta,
                              double *gamma);

/**
 * # Safety
 * `family` must be NULL or a handle not yet freed.
 */
void frl_family_free(struct FrlFamily *family);

/**
 * # Safety
 * `out` must be valid for a write.
 */
enum FrlStatus frl_bandit_new(size_t num_arms,
                              size_t window,
                              double epsilon,
                              double bonus_beta,
                              uint64_t seed,
                              struct FrlBandit **out);

/**
 * # Safety
 * `bandit` must be a live handle; `arm` valid for a write.
 */
enum FrlStatus frl_bandit_select(struct FrlBandit *bandit, size_t *arm);

/**
 * # Safety
 * `bandit` must be a live handle.
 */
enum FrlStatus frl_bandit_update(struct FrlBandit *bandit, size_t arm, double reward);

/**
 * # Safety
 * `bandit` must be a live handle; `arm` valid for a write.
 */
enum FrlStatus frl_bandit_greedy_arm(const struct FrlBandit *bandit, size_t *arm);

/**
 * # Safety
 * `bandit` must be NULL or a handle not yet freed.
 */
void frl_bandit_free(struct FrlBandit *bandit);

/**
 * Default configuration.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum FrlStatus frl_config_new(struct FrlConfig **out);

/**
 * Configuration parsed from `key = value` text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` valid for a write.
 */
enum FrlStatus frl_config_parse(const char *text, struct FrlConfig **out);

/**
 * Sets one key. The whole configuration is validated again at training time.
 *
 * # Safety
 * `config` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum FrlStatus frl_config_set(struct FrlConfig *config, const char *key, const char *value);

/**
 * # Safety
 * `config` must be NULL or a handle not yet freed.
 */
void frl_config_free(struct FrlConfig *config);

/**
 * Trains with `config` and `seed`; the configuration is left unchanged.
 *
 * # Safety
 * `config` must be a live handle; `out` valid for a write.
 */
enum FrlStatus frl_train(const struct FrlConfig *config, uint64_t seed, struct FrlRun **out);

/**
 * Number of family members evaluated at the end of the run.
 *
 * # Safety
 * `run` must be a live handle; `out` valid for a write.
 */
enum FrlStatus frl_run_num_arms(const struct FrlRun *run, size_t *out);

/**
 * Mean extrinsic return of `arm` in the closing evaluation.
 *
 * # Safety
 * `run` must be a live handle; `out` valid for a write.
 */
enum FrlStatus frl_run_final_return(const struct FrlRun *run, size_t arm, double *out);

/**
 * Environment steps across actors, evaluator and closing evaluation.
 *
 * # Safety
 * `run` must be a live handle; `out` valid for a write.
 */
enum FrlStatus frl_run_total_env_steps(const struct FrlRun *run, uint64_t *out);

/**
 * Metrics CSV of the run. Release the string with [`frl_string_free`].
 *
 * # Safety
 * `run` must be a live handle; `out` valid for a write.
 */
enum FrlStatus frl_run_metrics_csv(const struct FrlRun *run, char **out);

/**
 * # Safety
 * `run` must be NULL or a handle not yet freed.
 */
void frl_run_free(struct FrlRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FAMILYRL_H */
