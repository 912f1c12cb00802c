#ifndef GRIDMARL_H
#define GRIDMARL_H

/* Generated by cbindgen from gridmarl-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code for every fallible FFI call.
 */
typedef enum GmrlStatus {
  GMRL_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  GMRL_STATUS_NULL_POINTER = 1,
  /**
   * Malformed argument: bad UTF-8, unknown preset or agent type, index
   * out of range.
   */
  GMRL_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The configuration does not validate against its map.
   */
  GMRL_STATUS_BAD_CONFIG = 3,
  /**
   * The map text failed to parse.
   */
  GMRL_STATUS_MAP_ERROR = 4,
  /**
   * Filesystem failure while writing artifacts.
   */
  GMRL_STATUS_IO_ERROR = 5,
  /**
   * Internal failure (caught panic).
   */
  GMRL_STATUS_INTERNAL = 6,
} GmrlStatus;

/**
 * Opaque handle: a scenario configuration under construction.
 */
typedef struct GmrlConfig GmrlConfig;

/**
 * Opaque handle: a finished training run (metrics plus trained agents).
 */
typedef struct GmrlRun GmrlRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string.
 */
const char *gmrl_version(void);

/**
 * Message for the most recent failure on this thread, or null if the last
 * call succeeded. Borrowed; valid until the next gmrl call on this thread.
 */
const char *gmrl_last_error_message(void);

/**
 * Creates a configuration from a scenario preset ("s1", "s2", "s3").
 *
 * # Safety
 * `name` must be a valid NUL-terminated string; `out` must be a valid
 * pointer to receive the handle.
 */
enum GmrlStatus gmrl_config_new_preset(const char *name, struct GmrlConfig **out);

/**
 * Creates a configuration from raw map text.
 *
 * `label` names the map in summaries; `n_agents` uses the first N spawn
 * markers. Hyperparameters start at library defaults; adjust via setters.
 *
 * # Safety
 * String arguments must be valid NUL-terminated strings; `out` must be a
 * valid pointer to receive the handle.
 */
enum GmrlStatus gmrl_config_new_map(const char *map_text,
                                    const char *label,
                                    size_t n_agents,
                                    size_t episodes,
                                    uint32_t max_steps,
                                    struct GmrlConfig **out);

/**
 * Releases a configuration handle. Null is a no-op.
 *
 * # Safety
 * `cfg` must be null or a pointer previously returned by a constructor and
 * not yet freed.
 */
void gmrl_config_free(struct GmrlConfig *cfg);

/**
 * Sets the agent type ("A1".."A5").
 *
 * # Safety
 * `cfg` must be a live configuration handle; `name` a valid string.
 */
enum GmrlStatus gmrl_config_set_agent_type(struct GmrlConfig *cfg, const char *name);

/**
 * Sets the master seed.
 *
 * # Safety
 * `cfg` must be a live configuration handle.
 */
enum GmrlStatus gmrl_config_set_seed(struct GmrlConfig *cfg, uint64_t seed);

/**
 * Sets the episode count E.
 *
 * # Safety
 * `cfg` must be a live configuration handle.
 */
enum GmrlStatus gmrl_config_set_episodes(struct GmrlConfig *cfg, size_t episodes);

/**
 * Sets the per-episode step budget T.
 *
 * # Safety
 * `cfg` must be a live configuration handle.
 */
enum GmrlStatus gmrl_config_set_max_steps(struct GmrlConfig *cfg, uint32_t max_steps);

/**
 * Sets the merge dampening factor alpha (must lie in [0, 1] at train time).
 *
 * # Safety
 * `cfg` must be a live configuration handle.
 */
enum GmrlStatus gmrl_config_set_alpha(struct GmrlConfig *cfg, double alpha);

/**
 * Sets the observation range c (Chebyshev radius, at least 1).
 *
 * # Safety
 * `cfg` must be a live configuration handle.
 */
enum GmrlStatus gmrl_config_set_range(struct GmrlConfig *cfg, uint32_t range);

/**
 * Trains the configured scenario to completion and returns a run handle.
 * Blocking; cost is proportional to E x T x agents.
 *
 * # Safety
 * `cfg` must be a live configuration handle; `out` must be a valid pointer
 * to receive the handle.
 */
enum GmrlStatus gmrl_train(const struct GmrlConfig *cfg, struct GmrlRun **out);

/**
 * Releases a run handle. Null is a no-op.
 *
 * # Safety
 * `run` must be null or a pointer previously returned by `gmrl_train` and
 * not yet freed.
 */
void gmrl_run_free(struct GmrlRun *run);

/**
 * Number of episodes recorded by the run.
 *
 * # Safety
 * `run` must be null or a live run handle (null yields 0).
 */
size_t gmrl_run_episode_count(const struct GmrlRun *run);

/**
 * Number of agents in the run.
 *
 * # Safety
 * `run` must be null or a live run handle (null yields 0).
 */
size_t gmrl_run_agent_count(const struct GmrlRun *run);

/**
 * Fraction of episodes in which every agent reached its goal.
 *
 * # Safety
 * `run` must be a live run handle; `out_rate` a valid pointer.
 */
enum GmrlStatus gmrl_run_system_success_rate(const struct GmrlRun *run, double *out_rate);

/**
 * Per-agent success rate across the run's episodes.
 *
 * # Safety
 * `run` must be a live run handle; `out_rate` a valid pointer.
 */
enum GmrlStatus gmrl_run_agent_success_rate(const struct GmrlRun *run,
                                            size_t agent,
                                            double *out_rate);

/**
 * Smoothed system reward at the final episode (trailing moving average).
 *
 * # Safety
 * `run` must be a live run handle; `out_reward` a valid pointer.
 */
enum GmrlStatus gmrl_run_final_smoothed_reward(const struct GmrlRun *run, double *out_reward);

/**
 * Renders the run's metrics as CSV. The returned string is owned by the
 * caller; release it with `gmrl_string_free`.
 *
 * # Safety
 * `run` must be a live run handle; `out_csv` a valid pointer.
 */
enum GmrlStatus gmrl_run_metrics_csv(const struct GmrlRun *run, char **out_csv);

/**
 * Writes metrics.csv, summary.json, and per-agent checkpoints into `dir`
 * (created if absent).
 *
 * # Safety
 * `run` must be a live run handle; `dir` a valid NUL-terminated path.
 */
enum GmrlStatus gmrl_run_write_outputs(const struct GmrlRun *run, const char *dir);

/**
 * Releases a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must be null or a pointer previously returned by a gmrl call that
 * documents `gmrl_string_free`, and not yet freed.
 */
void gmrl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIDMARL_H */
