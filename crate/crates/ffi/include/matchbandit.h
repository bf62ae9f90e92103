#ifndef MATCHBANDIT_H
#define MATCHBANDIT_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum MbStatus {
  MB_STATUS_OK = 0,
  MB_STATUS_NULL_POINTER = 1,
  MB_STATUS_INVALID_UTF8 = 2,
  MB_STATUS_INVALID_INPUT = 3,
  MB_STATUS_PARSE = 4,
  MB_STATUS_CONFIG = 5,
  MB_STATUS_IO = 6,
  MB_STATUS_BUFFER_TOO_SMALL = 7,
  MB_STATUS_PANIC = 8,
} MbStatus;

typedef enum MbGeneratorKind {
  MB_GENERATOR_KIND_UNIFORM = 0,
  MB_GENERATOR_KIND_BETA_HETEROGENEOUS = 1,
  MB_GENERATOR_KIND_EDGE_CORRELATED = 2,
} MbGeneratorKind;

typedef struct MbEpisode MbEpisode;

typedef struct MbExperiment MbExperiment;

typedef struct MbProfile MbProfile;

/**
 * Summary of the round just played by [`mb_episode_step`].
 */
typedef struct MbRoundSummary {
  uint64_t round;
  size_t conflicts;
  size_t matched;
  bool stable;
  double max_regret;
} MbRoundSummary;

/**
 * Cross-run averages at one snapshot round.
 */
typedef struct MbAggregatePoint {
  uint64_t t;
  double stability_rate;
  double mean_max_regret;
  double mean_conflicts;
} MbAggregatePoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mb_version(void);

/**
 * Message of the last failure on this thread, or NULL. Valid until the next
 * failing call on the same thread.
 */
const char *mb_last_error_message(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed at most once.
 */
void mb_string_free(char *s);

/**
 * Draws a preference profile.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MbStatus mb_profile_generate(enum MbGeneratorKind kind,
                                  size_t n_players,
                                  size_t n_arms,
                                  double beta,
                                  uint64_t seed,
                                  struct MbProfile **out);

/**
 * Parses a profile from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MbStatus mb_profile_from_json(const char *json, struct MbProfile **out);

/**
 * Serializes a profile to JSON; free the result with `mb_string_free`.
 *
 * # Safety
 * `profile` must be a live handle and `out` a valid pointer.
 */
enum MbStatus mb_profile_to_json(const struct MbProfile *profile, char **out);

/**
 * # Safety
 * `profile` must be NULL or a handle from this library, freed at most once.
 */
void mb_profile_free(struct MbProfile *profile);

/**
 * # Safety
 * `profile` must be a live handle; the outputs must be valid pointers.
 */
enum MbStatus mb_profile_size(const struct MbProfile *profile, size_t *n_players, size_t *n_arms);

/**
 * Runs deferred acceptance. `arms_propose` selects the player-pessimal
 * matching. `out` needs room for `n_players` entries.
 *
 * # Safety
 * `profile` must be a live handle and `out` must point to `len` writable entries.
 */
enum MbStatus mb_gale_shapley(const struct MbProfile *profile,
                              bool arms_propose,
                              int64_t *out,
                              size_t len);

/**
 * # Safety
 * `assignment` must point to `len` readable entries.
 */
enum MbStatus mb_is_stable(const struct MbProfile *profile,
                           const int64_t *assignment,
                           size_t len,
                           bool *out);

/**
 * Largest per-player shortfall against the player-pessimal stable matching.
 *
 * # Safety
 * `assignment` must point to `len` readable entries.
 */
enum MbStatus mb_max_player_regret(const struct MbProfile *profile,
                                   const int64_t *assignment,
                                   size_t len,
                                   double *out);

/**
 * Builds an episode from an episode config in TOML. When `profile` is not
 * NULL the episode runs on that market instead of generating one.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string; `profile` NULL or live.
 */
enum MbStatus mb_episode_new(const char *config_toml,
                             const struct MbProfile *profile,
                             struct MbEpisode **out);

/**
 * Plays one round. Returns `MB_STATUS_INVALID_INPUT` once the horizon is
 * reached. `summary` may be NULL.
 *
 * # Safety
 * `episode` must be a live handle.
 */
enum MbStatus mb_episode_step(struct MbEpisode *episode, struct MbRoundSummary *summary);

/**
 * Plays every remaining round.
 *
 * # Safety
 * `episode` must be a live handle.
 */
enum MbStatus mb_episode_run(struct MbEpisode *episode);

/**
 * # Safety
 * `episode` must be a live handle; the outputs must be valid pointers.
 */
enum MbStatus mb_episode_round(const struct MbEpisode *episode, uint64_t *round, bool *finished);

/**
 * Current matching; all `-1` before the first round.
 *
 * # Safety
 * `out` must point to `len` writable entries.
 */
enum MbStatus mb_episode_matching(const struct MbEpisode *episode, int64_t *out, size_t len);

/**
 * Snapshots recorded so far, as a JSON array.
 *
 * # Safety
 * `episode` must be a live handle and `out` a valid pointer.
 */
enum MbStatus mb_episode_snapshots_json(const struct MbEpisode *episode, char **out);

/**
 * # Safety
 * `episode` must be NULL or a handle from this library, freed at most once.
 */
void mb_episode_free(struct MbEpisode *episode);

/**
 * Runs an experiment spec given as TOML. `workers` overrides the spec's
 * worker count when nonzero.
 *
 * # Safety
 * `spec_toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MbStatus mb_experiment_run(const char *spec_toml, size_t workers, struct MbExperiment **out);

/**
 * Number of sweep points.
 *
 * # Safety
 * `experiment` must be a live handle and `out` a valid pointer.
 */
enum MbStatus mb_experiment_points(const struct MbExperiment *experiment, size_t *out);

/**
 * Label of a sweep point; free with `mb_string_free`.
 *
 * # Safety
 * `experiment` must be a live handle and `out` a valid pointer.
 */
enum MbStatus mb_experiment_label(const struct MbExperiment *experiment, size_t point, char **out);

/**
 * Copies the aggregate series of one sweep point. Always stores the series
 * length in `written`; fails with `MB_STATUS_BUFFER_TOO_SMALL` when `len` is
 * short, so a first call with `len = 0` sizes the buffer.
 *
 * # Safety
 * `out` must point to `len` writable entries (may be NULL when `len` is 0).
 */
enum MbStatus mb_experiment_aggregate(const struct MbExperiment *experiment,
                                      size_t point,
                                      struct MbAggregatePoint *out,
                                      size_t len,
                                      size_t *written);

/**
 * Writes every sweep point's CSV and JSON files under `dir`, one
 * subdirectory per label.
 *
 * # Safety
 * `experiment` must be a live handle and `dir` a NUL-terminated string.
 */
enum MbStatus mb_experiment_write(const struct MbExperiment *experiment, const char *dir);

/**
 * # Safety
 * `experiment` must be NULL or a handle from this library, freed at most once.
 */
void mb_experiment_free(struct MbExperiment *experiment);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MATCHBANDIT_H */
