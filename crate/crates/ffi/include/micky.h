#ifndef MICKY_H
#define MICKY_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Written by [`micky_knee_point`] when the collective choice never loses.
 */
#define MICKY_KNEE_NEVER UINT64_MAX

/**
 * Result code of every call.
 */
typedef enum MickyStatus {
  MICKY_STATUS_OK = 0,
  MICKY_STATUS_NULL_POINTER = 1,
  MICKY_STATUS_INVALID_ARGUMENT = 2,
  MICKY_STATUS_DATA_ERROR = 3,
  MICKY_STATUS_NOT_FOUND = 4,
  MICKY_STATUS_NUMERIC_ERROR = 5,
  MICKY_STATUS_IO_ERROR = 6,
  MICKY_STATUS_PANIC = 7,
} MickyStatus;

typedef enum MickyObjective {
  MICKY_OBJECTIVE_EXECUTION_TIME = 0,
  MICKY_OBJECTIVE_OPERATIONAL_COST = 1,
} MickyObjective;

typedef enum MickyPolicy {
  MICKY_POLICY_UCB1 = 0,
  MICKY_POLICY_EPSILON_GREEDY = 1,
  MICKY_POLICY_SOFTMAX = 2,
} MickyPolicy;

typedef enum MickyRewardMode {
  MICKY_REWARD_MODE_ONLINE = 0,
  MICKY_REWARD_MODE_ORACLE = 1,
} MickyRewardMode;

/**
 * Opaque performance matrix.
 */
typedef struct MickyMatrix MickyMatrix;

/**
 * Opaque result of one optimizer run.
 */
typedef struct MickyRun MickyRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library on the same thread.
 */
const char *micky_last_error_message(void);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void micky_string_free(char *s);

/**
 * Builds a matrix from the text of `configs.csv` and `measurements.csv`.
 *
 * # Safety
 * See the crate-level safety notes.
 */
enum MickyStatus micky_matrix_load_csv(const char *configs_csv,
                                       const char *measurements_csv,
                                       enum MickyObjective objective_kind,
                                       struct MickyMatrix **out);

/**
 * Loads `configs.csv` and `measurements.csv` from a directory.
 *
 * # Safety
 * See the crate-level safety notes.
 */
enum MickyStatus micky_matrix_load_dir(const char *dir,
                                       enum MickyObjective objective_kind,
                                       struct MickyMatrix **out);

/**
 * Generates a synthetic matrix. `spec_json` may be null for the default
 * generator settings; missing fields take their defaults. The planted
 * config id is written to `planted` when it is not null.
 *
 * # Safety
 * See the crate-level safety notes.
 */
enum MickyStatus micky_synth_generate(const char *spec_json,
                                      struct MickyMatrix **out,
                                      char **planted);

/**
 * # Safety
 * `matrix` must be null or a handle from this library not yet freed.
 */
void micky_matrix_free(struct MickyMatrix *matrix);

/**
 * # Safety
 * See the crate-level safety notes.
 */
enum MickyStatus micky_matrix_n_workloads(const struct MickyMatrix *matrix, size_t *out);

/**
 * # Safety
 * See the crate-level safety notes.
 */
enum MickyStatus micky_matrix_n_configs(const struct MickyMatrix *matrix, size_t *out);

/**
 * Objective value of workload `w` on config `s`.
 *
 * # Safety
 * See the crate-level safety notes.
 */
enum MickyStatus micky_matrix_objective(const struct MickyMatrix *matrix,
                                        size_t w,
                                        size_t s,
                                        double *out);

/**
 * Objective of `s` on `w` divided by the best objective for `w`.
 *
 * # Safety
 * See the crate-level safety notes.
 */
enum MickyStatus micky_matrix_normalized_performance(const struct MickyMatrix *matrix,
                                                     size_t w,
                                                     size_t s,
                                                     double *out);

/**
 * Id of config `s`, as a string the caller frees.
 *
 * # Safety
 * See the crate-level safety notes.
 */
enum MickyStatus micky_matrix_config_id(const struct MickyMatrix *matrix, size_t s, char **out);

/**
 * Id of workload `w`, as a string the caller frees.
 *
 * # Safety
 * See the crate-level safety notes.
 */
enum MickyStatus micky_matrix_workload_id(const struct MickyMatrix *matrix, size_t w, char **out);

/**
 * Runs the collective optimizer. `policy_param` is epsilon for
 * epsilon-greedy, the temperature for softmax, and ignored for UCB1.
 *
 * # Safety
 * See the crate-level safety notes.
 */
enum MickyStatus micky_run_micky(const struct MickyMatrix *matrix,
                                 enum MickyPolicy policy,
                                 double policy_param,
                                 uint32_t alpha,
                                 double beta,
                                 enum MickyRewardMode reward_mode,
                                 uint64_t seed,
                                 struct MickyRun **out);

/**
 * Runs any method described as JSON, e.g. `{"kind":"cherrypick"}` or
 * `{"kind":"random-k","k":4}`.
 *
 * # Safety
 * See the crate-level safety notes.
 */
enum MickyStatus micky_run_method(const struct MickyMatrix *matrix,
                                  const char *method_json,
                                  uint64_t seed,
                                  struct MickyRun **out);

/**
 * # Safety
 * `run` must be null or a handle from this library not yet freed.
 */
void micky_run_free(struct MickyRun *run);

/**
 * Total measurements the run made.
 *
 * # Safety
 * See the crate-level safety notes.
 */
enum MickyStatus micky_run_cost(const struct MickyRun *run, uint64_t *out);

/**
 * Config index recommended for workload `w`. For collective runs this is
 * the exemplar for every workload.
 *
 * # Safety
 * See the crate-level safety notes.
 */
enum MickyStatus micky_run_chosen(const struct MickyRun *run, size_t w, size_t *out);

/**
 * Run outcome as JSON, as a string the caller frees.
 *
 * # Safety
 * See the crate-level safety notes.
 */
enum MickyStatus micky_run_to_json(const struct MickyRun *run, char **out);

/**
 * Replicates a method `n_reps` times with seeds `base_seed + i` and writes
 * the aggregate report as JSON.
 *
 * # Safety
 * See the crate-level safety notes.
 */
enum MickyStatus micky_replicate(const struct MickyMatrix *matrix,
                                 const char *method_json,
                                 size_t n_reps,
                                 uint64_t base_seed,
                                 char **out_json);

/**
 * Smallest recurrence count at which a per-workload optimizer pays off,
 * or [`MICKY_KNEE_NEVER`].
 *
 * # Safety
 * See the crate-level safety notes.
 */
enum MickyStatus micky_knee_point(double delta_p, double savings, double ratio, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MICKY_H */
