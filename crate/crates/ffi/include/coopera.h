#ifndef COOPERA_H
#define COOPERA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define COOPERA_STAGE_LOGLINE 0

#define COOPERA_STAGE_CHARACTERS 1

#define COOPERA_STAGE_PLOTS 2

#define COOPERA_STAGE_SCENES 3

#define COOPERA_STAGE_DIALOGUES 4

/**
 * Result of a call. The first six values match the command-line exit codes.
 */
typedef enum CooperaStatus {
  COOPERA_STATUS_OK = 0,
  COOPERA_STATUS_OTHER = 1,
  COOPERA_STATUS_VALIDATION = 2,
  COOPERA_STATUS_STAGE_ORDER = 3,
  COOPERA_STATUS_PROVIDER = 4,
  COOPERA_STATUS_STORAGE = 5,
  COOPERA_STATUS_NULL_POINTER = 6,
  COOPERA_STATUS_INVALID_UTF8 = 7,
  COOPERA_STATUS_NOT_FOUND = 8,
  COOPERA_STATUS_CONFLICT = 9,
  COOPERA_STATUS_SCHEMA = 10,
  COOPERA_STATUS_INVALID_ARGUMENT = 11,
  COOPERA_STATUS_PANIC = 12,
} CooperaStatus;

typedef enum CooperaStageState {
  COOPERA_STAGE_STATE_EMPTY = 0,
  COOPERA_STAGE_STATE_DRAFT = 1,
  COOPERA_STAGE_STATE_CONFIRMED = 2,
} CooperaStageState;

/**
 * Opaque engine handle (provider, clock, prompt library).
 */
typedef struct CooperaEngine CooperaEngine;

/**
 * Opaque project handle.
 */
typedef struct CooperaProject CooperaProject;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string.
 */
const char *coopera_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next library call on the same thread.
 */
const char *coopera_last_error_message(void);

/**
 * Engine error code (e.g. `STAGE_ORDER`) of the last failed call, or null.
 */
const char *coopera_last_error_code(void);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void coopera_string_free(char *s);

/**
 * # Safety
 * String arguments must be valid NUL-terminated strings; `out` must be writable.
 */
enum CooperaStatus coopera_project_new(const char *id,
                                       const char *title,
                                       const char *logline,
                                       struct CooperaProject **out);

/**
 * # Safety
 * `json` must be a valid NUL-terminated string; `out` must be writable.
 */
enum CooperaStatus coopera_project_from_json(const char *json, struct CooperaProject **out);

/**
 * Canonical JSON of the project.
 *
 * # Safety
 * `project` must be a live handle; `out` must be writable.
 */
enum CooperaStatus coopera_project_to_json(const struct CooperaProject *project, char **out);

/**
 * # Safety
 * `project` must be a live handle; `out` must be writable.
 */
enum CooperaStatus coopera_project_screenplay(const struct CooperaProject *project, char **out);

/**
 * # Safety
 * `project` must be a live handle or null (null gives 0).
 */
uint64_t coopera_project_revision(const struct CooperaProject *project);

/**
 * # Safety
 * `project` must be a live handle; `out` must be writable.
 */
enum CooperaStatus coopera_project_stage_state(const struct CooperaProject *project,
                                               uint32_t stage_index,
                                               enum CooperaStageState *out);

/**
 * JSON array of model invariant violations (empty when valid).
 *
 * # Safety
 * `project` must be a live handle; `out` must be writable.
 */
enum CooperaStatus coopera_project_validate(const struct CooperaProject *project, char **out);

/**
 * JSON object mapping stage name to `fresh`, `stale` or `empty`.
 *
 * # Safety
 * `project` must be a live handle; `out` must be writable.
 */
enum CooperaStatus coopera_project_staleness(const struct CooperaProject *project, char **out);

/**
 * # Safety
 * `project` must come from this library or be null.
 */
void coopera_project_free(struct CooperaProject *project);

/**
 * Engine backed by the offline mock provider.
 *
 * # Safety
 * `out` must be writable.
 */
enum CooperaStatus coopera_engine_new_mock(struct CooperaEngine **out);

/**
 * Engine configured from `PROVIDER_*` variables, falling back to the mock.
 *
 * # Safety
 * `out` must be writable.
 */
enum CooperaStatus coopera_engine_from_env(bool force_mock, struct CooperaEngine **out);

/**
 * # Safety
 * `engine` must come from this library or be null.
 */
void coopera_engine_free(struct CooperaEngine *engine);

/**
 * Generate a stage draft. On success the project is updated in place; on
 * failure it is unchanged.
 *
 * # Safety
 * Handles must be live.
 */
enum CooperaStatus coopera_generate(const struct CooperaEngine *engine,
                                    struct CooperaProject *project,
                                    uint32_t stage_index,
                                    uint64_t seed);

/**
 * Confirm a stage's current draft, or replace it with `elements_json` (an
 * element array, or a JSON string for the logline) when that is not null.
 *
 * # Safety
 * Handles must be live; `elements_json` is null or a valid string.
 */
enum CooperaStatus coopera_confirm(const struct CooperaEngine *engine,
                                   struct CooperaProject *project,
                                   uint32_t stage_index,
                                   const char *elements_json);

/**
 * Patch one element with a JSON object of field changes.
 *
 * # Safety
 * Handles must be live; strings valid.
 */
enum CooperaStatus coopera_edit(const struct CooperaEngine *engine,
                                struct CooperaProject *project,
                                const char *element_id,
                                const char *patch_json,
                                uint64_t expected_revision);

/**
 * Regenerate and confirm `from` and every later stage. Stages finished
 * before a failure are kept in the project.
 *
 * # Safety
 * Handles must be live.
 */
enum CooperaStatus coopera_cascade(const struct CooperaEngine *engine,
                                   struct CooperaProject *project,
                                   uint32_t from_stage,
                                   uint64_t seed);

/**
 * Diff report (JSON) between a stage's last generation and its current text.
 *
 * # Safety
 * `project` must be live; `out` writable.
 */
enum CooperaStatus coopera_diff_report(const struct CooperaProject *project,
                                       uint32_t stage_index,
                                       char **out);

/**
 * Character-level Levenshtein distance and the distance over the longer length.
 *
 * # Safety
 * Strings valid; out pointers writable.
 */
enum CooperaStatus coopera_edit_distance(const char *a,
                                         const char *b,
                                         size_t *out_distance,
                                         double *out_normalized);

/**
 * Deleted and inserted character counts of a minimal alignment.
 *
 * # Safety
 * Strings valid; out pointers writable.
 */
enum CooperaStatus coopera_diff_lengths(const char *original,
                                        const char *revised,
                                        size_t *out_deleted,
                                        size_t *out_inserted);

/**
 * # Safety
 * Strings valid; `out` writable.
 */
enum CooperaStatus coopera_jaccard(const char *a, const char *b, double *out);

/**
 * Score questionnaires. Input is `{"responses": [{"respondent_id", "raw"}]}`
 * or `{"adjusted_item_means": [ten numbers]}`; output is the report JSON.
 *
 * # Safety
 * `input_json` valid; `out` writable.
 */
enum CooperaStatus coopera_sus_score_json(const char *input_json, char **out);

/**
 * Screenplay of the offline demo for `seed`.
 *
 * # Safety
 * `out` writable.
 */
enum CooperaStatus coopera_demo(uint64_t seed, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COOPERA_H */
