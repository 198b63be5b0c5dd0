#ifndef FILLINGLAB_H
#define FILLINGLAB_H

/* Generated by cbindgen from the fillinglab-ffi sources; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FlStatus {
  FL_STATUS_OK = 0,
  FL_STATUS_NULL_POINTER = 1,
  FL_STATUS_INVALID_UTF8 = 2,
  FL_STATUS_PARSE = 3,
  FL_STATUS_UNKNOWN_FIXTURE = 4,
  FL_STATUS_BUDGET = 5,
  FL_STATUS_PRECONDITION = 6,
  FL_STATUS_OUT_OF_RANGE = 7,
  FL_STATUS_IO = 8,
  FL_STATUS_INTERNAL = 9,
} FlStatus;

/**
 * A ball in the cusped space of a group.
 */
typedef struct FlBall FlBall;

/**
 * A group fixture.
 */
typedef struct FlGroup FlGroup;

/**
 * The report of a scenario run.
 */
typedef struct FlReport FlReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message into `buf` (NUL-terminated, truncated to
 * `len`) and returns its full length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t fl_last_error(char *buf, size_t len);

/**
 * Loads a named fixture (`FIX1`, `FIX2`, `FIX3`, `TREE`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum FlStatus fl_group_new(const char *name, struct FlGroup **out);

/**
 * # Safety
 * `group` must come from `fl_group_new` and not be used afterwards.
 */
void fl_group_free(struct FlGroup *group);

/**
 * Number of peripheral factors of the group.
 *
 * # Safety
 * `group` must be a live handle; `out` must be writable.
 */
enum FlStatus fl_group_peripherals(const struct FlGroup *group, size_t *out);

/**
 * Truncation depth of the `index`-th peripheral after filling along
 * `slopes` (one per peripheral).
 *
 * # Safety
 * `slopes` must point to `count` integers; `out` must be writable.
 */
enum FlStatus fl_truncation_depth(const struct FlGroup *group,
                                  const int64_t *slopes,
                                  size_t count,
                                  size_t index,
                                  uint32_t *out);

/**
 * Ball of radius `radius` around the identity of the cusped space.
 *
 * # Safety
 * `group` must be a live handle; `out` must be writable.
 */
enum FlStatus fl_ball_new(const struct FlGroup *group, uint32_t radius, struct FlBall **out);

/**
 * # Safety
 * `ball` must come from `fl_ball_new` and not be used afterwards.
 */
void fl_ball_free(struct FlBall *ball);

/**
 * # Safety
 * `ball` must be a live handle; `out` must be writable.
 */
enum FlStatus fl_ball_len(const struct FlBall *ball, size_t *out);

/**
 * Distance inside the ball between vertices `i` and `j`.
 *
 * # Safety
 * `ball` must be a live handle; `out` must be writable.
 */
enum FlStatus fl_ball_distance(const struct FlBall *ball, size_t i, size_t j, uint32_t *out);

/**
 * Runs a scenario given as config text.
 *
 * # Safety
 * `config` must be a NUL-terminated string; `out` must be writable.
 */
enum FlStatus fl_scenario_run(const char *config, struct FlReport **out);

/**
 * The report as JSON, timings left out. Free with `fl_string_free`.
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum FlStatus fl_report_json(const struct FlReport *report, char **out);

/**
 * # Safety
 * `report` must come from `fl_scenario_run` and not be used afterwards.
 */
void fl_report_free(struct FlReport *report);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void fl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FILLINGLAB_H */
