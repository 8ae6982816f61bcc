#ifndef QML_H
#define QML_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QmlStatus {
  QML_STATUS_OK = 0,
  QML_STATUS_NULL_POINTER = 1,
  QML_STATUS_INVALID_UTF8 = 2,
  QML_STATUS_PARSE_ERROR = 3,
  QML_STATUS_LINEARITY_VIOLATION = 4,
  QML_STATUS_IMPOSSIBLE_OUTCOME = 5,
  QML_STATUS_NO_ADMISSIBLE_OUTCOME = 6,
  QML_STATUS_NOT_A_PRODUCT_STATE = 7,
  QML_STATUS_DIMENSION_MISMATCH = 8,
  QML_STATUS_INVALID_ARGUMENT = 9,
  QML_STATUS_INTERNAL = 10,
} QmlStatus;

/*
 The result of running a script.
 */
typedef struct QmlRun QmlRun;

/*
 A reasoning session driven call by call.
 */
typedef struct QmlSession QmlSession;

/*
 Returns the message of the last failure on this thread, or NULL. The
 caller frees it with [`qml_string_free`].
 */
char *qml_last_error(void);

/*
 # Safety
 `s` must come from this library and not have been freed.
 */
void qml_string_free(char *s);

/*
 Parses and runs a script. `bindings` is NULL or `name=value` pairs
 separated by newlines or `;`. Runtime errors and failed expectations
 are reported through the run, not the return status.

 # Safety
 `source` and `bindings` must be NUL-terminated or NULL; `out` must be
 writable.
 */
enum QmlStatus qml_script_run(const char *source,
                              const char *bindings,
                              uint64_t seed,
                              struct QmlRun **out);

/*
 Status of the run's runtime error, [`QmlStatus::Ok`] if it completed.
 `expect_failures` receives the number of failed `expect` statements.

 # Safety
 `run` must be a live run; `expect_failures` NULL or writable.
 */
enum QmlStatus qml_run_status(const struct QmlRun *run, uint32_t *expect_failures);

/*
 Query answers and expectation results, one per line.

 # Safety
 `run` must be a live run; `out` writable.
 */
enum QmlStatus qml_run_output(const struct QmlRun *run, char **out);

/*
 Derivation trace; `structured` selects the line-record format.

 # Safety
 `run` must be a live run; `out` writable.
 */
enum QmlStatus qml_run_trace(const struct QmlRun *run, bool structured, char **out);

/*
 Replays the run against the state-vector oracle. `passed` receives 1
 when the report has no FAIL line.

 # Safety
 `run` must be a live run; `report` and `passed` writable.
 */
enum QmlStatus qml_run_audit(const struct QmlRun *run, char **report, bool *passed);

/*
 # Safety
 `run` must come from [`qml_script_run`] and not have been freed.
 */
void qml_run_free(struct QmlRun *run);

/*
 New empty session with default tolerances.
 */
struct QmlSession *qml_session_new(uint64_t seed);

/*
 # Safety
 `session` must come from [`qml_session_new`] and not have been freed.
 */
void qml_session_free(struct QmlSession *session);

/*
 Declares a system; `name` may be NULL for an automatic name.

 # Safety
 `session` must be live; `name` NULL or NUL-terminated; `handle` writable.
 */
enum QmlStatus qml_session_declare(struct QmlSession *session,
                                   const char *name,
                                   size_t dim,
                                   uint32_t *handle);

/*
 Records `(handles) |= amps`. `fact` may be NULL.

 # Safety
 Arrays must hold `n_handles` handles and `n_amps` complex pairs.
 */
enum QmlStatus qml_session_assume(struct QmlSession *session,
                                  const uint32_t *handles,
                                  size_t n_handles,
                                  const double *amps,
                                  size_t n_amps,
                                  uint32_t *fact);

/*
 Applies the `dim`×`dim` row-major unitary to the listed systems; the
 successor handles are written to `out_handles` (length `n_handles`).

 # Safety
 Arrays must have the stated lengths; `out_handles` writable.
 */
enum QmlStatus qml_session_apply(struct QmlSession *session,
                                 const uint32_t *handles,
                                 size_t n_handles,
                                 const double *matrix,
                                 size_t dim,
                                 uint32_t *out_handles);

/*
 Measures `handle` in the basis given as `dim` rows of `dim` amplitudes.
 `chosen` is an outcome index, or -1 to sample among admissible ones.

 # Safety
 `basis` must hold `dim*dim` complex pairs; outputs writable.
 */
enum QmlStatus qml_session_measure(struct QmlSession *session,
                                   uint32_t handle,
                                   const double *basis,
                                   size_t dim,
                                   int64_t chosen,
                                   uint32_t *outcome,
                                   uint32_t *successor);

/*
 Writes the admissible outcome indices (at most `dim`) and their count.

 # Safety
 `basis` must hold `dim*dim` pairs; `outcomes` room for `dim` entries.
 */
enum QmlStatus qml_session_possible(struct QmlSession *session,
                                    uint32_t handle,
                                    const double *basis,
                                    size_t dim,
                                    uint32_t *outcomes,
                                    size_t *count);

/*
 Sets `*holds` to whether `(handles) |= amps` follows from the facts.

 # Safety
 Arrays must have the stated lengths; `holds` writable.
 */
enum QmlStatus qml_session_verifies(struct QmlSession *session,
                                    const uint32_t *handles,
                                    size_t n_handles,
                                    const double *amps,
                                    size_t n_amps,
                                    bool *holds);

/*
 # Safety
 `session` must be live; `out` writable.
 */
enum QmlStatus qml_session_trace(const struct QmlSession *session, bool structured, char **out);

#endif  /* QML_H */
