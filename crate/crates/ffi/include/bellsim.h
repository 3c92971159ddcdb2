#ifndef BELLSIM_H
#define BELLSIM_H

/* Generated by cbindgen from bellsim-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible FFI call.
 */
typedef enum BellsimStatus {
  BellsimStatus_Ok = 0,
  BellsimStatus_NullPointer = 1,
  BellsimStatus_InvalidUtf8 = 2,
  BellsimStatus_InvalidConfig = 3,
  BellsimStatus_InternalError = 4,
  BellsimStatus_NotRun = 5,
} BellsimStatus;

/**
 * Experiment handle: a validated config plus, after a run, its report.
 */
typedef struct BellsimExperiment BellsimExperiment;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Crate version as a static NUL-terminated string; never freed.
 */
const char *bellsim_version(void);

/**
 * Message for the most recent failure on this thread, or NULL when the
 * last call succeeded. Valid until the next failing call; do not free.
 */
const char *bellsim_last_error_message(void);

/**
 * Creates an experiment from a flat JSON config object (the same format
 * the CLI accepts via `--config`, `scenario` key required).
 *
 * # Safety
 * `config_json` must point to a NUL-terminated string and `out` to a
 * writable handle slot. A handle returned here must be released with
 * [`bellsim_experiment_free`].
 */
enum BellsimStatus bellsim_experiment_new(const char *config_json, struct BellsimExperiment **out);

/**
 * Runs the experiment and stores the report inside the handle.
 *
 * # Safety
 * `handle` must come from [`bellsim_experiment_new`] and not be freed.
 */
enum BellsimStatus bellsim_experiment_run(struct BellsimExperiment *handle);

/**
 * Copies the report out as pretty JSON. Free the string with
 * [`bellsim_string_free`].
 *
 * # Safety
 * `handle` must be a live handle; `out` must be writable.
 */
enum BellsimStatus bellsim_experiment_report_json(const struct BellsimExperiment *handle,
                                                  char **out);

/**
 * Copies the report out as CSV. Free the string with
 * [`bellsim_string_free`].
 *
 * # Safety
 * `handle` must be a live handle; `out` must be writable.
 */
enum BellsimStatus bellsim_experiment_report_csv(const struct BellsimExperiment *handle,
                                                 char **out);

/**
 * Releases an experiment handle. NULL is accepted.
 *
 * # Safety
 * `handle` must come from [`bellsim_experiment_new`] and not be used
 * afterwards.
 */
void bellsim_experiment_free(struct BellsimExperiment *handle);

/**
 * Releases a string returned by the report functions. NULL is accepted.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void bellsim_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BELLSIM_H */
