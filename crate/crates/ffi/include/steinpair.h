#ifndef STEINPAIR_H
#define STEINPAIR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point.
 */
typedef enum {
  /**
   * Success.
   */
  SP_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SP_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  SP_STATUS_INVALID_UTF8 = 2,
  /**
   * Model or configuration parameters were rejected; see
   * `sp_last_error_message`.
   */
  SP_STATUS_INVALID_PARAMETER = 3,
  /**
   * The run completed but a theorem assertion failed; the report is
   * still returned.
   */
  SP_STATUS_THEOREM_VIOLATION = 4,
  /**
   * An internal panic was caught.
   */
  SP_STATUS_PANIC = 5,
} SpStatus;

/**
 * Opaque exact pair coupling handle.
 */
typedef struct SpCoupling SpCoupling;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the most recent error message on this thread into `buf`
 * (NUL-terminated, truncated to `cap` bytes). Returns the full message
 * length including the terminator; call with `cap = 0` to query the size.
 *
 * # Safety
 * `buf` must point to at least `cap` writable bytes, or be null with
 * `cap = 0`.
 */
size_t sp_last_error_message(char *buf, size_t cap);

/**
 * Build a model coupling. `model` is one of the CLI model names
 * (rademacher, immigration_death, skewed_two_step, fixed_points,
 * biased_cycle); `params_json` is a JSON object of numeric parameters,
 * e.g. `{"n": 16}`. On success `*out` owns the new handle.
 *
 * # Safety
 * `model` and `params_json` must be NUL-terminated strings; `out` must be
 * a valid pointer.
 */
SpStatus sp_coupling_build(const char *model, const char *params_json, SpCoupling **out);

/**
 * Parse a coupling from its documented JSON form
 * `{"values": [...], "joint": [[...]]}`.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be valid.
 */
SpStatus sp_coupling_from_json(const char *text, SpCoupling **out);

/**
 * Serialize a coupling to its documented JSON form. The returned string
 * must be released with `sp_string_free`.
 *
 * # Safety
 * `handle` must be a live coupling handle; `out` must be valid.
 */
SpStatus sp_coupling_to_json(const SpCoupling *handle, char **out);

/**
 * Number of support points of the coupling; 0 for a null handle.
 *
 * # Safety
 * `handle` must be null or a live coupling handle.
 */
size_t sp_coupling_states(const SpCoupling *handle);

/**
 * Worst |row - column| marginal defect of the coupling; NaN for null.
 *
 * # Safety
 * `handle` must be null or a live coupling handle.
 */
double sp_coupling_marginal_discrepancy(const SpCoupling *handle);

/**
 * Whether max |p_{kj} - p_{jk}| <= tol.
 *
 * # Safety
 * `handle` must be a live coupling handle; `out` must be valid.
 */
SpStatus sp_coupling_is_exchangeable(const SpCoupling *handle, double tol, bool *out);

/**
 * Release a coupling handle. Null is ignored.
 *
 * # Safety
 * `handle` must be null or a pointer previously returned by a constructor,
 * and must not be used afterwards.
 */
void sp_coupling_free(SpCoupling *handle);

/**
 * Run the normal-approximation pipeline. `config_json` follows the CLI
 * config-file schema and must name a model; pass null `csv_out` to skip
 * the CSV. Returns `SP_STATUS_THEOREM_VIOLATION` when the run finishes
 * but an assertion fails (the report is still written).
 *
 * # Safety
 * Pointer arguments must be null or valid as documented.
 */
SpStatus sp_run_normal(const char *config_json, char **report_out, char **csv_out);

/**
 * Run the Poisson-approximation pipeline; see `sp_run_normal`.
 *
 * # Safety
 * Pointer arguments must be null or valid as documented.
 */
SpStatus sp_run_poisson(const char *config_json, char **report_out, char **csv_out);

/**
 * Run the full verification suite; `config_json` may be null for the
 * default matrix and seed.
 *
 * # Safety
 * Pointer arguments must be null or valid as documented.
 */
SpStatus sp_run_verify(const char *config_json, char **report_out, char **csv_out);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a pointer returned through an out-parameter of this
 * library, and must not be used afterwards.
 */
void sp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STEINPAIR_H */
