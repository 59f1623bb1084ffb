#ifndef WAVETAP_H
#define WAVETAP_H

/* Generated by cbindgen from wavetap-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a wavetap C API call.
 */
typedef enum WavetapStatus {
  /**
   * The call succeeded.
   */
  WAVETAP_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  WAVETAP_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  WAVETAP_STATUS_UTF8_ERROR = 2,
  /**
   * An argument or configuration value was rejected.
   */
  WAVETAP_STATUS_INVALID_ARGUMENT = 3,
  /**
   * The computation itself failed.
   */
  WAVETAP_STATUS_RUNTIME_ERROR = 4,
} WavetapStatus;

/**
 * Opaque experiment configuration handle.
 */
typedef struct WavetapConfig WavetapConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a configuration with the desk-scale defaults. Never fails.
 * Release with [`wavetap_config_free`].
 */
struct WavetapConfig *wavetap_config_default(void);

/**
 * Parses a configuration from flat TOML text (unknown keys are rejected)
 * and stores the new handle in `out_config`.
 *
 * # Safety
 *
 * `text` must be a NUL-terminated string and `out_config` a valid pointer.
 */
enum WavetapStatus wavetap_config_from_toml(const char *text, struct WavetapConfig **out_config);

/**
 * Overrides the root seed of a configuration.
 *
 * # Safety
 *
 * `config` must be a live handle from this library.
 */
enum WavetapStatus wavetap_config_set_seed(struct WavetapConfig *config, uint64_t seed);

/**
 * Overrides the observation mode; `mode` is `"analytic"` or `"probe"`.
 *
 * # Safety
 *
 * `config` must be a live handle and `mode` a NUL-terminated string.
 */
enum WavetapStatus wavetap_config_set_mode(struct WavetapConfig *config, const char *mode);

/**
 * Overrides the Monte-Carlo trial count per grid point.
 *
 * # Safety
 *
 * `config` must be a live handle from this library.
 */
enum WavetapStatus wavetap_config_set_trials(struct WavetapConfig *config, size_t trials);

/**
 * Releases a configuration handle. NULL is ignored.
 *
 * # Safety
 *
 * `config` must be NULL or a live handle from this library.
 */
void wavetap_config_free(struct WavetapConfig *config);

/**
 * Runs the bit-error-rate sweep and stores a report in `out_report`;
 * `format` is `"csv"` or `"json"`. Release the string with
 * [`wavetap_string_free`].
 *
 * # Safety
 *
 * `config` must be a live handle, `format` a NUL-terminated string, and
 * `out_report` a valid pointer.
 */
enum WavetapStatus wavetap_run_ber(const struct WavetapConfig *config,
                                   const char *format,
                                   char **out_report);

/**
 * Runs the statistic-histogram experiment; with `correlated` false the
 * power-only baseline is scored instead of the joint detector.
 *
 * # Safety
 *
 * Same contract as [`wavetap_run_ber`].
 */
enum WavetapStatus wavetap_run_llr_hist(const struct WavetapConfig *config,
                                        bool correlated,
                                        const char *format,
                                        char **out_report);

/**
 * Runs the probe self-tests; `out_passed` receives whether every check
 * passed.
 *
 * # Safety
 *
 * Same contract as [`wavetap_run_ber`], plus a valid `out_passed` pointer.
 */
enum WavetapStatus wavetap_run_probe_validation(const struct WavetapConfig *config,
                                                const char *format,
                                                char **out_report,
                                                bool *out_passed);

/**
 * Compares simulated wave covariance with its closed form; `out_passed`
 * receives whether every row stayed within tolerance.
 *
 * # Safety
 *
 * Same contract as [`wavetap_run_probe_validation`].
 */
enum WavetapStatus wavetap_run_cov_check(const struct WavetapConfig *config,
                                         const char *format,
                                         char **out_report,
                                         bool *out_passed);

/**
 * Reflection coefficient `(resistance - z0) / (resistance + z0)` of a
 * resistive termination.
 *
 * # Safety
 *
 * `out_gamma` must be a valid pointer.
 */
enum WavetapStatus wavetap_reflection_coefficient(double resistance, double z0, double *out_gamma);

/**
 * Closed-form steady-state covariance of the two directional waves on a
 * line terminated with `r_alice` and `r_bob` at the given one-way loss.
 *
 * # Safety
 *
 * The three output pointers must be valid.
 */
enum WavetapStatus wavetap_wave_covariance(double r_alice,
                                           double r_bob,
                                           double z0,
                                           double loss_db,
                                           double *out_c_pp,
                                           double *out_c_pm,
                                           double *out_c_mm);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 *
 * `text` must be NULL or a string returned by this library that has not
 * been freed yet.
 */
void wavetap_string_free(char *text);

/**
 * Returns a copy of the calling thread's most recent error message (empty
 * if none). Release with [`wavetap_string_free`].
 */
char *wavetap_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WAVETAP_H */
