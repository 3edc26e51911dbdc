#ifndef MCAS_H
#define MCAS_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum McasStatus {
  MCAS_STATUS_OK = 0,
  /**
   * Runtime failure (solver blow-up, I/O, non-convergence).
   */
  MCAS_STATUS_RUNTIME = 1,
  /**
   * Invalid configuration or unparsable input.
   */
  MCAS_STATUS_CONFIG = 2,
  /**
   * Null pointer or malformed string argument.
   */
  MCAS_STATUS_ARGUMENT = 3,
  /**
   * Caught panic; a bug, not a user error.
   */
  MCAS_STATUS_INTERNAL = 4,
} McasStatus;

/**
 * Opaque experiment configuration handle.
 */
typedef struct McasConfig McasConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the most recent error message for this thread into `buf`
 * (NUL-terminated, truncated to `len`). Returns the full message length in
 * bytes, excluding the terminator.
 */
uintptr_t mcas_last_error(char *buf, uintptr_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mcas_version(void);

/**
 * Create a configuration with all defaults. Never fails.
 */
struct McasConfig *mcas_config_new(void);

/**
 * Load a configuration from a TOML file. Returns null on failure; call
 * `mcas_last_error` for the reason.
 */
struct McasConfig *mcas_config_load(const char *path);

/**
 * Apply a dotted-path override, e.g. `kinetics.alpha=3`.
 */
int mcas_config_override(struct McasConfig *cfg, const char *key_value);

/**
 * Serialize the resolved configuration to TOML. The returned string must be
 * freed with `mcas_string_free`.
 */
char *mcas_config_to_toml(const struct McasConfig *cfg);

/**
 * Free a string returned by this library.
 */
void mcas_string_free(char *s);

void mcas_config_free(struct McasConfig *cfg);

/**
 * Run the full experiment pipeline, writing artifacts into `out_dir`.
 */
int mcas_run_experiment(const struct McasConfig *cfg, const char *out_dir);

/**
 * Run the alpha sweep defined by `kinetics.alpha_list`.
 */
int mcas_sweep(const struct McasConfig *cfg, const char *out_dir);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* MCAS_H */
