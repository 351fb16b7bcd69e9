#ifndef CARTAN_H
#define CARTAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Derivative depth. `Default` picks second, or first for the oracle.
 */
typedef enum CartanDepth {
  CARTAN_DEPTH_DEFAULT = 0,
  CARTAN_DEPTH_BASE = 1,
  CARTAN_DEPTH_FIRST = 2,
  CARTAN_DEPTH_SECOND = 3,
} CartanDepth;

/**
 * Result of an API call.
 */
typedef enum CartanStatus {
  CARTAN_STATUS_OK = 0,
  CARTAN_STATUS_NULL_ARGUMENT = 1,
  CARTAN_STATUS_INVALID_UTF8 = 2,
  /**
   * Bad option or unknown built-in name.
   */
  CARTAN_STATUS_USAGE = 3,
  /**
   * The metric could not be parsed or built.
   */
  CARTAN_STATUS_METRIC = 4,
  /**
   * No sample point lies in the metric's domain.
   */
  CARTAN_STATUS_NO_POINTS = 5,
  CARTAN_STATUS_PANIC = 6,
} CartanStatus;

typedef enum CartanCommand {
  CARTAN_COMMAND_CLASSIFY = 0,
  CARTAN_COMMAND_VERIFY = 1,
  CARTAN_COMMAND_DIAGRAM = 2,
  CARTAN_COMMAND_ORACLE = 3,
} CartanCommand;

/**
 * A built Finsler metric.
 */
typedef struct CartanMetric CartanMetric;

/**
 * A finished run: canonical JSON report and the command-line exit code it maps to.
 */
typedef struct CartanReport CartanReport;

/**
 * Run options. Tolerances that are zero take their default value.
 */
typedef struct CartanOptions {
  uint32_t points;
  uint64_t seed;
  uint32_t order;
  enum CartanDepth depth;
  double eps_fit;
  double eps_deg;
  double eps_form;
  double eps_gram;
} CartanOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next call.
 */
const char *cartan_last_error(void);

/**
 * Library version as a static string.
 */
const char *cartan_version(void);

/**
 * Options matching the command-line defaults.
 */
struct CartanOptions cartan_options_default(void);

/**
 * Builds a built-in metric such as `"randers"` in dimension `n`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
enum CartanStatus cartan_metric_builtin(const char *name,
                                        uint32_t n,
                                        double kappa,
                                        struct CartanMetric **out);

/**
 * Parses and builds a metric from the text of a metric file.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a writable pointer.
 */
enum CartanStatus cartan_metric_parse(const char *source, struct CartanMetric **out);

/**
 * Dimension of the base manifold, or 0 for a null handle.
 *
 * # Safety
 * `metric` must be null or a live handle.
 */
uint32_t cartan_metric_dim(const struct CartanMetric *metric);

/**
 * # Safety
 * `metric` must be null or a handle not yet freed.
 */
void cartan_metric_free(struct CartanMetric *metric);

/**
 * Runs a command on `metric`. `options` may be null for defaults.
 *
 * A finished run returns `Ok` even when the report flags a violation; check
 * [`cartan_report_exit_code`].
 *
 * # Safety
 * `metric` must be a live handle, `options` null or valid, `out` writable.
 */
enum CartanStatus cartan_run(const struct CartanMetric *metric,
                             enum CartanCommand command,
                             const struct CartanOptions *options,
                             struct CartanReport **out);

/**
 * Report as canonical JSON, owned by the handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
const char *cartan_report_json(const struct CartanReport *report);

/**
 * Exit code the command line would return for this report, or -1 for null.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
int32_t cartan_report_exit_code(const struct CartanReport *report);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void cartan_report_free(struct CartanReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CARTAN_H */
