#ifndef CSYS_H
#define CSYS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a fallible call.
 */
typedef enum CsysStatus {
  CSYS_STATUS_OK = 0,
  CSYS_STATUS_NULL_ARGUMENT = 1,
  CSYS_STATUS_INVALID_UTF8 = 2,
  CSYS_STATUS_UNKNOWN_RULE = 3,
  CSYS_STATUS_INVALID_RULE = 4,
  CSYS_STATUS_INVALID_CONFIG = 5,
  CSYS_STATUS_PANIC = 6,
} CsysStatus;

typedef enum CsysVerdict {
  CSYS_VERDICT_PASS = 0,
  CSYS_VERDICT_FAIL = 1,
  /**
   * The input could not be read or parsed; see the JSON report.
   */
  CSYS_VERDICT_ERROR = 2,
} CsysVerdict;

/**
 * A rule set plus options. Opaque.
 */
typedef struct CsysChecker CsysChecker;

/**
 * The result of checking one input. Opaque.
 */
typedef struct CsysReport CsysReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * A checker with no rules selected; it checks all built-in rules until a
 * rule is added.
 */
struct CsysChecker *csys_checker_new(void);

/**
 * # Safety
 * `checker` must come from [`csys_checker_new`] and not be used afterwards.
 */
void csys_checker_free(struct CsysChecker *checker);

/**
 * Adds a built-in rule by id, e.g. `"R1-single-generalization"`.
 *
 * # Safety
 * `checker` must be a live handle; `id` a NUL-terminated string.
 */
enum CsysStatus csys_checker_add_builtin(struct CsysChecker *checker, const char *id);

/**
 * Compiles and adds a rule from rule-file source text.
 *
 * # Safety
 * `checker` must be a live handle; `source` a NUL-terminated string.
 */
enum CsysStatus csys_checker_add_rule_source(struct CsysChecker *checker, const char *source);

/**
 * Attribute limit for `R2-max-attributes`; must be at least 1.
 *
 * # Safety
 * `checker` must be a live handle.
 */
enum CsysStatus csys_checker_set_max_attributes(struct CsysChecker *checker, size_t n);

/**
 * Whether activity content is reordered before checking (default on).
 *
 * # Safety
 * `checker` must be a live handle.
 */
enum CsysStatus csys_checker_set_normalize(struct CsysChecker *checker, bool on);

/**
 * Checks the XMI file at `path`. Unreadable or malformed files still
 * produce a report, with verdict [`CsysVerdict::Error`].
 *
 * # Safety
 * `checker` must be a live handle, `path` a NUL-terminated string and
 * `out` writable.
 */
enum CsysStatus csys_check_file(struct CsysChecker *checker,
                                const char *path,
                                struct CsysReport **out);

/**
 * Checks XMI text; `name` labels the report.
 *
 * # Safety
 * `checker` must be a live handle, `name` and `source` NUL-terminated
 * strings and `out` writable.
 */
enum CsysStatus csys_check_str(struct CsysChecker *checker,
                               const char *name,
                               const char *source,
                               struct CsysReport **out);

/**
 * # Safety
 * `report` must be a live handle.
 */
enum CsysVerdict csys_report_verdict(const struct CsysReport *report);

/**
 * # Safety
 * `report` must be a live handle.
 */
size_t csys_report_violation_count(const struct CsysReport *report);

/**
 * The report as `{"reports":[...]}` JSON; free with [`csys_string_free`].
 * Returns NULL if `report` is NULL.
 *
 * # Safety
 * `report` must be a live handle.
 */
char *csys_report_to_json(const struct CsysReport *report);

/**
 * # Safety
 * `report` must come from a `csys_check_*` call and not be used afterwards.
 */
void csys_report_free(struct CsysReport *report);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void csys_string_free(char *s);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread; do not free.
 */
const char *csys_last_error(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CSYS_H */
