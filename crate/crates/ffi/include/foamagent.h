#ifndef FOAMAGENT_H
#define FOAMAGENT_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CfaRole {
  CFA_ROLE_REASONER = 0,
  CFA_ROLE_EDITOR = 1,
} CfaRole;

typedef enum CfaStatus {
  CFA_STATUS_OK = 0,
  CFA_STATUS_NULL_ARGUMENT = 1,
  CFA_STATUS_INVALID_UTF8 = 2,
  CFA_STATUS_INVALID_ARGUMENT = 3,
  CFA_STATUS_PARSE_ERROR = 4,
  CFA_STATUS_NOT_FOUND = 5,
  CFA_STATUS_IO = 6,
  /**
   * The run finished without reaching ten solver steps.
   */
  CFA_STATUS_RUN_FAILED = 7,
  CFA_STATUS_PANIC = 8,
} CfaStatus;

/**
 * Opaque knowledge base.
 */
typedef struct CfaKnowledgeBase CfaKnowledgeBase;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call on the same thread.
 */
const char *cfa_last_error(void);

/**
 * # Safety
 * `s` must come from this library or be NULL.
 */
void cfa_string_free(char *s);

/**
 * Parses an OpenFOAM dictionary and writes it back in canonical form.
 *
 * # Safety
 * `text_in` must be a NUL-terminated string; `out` a valid pointer.
 */
enum CfaStatus cfa_dict_normalize(const char *text_in, char **out);

/**
 * Canonical dimension exponents of a field, in OpenFOAM order
 * (mass, length, time, temperature, moles, current, luminosity).
 *
 * # Safety
 * `field` must be a NUL-terminated string; `out` must hold 7 ints.
 */
enum CfaStatus cfa_expected_dimensions(const char *field, bool compressible, int32_t *out);

/**
 * USD cost of one call at the default prices, as a decimal string.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CfaStatus cfa_call_cost(enum CfaRole role,
                             uint64_t input_tokens,
                             uint64_t output_tokens,
                             char **out);

/**
 * Ingests a tutorial tree.
 *
 * # Safety
 * `root` must be a NUL-terminated path; `out` a valid pointer.
 */
enum CfaStatus cfa_kb_ingest(const char *root, struct CfaKnowledgeBase **out);

/**
 * Loads a database written by `cfa_kb_export` or `foamagent kb build`.
 *
 * # Safety
 * `path` must be a NUL-terminated path; `out` a valid pointer.
 */
enum CfaStatus cfa_kb_load(const char *path, struct CfaKnowledgeBase **out);

/**
 * # Safety
 * `kb` must come from this library or be NULL.
 */
void cfa_kb_free(struct CfaKnowledgeBase *kb);

/**
 * Database document as JSON.
 *
 * # Safety
 * `kb` must be a live handle; `out` a valid pointer.
 */
enum CfaStatus cfa_kb_export(const struct CfaKnowledgeBase *kb, char **out);

/**
 * Files a solver/model combination requires, one path per line.
 * `model` and `thermo` may be NULL.
 *
 * # Safety
 * `kb` must be a live handle; strings NUL-terminated; `out` valid.
 */
enum CfaStatus cfa_kb_required_files(const struct CfaKnowledgeBase *kb,
                                     const char *solver,
                                     const char *model,
                                     const char *thermo,
                                     char **out);

/**
 * Offline run of the whole flow: document, case selection, mesh,
 * generation and the reflection loop, with LLM answers replayed from a
 * JSON script and a simulated executor. Writes the outcome JSON to `out`
 * and returns `CFA_STATUS_RUN_FAILED` when the case did not reach ten steps.
 *
 * # Safety
 * Strings must be NUL-terminated (`kb_or_null` may be NULL); `out` valid.
 */
enum CfaStatus cfa_dry_run(const char *document,
                           const char *mesh,
                           const char *script,
                           const char *label,
                           const char *workspace,
                           const struct CfaKnowledgeBase *kb_or_null,
                           char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FOAMAGENT_H */
