#ifndef FORGE_H
#define FORGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define FORGE_OK 0

#define FORGE_ERR_VALIDATION 1

#define FORGE_ERR_PARSE 2

#define FORGE_ERR_NUMERICAL 3

#define FORGE_ERR_CONVERSION 4

#define FORGE_ERR_NOOP 5

#define FORGE_ERR_NULL 6

#define FORGE_ERR_UTF8 7

#define FORGE_ERR_PANIC 8

#define FORGE_ERR_IO 9

#define FORGE_FORMAT_CANONICAL 0

#define FORGE_FORMAT_INFOTABS 1

#define FORGE_MODE_UNIVERSAL 0

#define FORGE_MODE_BPR 1

#define FORGE_MODE_LINEARIZE 2

#define FORGE_LABEL_ENTAILMENT 0

#define FORGE_LABEL_NEUTRAL 1

#define FORGE_LABEL_CONTRADICTION 2

#define FORGE_TO_WORDS 0

#define FORGE_TO_DIGITS 1

/**
 * Opaque perturbation engine with builtin resources.
 */
typedef struct ForgePerturber ForgePerturber;

/**
 * Opaque parsed table.
 */
typedef struct ForgeTable ForgeTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Owned by the
 * library and valid until the next call on the same thread.
 */
const char *forge_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed at most once.
 */
void forge_string_free(char *s);

/**
 * Parse a table document (`FORGE_FORMAT_*`).
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
int forge_table_parse(const char *json, int format, ForgeTable **out);

/**
 * # Safety
 * `table` must be null or a handle from this library, freed at most once.
 */
void forge_table_free(ForgeTable *table);

/**
 * Render a premise (`FORGE_MODE_*`) with the builtin templates.
 *
 * # Safety
 * `table` must be a live handle; `out` must be writable.
 */
int forge_render(const ForgeTable *table, int mode, char **out);

/**
 * # Safety
 * `table` must be a live handle; `out` must be writable.
 */
int forge_linearize(const ForgeTable *table, char **out);

/**
 * Keep the `k` rows most relevant to `hypothesis`; writes a new table handle.
 *
 * # Safety
 * `table` must be a live handle, `hypothesis` NUL-terminated, `out` writable.
 */
int forge_drr(const ForgeTable *table, const char *hypothesis, size_t k, ForgeTable **out);

/**
 * Convert between digits and English words (`FORGE_TO_WORDS`/`FORGE_TO_DIGITS`).
 *
 * # Safety
 * `s` must be NUL-terminated; `out` must be writable.
 */
int forge_numeral_normalize(const char *s, int direction, char **out);

/**
 * Decoupled label loss of one logit row. `verbalizer_ids` points at three
 * ids in E, N, C order.
 *
 * # Safety
 * `logits` must hold `vocab` values and `verbalizer_ids` three values.
 */
int forge_decoupled_label_loss(const double *logits,
                               size_t vocab,
                               const size_t *verbalizer_ids,
                               int gold,
                               double *out);

/**
 * Label-conditioned MLM loss over `n` masked positions; `logits` is
 * row-major `n × vocab`.
 *
 * # Safety
 * `logits` must hold `n * vocab` values and `original_ids` `n` values.
 */
int forge_label_conditioned_mlm_loss(const double *logits,
                                     size_t n,
                                     size_t vocab,
                                     const size_t *original_ids,
                                     bool condition_correct,
                                     double *out);

/**
 * # Safety
 * `out` must be writable.
 */
int forge_perturber_new(ForgePerturber **out);

/**
 * Replace the name list with newline-separated names.
 *
 * # Safety
 * `p` must be a live handle; `names` NUL-terminated.
 */
int forge_perturber_set_names(ForgePerturber *p, const char *names);

/**
 * # Safety
 * `p` must be null or a handle from this library, freed at most once.
 */
void forge_perturber_free(ForgePerturber *p);

/**
 * Compose the comma-separated `kinds` on `text` and write the resulting
 * record as JSON. Dropped records are returned too, with `new_label` set to
 * `"dropped"`.
 *
 * # Safety
 * `p` must be a live handle; string arguments NUL-terminated; `out` writable.
 */
int forge_perturb_compose(const ForgePerturber *p,
                          const char *pair_ref,
                          const char *text,
                          int label,
                          const char *kinds,
                          uint64_t seed,
                          char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FORGE_H */
