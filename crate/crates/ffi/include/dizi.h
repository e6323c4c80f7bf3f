#ifndef DIZI_H
#define DIZI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum DiziStatus {
  DIZI_STATUS_OK = 0,
  DIZI_STATUS_NULL_POINTER = 1,
  DIZI_STATUS_INVALID_UTF8 = 2,
  DIZI_STATUS_PARSE = 3,
  DIZI_STATUS_MODEL = 4,
  DIZI_STATUS_INVALID = 5,
  DIZI_STATUS_PANIC = 6,
} DiziStatus;

/**
 * A trained style classifier.
 */
typedef struct DiziClassifier DiziClassifier;

/**
 * A parsed score.
 */
typedef struct DiziScore DiziScore;

/**
 * A trained technique tagger.
 */
typedef struct DiziTagger DiziTagger;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *dizi_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void dizi_string_free(char *s);

/**
 * Parses jianpu text into a new score handle.
 *
 * # Safety
 * `src` must be a NUL-terminated string; `out` must be writable.
 */
enum DiziStatus dizi_score_parse(const char *src, struct DiziScore **out);

/**
 * # Safety
 * `score` must be null or a handle from this library, not yet freed.
 */
void dizi_score_free(struct DiziScore *score);

/**
 * Number of notes and rests.
 *
 * # Safety
 * `score` must be a live handle; `out` must be writable.
 */
enum DiziStatus dizi_score_note_count(const struct DiziScore *score, size_t *out);

/**
 * Canonical jianpu text.
 *
 * # Safety
 * `score` must be a live handle; `out` must be writable.
 */
enum DiziStatus dizi_score_serialize(const struct DiziScore *score, char **out);

/**
 * MusicXML document.
 *
 * # Safety
 * `score` must be a live handle; `out` must be writable.
 */
enum DiziStatus dizi_score_musicxml(const struct DiziScore *score, char **out);

/**
 * Space-separated note tokens of the whole score.
 *
 * # Safety
 * `score` must be a live handle; `out` must be writable.
 */
enum DiziStatus dizi_score_tokens(const struct DiziScore *score, char **out);

/**
 * Loads a classifier from its text format.
 *
 * # Safety
 * `model` must be a NUL-terminated string; `out` must be writable.
 */
enum DiziStatus dizi_classifier_load(const char *model, struct DiziClassifier **out);

/**
 * # Safety
 * `classifier` must be null or a handle from this library, not yet freed.
 */
void dizi_classifier_free(struct DiziClassifier *classifier);

/**
 * Predicted school of a score and its probability. Scores of at least one
 * window are scored as the mean over 4-measure windows, shorter ones whole.
 *
 * # Safety
 * Handles must be live; `label` and `probability` must be writable. The
 * label string is released with [`dizi_string_free`].
 */
enum DiziStatus dizi_classifier_predict(const struct DiziClassifier *classifier,
                                        const struct DiziScore *score,
                                        char **label,
                                        double *probability);

/**
 * Loads a tagger from its text format.
 *
 * # Safety
 * `model` must be a NUL-terminated string; `out` must be writable.
 */
enum DiziStatus dizi_tagger_load(const char *model, struct DiziTagger **out);

/**
 * # Safety
 * `tagger` must be null or a handle from this library, not yet freed.
 */
void dizi_tagger_free(struct DiziTagger *tagger);

/**
 * A new score with every note's technique replaced by the tagger's
 * decoding; with `use_rules`, the built-in rules constrain decoding.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum DiziStatus dizi_tagger_apply(const struct DiziTagger *tagger,
                                  const struct DiziScore *score,
                                  bool use_rules,
                                  struct DiziScore **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIZI_H */
