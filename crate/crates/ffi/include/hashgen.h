#ifndef HASHGEN_H
#define HASHGEN_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum HgStatus {
  HG_STATUS_OK = 0,
  HG_STATUS_NULL_POINTER = 1,
  HG_STATUS_INVALID_UTF8 = 2,
  HG_STATUS_INVALID_ARGUMENT = 3,
  HG_STATUS_IO = 4,
  HG_STATUS_INVALID_DATA = 5,
  HG_STATUS_PANIC = 6,
} HgStatus;

typedef enum HgModelKind {
  HG_MODEL_KIND_BILSTM_SEQ2SEQ = 0,
  HG_MODEL_KIND_MASKED_LM = 1,
} HgModelKind;

/**
 * A loaded checkpoint. Opaque to C.
 */
typedef struct HgModel HgModel;

/**
 * Mean, sample standard deviation and %CV of a list of values.
 * `has_cv` is 0 when the mean is zero, in which case `cv_percent` is NaN.
 */
typedef struct HgDescriptive {
  size_t n;
  double mean;
  double sd;
  double cv_percent;
  int32_t has_cv;
} HgDescriptive;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL if the last call
 * succeeded. The pointer stays valid until the next hg_* call on the thread.
 */
const char *hg_last_error_message(void);

/**
 * Release a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from this library that has not
 * been freed yet.
 */
void hg_string_free(char *s);

/**
 * Normalize a raw review or title: lowercase, punctuation split into
 * separate tokens, single spaces.
 *
 * # Safety
 * `raw` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HgStatus hg_clean_text(const char *raw, char **out);

/**
 * Load a checkpoint file written by `hashgen train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer. On
 * success `*out` must later be released with [`hg_model_free`].
 */
enum HgStatus hg_model_load(const char *path, struct HgModel **out);

/**
 * Release a model. NULL is ignored.
 *
 * # Safety
 * `model` must be NULL or a live pointer from [`hg_model_load`].
 */
void hg_model_free(struct HgModel *model);

/**
 * # Safety
 * `model` must be a live pointer from [`hg_model_load`] and `out` valid.
 */
enum HgStatus hg_model_kind(const struct HgModel *model, enum HgModelKind *out);

/**
 * Greedy title for a raw review. The review is cleaned first. The model may
 * be shared between threads.
 *
 * # Safety
 * `model` must be a live pointer from [`hg_model_load`], `review` a
 * NUL-terminated string and `out` valid. `*out` must be released with
 * [`hg_string_free`].
 */
enum HgStatus hg_model_predict(const struct HgModel *model, const char *review, char **out);

/**
 * Sentence BLEU of a cleaned hypothesis against a cleaned reference.
 *
 * # Safety
 * `hyp` and `reference` must be NUL-terminated strings and `out` valid.
 */
enum HgStatus hg_bleu(const char *hyp, const char *reference, double *out);

/**
 * Exact-match METEOR of a cleaned hypothesis against a cleaned reference.
 *
 * # Safety
 * `hyp` and `reference` must be NUL-terminated strings and `out` valid.
 */
enum HgStatus hg_meteor(const char *hyp, const char *reference, double *out);

/**
 * # Safety
 * `values` must point to `n` doubles and `out` must be valid.
 */
enum HgStatus hg_descriptive_stats(const double *values, size_t n, struct HgDescriptive *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HASHGEN_H */
