#ifndef AID_H
#define AID_H

/* Generated by cbindgen from crates/ffi/src; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. Error codes 2, 3 and 4 match the CLI exit codes.
 */
typedef enum AidStatus {
  AID_STATUS_OK = 0,
  /**
   * Invalid configuration or arguments.
   */
  AID_STATUS_CONFIG_ERROR = 2,
  /**
   * Malformed, missing or inconsistent data.
   */
  AID_STATUS_DATA_ERROR = 3,
  /**
   * Non-finite values or a diverged computation.
   */
  AID_STATUS_NUMERIC_ERROR = 4,
  /**
   * A required pointer was null.
   */
  AID_STATUS_NULL_POINTER = 10,
  /**
   * A string argument was not valid UTF-8.
   */
  AID_STATUS_INVALID_UTF8 = 11,
  /**
   * An internal panic was caught at the boundary.
   */
  AID_STATUS_PANIC = 12,
} AidStatus;

/**
 * Frame matching metric for [`aid_knn_convert`].
 */
typedef enum AidDistance {
  AID_DISTANCE_COSINE = 0,
  AID_DISTANCE_EUCLIDEAN = 1,
} AidDistance;

/**
 * Opaque trained-classifier handle (model plus its label index).
 */
typedef struct AidClassifier AidClassifier;

/**
 * Opaque corpus handle.
 */
typedef struct AidCorpus AidCorpus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread ("" after a success).
 *
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *aid_last_error(void);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void aid_string_free(char *s);

/**
 * Generate a synthetic corpus from generator TOML (null or "" for defaults).
 *
 * # Safety
 * `config_toml` must be null or a NUL-terminated string; `out` must be writable.
 */
enum AidStatus aid_corpus_generate(const char *config_toml, struct AidCorpus **out);

/**
 * Read a corpus directory (manifest, feature store, optional factor table).
 *
 * # Safety
 * `dir` must be a NUL-terminated string; `out` must be writable.
 */
enum AidStatus aid_corpus_read(const char *dir, struct AidCorpus **out);

/**
 * Write a corpus directory.
 *
 * # Safety
 * `corpus` must be a live handle; `dir` a NUL-terminated string.
 */
enum AidStatus aid_corpus_write(const struct AidCorpus *corpus, const char *dir);

/**
 * Number of utterances (0 for null).
 *
 * # Safety
 * `corpus` must be null or a live handle.
 */
size_t aid_corpus_len(const struct AidCorpus *corpus);

/**
 * Feature dimension (0 for null or empty).
 *
 * # Safety
 * `corpus` must be null or a live handle.
 */
size_t aid_corpus_dim(const struct AidCorpus *corpus);

/**
 * Number of accent classes (0 for null).
 *
 * # Safety
 * `corpus` must be null or a live handle.
 */
size_t aid_corpus_n_accents(const struct AidCorpus *corpus);

/**
 * Release a corpus handle. Null is ignored.
 *
 * # Safety
 * `corpus` must be null or a handle not freed before.
 */
void aid_corpus_free(struct AidCorpus *corpus);

/**
 * Load a classifier checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum AidStatus aid_classifier_load(const char *path, struct AidClassifier **out);

/**
 * Release a classifier handle. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle not freed before.
 */
void aid_classifier_free(struct AidClassifier *model);

/**
 * Input dimension expected by the classifier (0 for null).
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t aid_classifier_input_dim(const struct AidClassifier *model);

/**
 * Length of the accent embedding (0 for null).
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t aid_classifier_embedding_dim(const struct AidClassifier *model);

/**
 * Number of accent classes (0 for null).
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t aid_classifier_n_accents(const struct AidClassifier *model);

/**
 * Accent label of class `id`, as a new string.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum AidStatus aid_classifier_accent_label(const struct AidClassifier *model,
                                           size_t id,
                                           char **out);

/**
 * Predict accent class ids for `rows` row-major utterance vectors of length `dim`.
 *
 * # Safety
 * `x` must hold `rows * dim` doubles and `out_labels` room for `rows` entries.
 */
enum AidStatus aid_classifier_predict(const struct AidClassifier *model,
                                      const double *x,
                                      size_t rows,
                                      size_t dim,
                                      size_t *out_labels);

/**
 * Accent embedding of one utterance vector; writes `embedding_dim` doubles.
 *
 * # Safety
 * `x` must hold `dim` doubles and `out` room for `out_len` doubles.
 */
enum AidStatus aid_classifier_accent_embedding(const struct AidClassifier *model,
                                               const double *x,
                                               size_t dim,
                                               double *out,
                                               size_t out_len);

/**
 * Cosine similarity of two vectors of length `dim`.
 *
 * # Safety
 * `a` and `b` must hold `dim` doubles; `out` must be writable.
 */
enum AidStatus aid_cosine_similarity(const double *a, const double *b, size_t dim, double *out);

/**
 * KL divergence of a probability vector from the uniform distribution.
 *
 * # Safety
 * `p` must hold `n` doubles; `out` must be writable.
 */
enum AidStatus aid_kl_to_uniform(const double *p, size_t n, double *out);

/**
 * kNN conversion of `t` source frames against an `n`-row pool; writes `t * dim` doubles.
 *
 * # Safety
 * `source` must hold `t * dim` doubles, `pool` `n * dim`, and `out` room for `t * dim`.
 */
enum AidStatus aid_knn_convert(const double *source,
                               size_t t,
                               const double *pool,
                               size_t n,
                               size_t dim,
                               size_t k,
                               enum AidDistance distance,
                               double *out);

/**
 * Run an experiment described by TOML; `out_json` receives the run record as JSON.
 *
 * # Safety
 * `spec_toml` must be a NUL-terminated string; `out_json` must be writable.
 */
enum AidStatus aid_run_experiment(const char *spec_toml, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AID_H */
