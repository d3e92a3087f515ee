/* C ABI for the pragrank reranking engine. Generated by cbindgen; do not edit. */

#ifndef PRAGRANK_H
#define PRAGRANK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum PrStatus {
  PrOk = 0,
  /**
   * A required pointer was NULL or an argument was structurally invalid.
   */
  PrErrInvalidArgument = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  PrErrUtf8 = 2,
  /**
   * lambda or alpha outside [0, 1].
   */
  PrErrOutOfRange = 3,
  /**
   * A candidate was missing a log-score required by the rule.
   */
  PrErrMissingScore = 4,
  /**
   * The pool had no candidates.
   */
  PrErrEmptyPool = 5,
  /**
   * The backend rejected the request (bad corpus, empty continuation,
   * unsupported decoding).
   */
  PrErrBackend = 6,
  /**
   * An internal panic was caught at the boundary.
   */
  PrErrInternal = 7,
} PrStatus;

/**
 * ROUGE variant selector for [`pr_rouge_f1`].
 */
typedef enum PrRougeVariant {
  PrRouge1 = 1,
  PrRouge2 = 2,
  PrRougeL = 3,
} PrRougeVariant;

/**
 * Opaque candidate pool handle.
 */
typedef struct PrPool PrPool;

/**
 * Opaque toy language model handle.
 */
typedef struct PrToyLm PrToyLm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *pr_version(void);

/**
 * Release a string allocated by this library. NULL is a no-op.
 *
 * # Safety
 * `s` must have been returned by a pragrank function and not yet freed.
 */
void pr_string_free(char *s);

/**
 * (1 − λ)·logp_s0 + λ·logp_answer, with 0·(−∞) = 0 at the endpoints.
 */
enum PrStatus pr_combine_answer_rec(double logp_s0, double logp_answer, double lambda, double *out);

/**
 * (1 − λ)·logp_s0 + λ·logp_source.
 */
enum PrStatus pr_combine_source_rec(double logp_s0, double logp_source, double lambda, double *out);

/**
 * (1 − λ)·logp_s0 + λ·((1 − α)·logp_answer + α·logp_source).
 */
enum PrStatus pr_combine_ans_src(double logp_s0,
                                 double logp_answer,
                                 double logp_source,
                                 double lambda,
                                 double alpha,
                                 double *out);

/**
 * F1 of the requested ROUGE variant between two texts.
 *
 * # Safety
 * `candidate` and `reference` must be NUL-terminated strings.
 */
enum PrStatus pr_rouge_f1(const char *candidate,
                          const char *reference,
                          enum PrRougeVariant variant,
                          double *out);

/**
 * METEOR-lite score between two texts.
 *
 * # Safety
 * `candidate` and `reference` must be NUL-terminated strings.
 */
enum PrStatus pr_meteor_lite(const char *candidate, const char *reference, double *out);

/**
 * Allocate an empty pool. Free with [`pr_pool_free`].
 */
enum PrStatus pr_pool_new(struct PrPool **out);

/**
 * # Safety
 * `pool` must come from [`pr_pool_new`] and not be freed twice.
 */
void pr_pool_free(struct PrPool *pool);

/**
 * Append a candidate. Optional log-scores are passed as nullable
 * pointers; use `-INFINITY` for impossible continuations.
 *
 * # Safety
 * `pool` must be a live handle; score pointers, when non-NULL, must
 * point to readable doubles.
 */
enum PrStatus pr_pool_push(struct PrPool *pool,
                           const char *text,
                           const double *logp_s0,
                           const double *logp_answer_rec,
                           const double *logp_source_rec,
                           const double *logp_latent_rec);

/**
 * Number of candidates currently in the pool.
 *
 * # Safety
 * `pool` must be a live handle.
 */
enum PrStatus pr_pool_len(const struct PrPool *pool, uintptr_t *out);

/**
 * Index of the answer-reconstruction winner at the given lambda.
 *
 * # Safety
 * `pool` must be a live handle.
 */
enum PrStatus pr_select_answer_rec(const struct PrPool *pool, double lambda, uintptr_t *out_index);

/**
 * Index of the source-reconstruction winner at the given lambda.
 *
 * # Safety
 * `pool` must be a live handle.
 */
enum PrStatus pr_select_source_rec(const struct PrPool *pool, double lambda, uintptr_t *out_index);

/**
 * Index of the hybrid answer/source winner at (lambda, alpha).
 *
 * # Safety
 * `pool` must be a live handle.
 */
enum PrStatus pr_select_ans_src(const struct PrPool *pool,
                                double lambda,
                                double alpha,
                                uintptr_t *out_index);

/**
 * Index of the latent-reconstruction winner at the given lambda.
 *
 * # Safety
 * `pool` must be a live handle.
 */
enum PrStatus pr_select_latent_rec(const struct PrPool *pool, double lambda, uintptr_t *out_index);

/**
 * Uniform random selection keyed by (seed, instance id); stable across
 * processes and platforms.
 *
 * # Safety
 * `pool` must be a live handle; `instance_id` must be a NUL-terminated
 * string.
 */
enum PrStatus pr_select_random(const struct PrPool *pool,
                               uint64_t seed,
                               const char *instance_id,
                               uintptr_t *out_index);

/**
 * Build a toy bigram model from an ASCII corpus. Pass NULL to use the
 * embedded default corpus. Free with [`pr_toy_lm_free`].
 *
 * # Safety
 * `corpus`, when non-NULL, must be a NUL-terminated string.
 */
enum PrStatus pr_toy_lm_new(const char *corpus, struct PrToyLm **out);

/**
 * # Safety
 * `lm` must come from [`pr_toy_lm_new`] and not be freed twice.
 */
void pr_toy_lm_free(struct PrToyLm *lm);

/**
 * Natural-log P(continuation | prompt). Impossible continuations yield
 * -INFINITY with PrOk.
 *
 * # Safety
 * `lm` must be a live handle; strings must be NUL-terminated.
 */
enum PrStatus pr_toy_lm_score(const struct PrToyLm *lm,
                              const char *prompt,
                              const char *continuation,
                              double *out_logprob);

/**
 * Greedy continuation of `prompt`, `max_new_tokens` characters long.
 * The text is written to `out_text` (free with [`pr_string_free`]) and
 * its raw log-likelihood to `out_logprob`.
 *
 * # Safety
 * `lm` must be a live handle; `prompt` must be NUL-terminated.
 */
enum PrStatus pr_toy_lm_greedy(const struct PrToyLm *lm,
                               const char *prompt,
                               uintptr_t max_new_tokens,
                               char **out_text,
                               double *out_logprob);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRAGRANK_H */
