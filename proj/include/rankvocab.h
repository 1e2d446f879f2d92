/* rankvocab — C API for the WordRank vocabulary-selection and TextCNN
 * training library. All functions are thread-compatible: distinct handles
 * may be used from distinct threads, a single handle must not be shared
 * without external synchronization. Strings returned by the library stay
 * valid until the owning handle is freed (or, for rv_last_error, until the
 * next failing call on the same thread). */
#ifndef RANKVOCAB_H
#define RANKVOCAB_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define RV_API __declspec(dllexport)
#else
#define RV_API __attribute__((visibility("default")))
#endif

typedef enum rv_status {
  RV_OK = 0,
  RV_ERR_INVALID = 1,     /* bad argument or configuration */
  RV_ERR_IO = 2,          /* file missing or unreadable/unwritable */
  RV_ERR_PARSE = 3,       /* malformed input file or config text */
  RV_ERR_NO_CONVERGE = 4, /* iterative solve hit its iteration cap */
  RV_ERR_INTERNAL = 5     /* unexpected failure; see rv_last_error() */
} rv_status;

/* Semantic library version, "major.minor.patch". */
RV_API const char* rv_version(void);

/* Message for the most recent failure on the calling thread ("" if none). */
RV_API const char* rv_last_error(void);

/* 64-bit FNV-1a digest of a file's bytes as 16 lowercase hex chars + NUL. */
RV_API rv_status rv_file_digest(const char* path, char out_hex[17]);

/* ---- embedding tables -------------------------------------------------- */

typedef struct rv_embeddings rv_embeddings;

/* Loads whitespace "word v1 .. v_dim" lines; a leading `count dim` integer
 * header is skipped; duplicate words keep the first occurrence. */
RV_API rv_status rv_embeddings_load(const char* path, int32_t dim, rv_embeddings** out);
RV_API void rv_embeddings_free(rv_embeddings* e);
RV_API int64_t rv_embeddings_size(const rv_embeddings* e);
RV_API int32_t rv_embeddings_dim(const rv_embeddings* e);
RV_API int rv_embeddings_contains(const rv_embeddings* e, const char* word);
/* metric: "cosine" (negatives clipped to 0) or "wmd" (1/(1+L2 distance)). */
RV_API rv_status rv_embeddings_similarity(const rv_embeddings* e, const char* word_a,
                                          const char* word_b, const char* metric, double* out);

/* ---- word lists --------------------------------------------------------- */

typedef struct rv_words rv_words;

/* Reads the first tab-separated field of every non-empty line. */
RV_API rv_status rv_words_load(const char* path, rv_words** out);
RV_API void rv_words_free(rv_words* w);
RV_API int64_t rv_words_count(const rv_words* w);
/* NULL when out of range; otherwise valid until rv_words_free. */
RV_API const char* rv_words_get(const rv_words* w, int64_t i);
RV_API rv_status rv_words_save(const rv_words* w, const char* path);

/* ---- similarity graph and PageRank -------------------------------------- */

typedef struct rv_graph rv_graph;

/* Directed k-nearest-neighbor graph over the candidates present in the
 * embedding table; absent candidates are dropped (count via
 * rv_graph_num_dropped). symmetrize != 0 adds reverse edges. jobs <= 0 uses
 * one worker per core; results are identical for any worker count. */
RV_API rv_status rv_graph_build(const rv_words* candidates, const rv_embeddings* table,
                                const char* metric, int64_t k, int symmetrize, int jobs,
                                rv_graph** out);
RV_API void rv_graph_free(rv_graph* g);
RV_API int64_t rv_graph_num_nodes(const rv_graph* g);
RV_API int64_t rv_graph_num_edges(const rv_graph* g);
RV_API int64_t rv_graph_num_dropped(const rv_graph* g);
/* Writes `src<TAB>dst<TAB>weight` lines. */
RV_API rv_status rv_graph_save(const rv_graph* g, const char* path);

typedef struct rv_ranks rv_ranks;

/* Power iteration r <- (1-d)/n + d*M*r to L1 tolerance `tol`, at most
 * `max_iter` sweeps. Never fails on non-convergence: query
 * rv_ranks_converged. */
RV_API rv_status rv_pagerank(const rv_graph* g, double damping, double tol, int64_t max_iter,
                             rv_ranks** out);
/* Dense linear-solve oracle; requires <= 500 nodes and damping < 1. */
RV_API rv_status rv_pagerank_exact(const rv_graph* g, double damping, rv_ranks** out);
RV_API void rv_ranks_free(rv_ranks* r);
RV_API int rv_ranks_converged(const rv_ranks* r);
RV_API int64_t rv_ranks_iterations(const rv_ranks* r);
/* Score of graph node i (node order = candidate order after drops). */
RV_API rv_status rv_ranks_score(const rv_ranks* r, int64_t i, double* out);
/* Writes `word<TAB>score<TAB>rank` lines, descending score. */
RV_API rv_status rv_ranks_save(const rv_ranks* r, const char* path);

/* ---- pipeline operations ------------------------------------------------ */

/* Ingests a raw corpus ("jsonl" file or "dirs" tree), tokenizes, lemmatizes,
 * filters stopwords (NULL path = built-in English list), keeps candidates
 * with train-split count >= min_count, and writes a processed corpus
 * directory (corpus.jsonl, token_stats.tsv, candidates.tsv). When
 * out_counts is non-NULL it receives {num docs, num train docs,
 * num candidates}. */
RV_API rv_status rv_prep(const char* corpus_path, const char* format,
                         const char* stopwords_path_or_null, int64_t min_count,
                         const char* out_dir, int64_t out_counts[3]);

/* Top-k lines of a rank file (word score rank) into a word-list file. */
RV_API rv_status rv_select_ranked(const char* ranks_path, int64_t k, const char* out_path);
/* Top-k words of a token-stats TSV by count (desc, lexicographic ties). */
RV_API rv_status rv_select_frequent(const char* stats_path, int64_t k, const char* out_path);

/* Trains the model named by the config's `model` key (textcnn | bow |
 * bigram | avgemb) on a processed corpus directory, writing
 * out_dir/report.tsv, out_dir/report.txt and out_dir/checkpoint/.
 * embeddings_path may be NULL: model embeddings are then seeded randomly
 * (required non-NULL only for avgemb-with-pretrained semantics you want).
 * config_text is key=value lines; unknown keys are errors. */
RV_API rv_status rv_train(const char* corpus_dir, const char* vocab_path,
                          const char* embeddings_path_or_null, const char* config_text,
                          const char* out_dir);

/* Frequency-vs-WordRank comparison grid over the comma-separated K list.
 * Writes out_dir/comparison.tsv plus one <method>_<K>/ cell directory each
 * holding vocab.txt and the cell's training report. */
RV_API rv_status rv_compare(const char* corpus_dir, const char* embeddings_path,
                            const char* ks_csv, const char* config_text, int jobs,
                            const char* out_dir);

/* Central-difference gradient check of the full model loss (attention +
 * frozen dropout) at the given seed. Writes the max relative error; the
 * caller applies its own tolerance. */
RV_API rv_status rv_grad_check_model(uint64_t seed, double eps, double* out_max_rel_err);

/* Parses config text, applies defaults, and writes the canonical full
 * key=value rendering (every key materialized, sorted) into buf. Sets
 * *out_needed to the required byte count including the terminator; fails
 * with RV_ERR_INVALID when buf_len is too small. */
RV_API rv_status rv_resolve_config(const char* config_text, char* buf, int64_t buf_len,
                                   int64_t* out_needed);

/* Parameter counts for the configured TextCNN at the given vocabulary and
 * class counts: {embedding, conv, attention, classifier, total}. */
RV_API rv_status rv_count_params(const char* config_text, int64_t vocab_size,
                                 int64_t num_classes, int64_t out_counts[5]);

#ifdef __cplusplus
}
#endif

#endif /* RANKVOCAB_H */
