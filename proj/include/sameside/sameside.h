/*
 * C interface to the same-side stance classification toolkit.
 *
 * Objects are opaque handles created by ss_*_load/build/train functions and
 * released with the matching ss_*_free. Every fallible call returns an
 * ss_status; on failure ss_last_error() describes the problem (thread-local,
 * valid until the next call on the same thread). Strings returned through
 * char** out-parameters are owned by the caller and released with
 * ss_string_free.
 */
#ifndef SAMESIDE_SAMESIDE_H_
#define SAMESIDE_SAMESIDE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SS_API __declspec(dllexport)
#else
#define SS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ss_status {
  SS_OK = 0,
  SS_ERR_INVALID_ARGUMENT = 1,
  SS_ERR_IO = 2,
  SS_ERR_SCHEMA = 3,
  SS_ERR_DUPLICATE_ID = 4,
  SS_ERR_LABEL = 5,
  SS_ERR_ENCODE = 6,
  SS_ERR_EMPTY_DATA = 7,
  SS_ERR_NUMERIC = 8,
  SS_ERR_FORMAT = 9,
  SS_ERR_EXPERIMENT = 10,
  SS_ERR_INTERNAL = 99
} ss_status;

typedef enum ss_format { SS_FORMAT_AUTO = 0, SS_FORMAT_CSV = 1, SS_FORMAT_JSONL = 2 } ss_format;

typedef enum ss_table_format { SS_TABLE_MARKDOWN = 0, SS_TABLE_CSV = 1, SS_TABLE_JSON = 2 } ss_table_format;

typedef struct ss_corpus ss_corpus;
typedef struct ss_vocab ss_vocab;
typedef struct ss_histogram ss_histogram;
typedef struct ss_model ss_model;
typedef struct ss_svm ss_svm;
typedef struct ss_results ss_results;

SS_API const char* ss_version(void);
SS_API uint32_t ss_checkpoint_format_version(void);
SS_API uint32_t ss_encoded_cache_format_version(void);
SS_API const char* ss_last_error(void);
SS_API const char* ss_status_name(ss_status status);
SS_API void ss_string_free(char* str);

/* ---- corpus ---------------------------------------------------------- */

/* SS_FORMAT_AUTO picks jsonl for .jsonl/.json paths and csv otherwise. */
SS_API ss_status ss_corpus_load(const char* path, ss_format format, ss_corpus** out);
SS_API ss_status ss_corpus_parse(const char* data, size_t size, ss_format format, ss_corpus** out);
SS_API ss_status ss_corpus_save(const ss_corpus* corpus, const char* path, ss_format format);
SS_API void ss_corpus_free(ss_corpus* corpus);
SS_API size_t ss_corpus_size(const ss_corpus* corpus);
SS_API size_t ss_corpus_topic_count(const ss_corpus* corpus);
SS_API ss_status ss_corpus_stats_json(const ss_corpus* corpus, char** out);
SS_API ss_status ss_corpus_stats_markdown(const ss_corpus* corpus, char** out);
SS_API ss_status ss_corpus_split(const ss_corpus* corpus, double fraction, uint64_t seed, ss_corpus** train,
                                 ss_corpus** test);
SS_API ss_status ss_corpus_filter_untruncated(const ss_corpus* corpus, const ss_vocab* vocab, size_t max_seq_len,
                                              ss_corpus** out);

/* ---- vocabulary and encoding ----------------------------------------- */

SS_API ss_status ss_vocab_build(const ss_corpus* corpus, size_t max_size, size_t min_freq, ss_vocab** out);
SS_API ss_status ss_vocab_load(const char* path, ss_vocab** out);
SS_API ss_status ss_vocab_save(const ss_vocab* vocab, const char* path);
SS_API size_t ss_vocab_size(const ss_vocab* vocab);
SS_API void ss_vocab_free(ss_vocab* vocab);
SS_API ss_status ss_encode_cache_write(const ss_corpus* corpus, const ss_vocab* vocab, size_t max_seq_len,
                                       const char* path);

/* ---- length histograms ----------------------------------------------- */

SS_API ss_status ss_histogram_build(const ss_corpus* corpus, const ss_vocab* vocab, size_t bucket_width,
                                    const size_t* thresholds, size_t threshold_count, ss_histogram** out);
/* Parses bucket_start,count csv as written by ss_histogram_csv. */
SS_API ss_status ss_histogram_parse_csv(const char* text, ss_histogram** out);
SS_API ss_status ss_histogram_fraction_leq(const ss_histogram* hist, size_t threshold, double* out);
SS_API ss_status ss_histogram_json(const ss_histogram* hist, char** out);
SS_API ss_status ss_histogram_csv(const ss_histogram* hist, char** out);
/* Bar chart; buckets starting at or beyond max_start are omitted unless it is 0. */
SS_API ss_status ss_histogram_svg(const ss_histogram* hist, size_t max_start, const char* title, char** out);
SS_API void ss_histogram_free(ss_histogram* hist);

/* ---- transformer encoder --------------------------------------------- */

typedef struct ss_model_config {
  size_t num_layers;
  size_t hidden_size;
  size_t num_heads;
  size_t ff_size;
  size_t max_positions;
  size_t vocab_size;
  char preset_name[32];
} ss_model_config;

typedef struct ss_hyperparams {
  double learning_rate;
  double beta1;
  double beta2;
  double epsilon;
  size_t batch_size;
  size_t epochs;
  uint64_t seed;
} ss_hyperparams;

/* name: "base-mini" or "large-mini". */
SS_API ss_status ss_model_preset(const char* name, size_t vocab_size, ss_model_config* out);
SS_API void ss_hyperparams_default(ss_hyperparams* out);

/* report_json may be NULL. */
SS_API ss_status ss_model_train(const ss_model_config* config, const ss_vocab* vocab, const ss_corpus* train,
                                const ss_hyperparams* hp, size_t max_seq_len, ss_model** out, char** report_json);
SS_API ss_status ss_model_init(const ss_model_config* config, uint64_t seed, ss_model** out);
SS_API ss_status ss_model_save(const ss_model* model, const char* path);
SS_API ss_status ss_model_load(const char* path, ss_model** out);
SS_API ss_status ss_model_get_config(const ss_model* model, ss_model_config* out);
SS_API void ss_model_free(ss_model* model);
SS_API ss_status ss_model_evaluate(const ss_model* model, const ss_vocab* vocab, const ss_corpus* test,
                                   size_t max_seq_len, char** metrics_json);
/* Finite-difference check on a random batch; writes the max relative error. */
SS_API ss_status ss_gradient_check(const ss_model_config* config, uint64_t seed, size_t batch_size, size_t seq_len,
                                   double step, double* max_relative_error);

/* ---- linear baseline ------------------------------------------------- */

SS_API ss_status ss_svm_train(const ss_corpus* train, const ss_vocab* vocab, double lambda, size_t epochs,
                              uint64_t seed, ss_svm** out);
SS_API ss_status ss_svm_save(const ss_svm* svm, const char* path);
SS_API ss_status ss_svm_load(const char* path, ss_svm** out);
SS_API ss_status ss_svm_evaluate(const ss_svm* svm, const ss_vocab* vocab, const ss_corpus* test,
                                 char** metrics_json);
SS_API void ss_svm_free(ss_svm* svm);

/* ---- experiment matrix ----------------------------------------------- */

typedef struct ss_experiment_options {
  ss_hyperparams hyperparams;
  double svm_lambda;
  size_t svm_epochs;
  /* Architecture overrides applied to every preset; 0 keeps the preset value. */
  size_t num_layers;
  size_t hidden_size;
  size_t num_heads;
  size_t ff_size;
  size_t jobs;
} ss_experiment_options;

SS_API void ss_experiment_options_default(ss_experiment_options* out);

/*
 * Runs one cell per (model kind, length), ordered by model then length;
 * "svm" gets a single cell since sequence length does not apply to it.
 * model kinds are preset names or "svm". trunc_* = 0 drops pairs that would
 * be truncated. Returns SS_ERR_EXPERIMENT when any cell failed; *out still
 * receives every row, failed ones marked.
 */
SS_API ss_status ss_run_matrix(const ss_corpus* train, const ss_corpus* test, const ss_vocab* vocab,
                               const char* split_mode, const char* const* model_kinds, size_t model_count,
                               const size_t* lengths, size_t length_count, int trunc_train, int trunc_test,
                               uint64_t seed, const ss_experiment_options* options, ss_results** out);

typedef struct ss_result_row {
  const char* model_kind; /* valid while the table lives */
  size_t max_seq_len;
  int no_trunc_train;
  int no_trunc_test;
  size_t num_train;
  size_t num_test;
  double accuracy;
  double precision;
  double recall;
  double f1;
  double runtime_seconds;
  int failed;
} ss_result_row;

SS_API size_t ss_results_row_count(const ss_results* results);
SS_API ss_status ss_results_row(const ss_results* results, size_t index, ss_result_row* out);
SS_API ss_status ss_results_emit(const ss_results* results, ss_table_format format, char** out);
SS_API ss_status ss_results_parse_csv(const char* text, ss_results** out);
/* Accuracy against max sequence length, one line per model kind. */
SS_API ss_status ss_results_svg(const ss_results* results, const char* title, char** out);
SS_API void ss_results_free(ss_results* results);

#ifdef __cplusplus
}
#endif

#endif /* SAMESIDE_SAMESIDE_H_ */
