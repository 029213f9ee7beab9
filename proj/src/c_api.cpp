#include "sameside/sameside.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <optional>
#include <sstream>
#include <string>

#include "sameside/baseline.hpp"
#include "sameside/corpus.hpp"
#include "sameside/error.hpp"
#include "sameside/eval.hpp"
#include "sameside/model.hpp"
#include "sameside/plot.hpp"
#include "sameside/random.hpp"
#include "sameside/tokenizer.hpp"
#include "sameside/training.hpp"
#include "sameside/version.hpp"
#include "util.hpp"

struct ss_corpus {
  sameside::Corpus value;
};
struct ss_vocab {
  sameside::Vocabulary value;
};
struct ss_histogram {
  sameside::LengthHistogram value;
};
struct ss_model {
  sameside::Parameters value;
};
struct ss_svm {
  sameside::LinearModel value;
};
struct ss_results {
  sameside::ResultsTable value;
};

namespace {

using namespace sameside;

thread_local std::string g_last_error;

ss_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return SS_ERR_INVALID_ARGUMENT;
    case ErrorCode::kIo: return SS_ERR_IO;
    case ErrorCode::kSchema: return SS_ERR_SCHEMA;
    case ErrorCode::kDuplicateId: return SS_ERR_DUPLICATE_ID;
    case ErrorCode::kLabel: return SS_ERR_LABEL;
    case ErrorCode::kEncode: return SS_ERR_ENCODE;
    case ErrorCode::kEmptyData: return SS_ERR_EMPTY_DATA;
    case ErrorCode::kNumeric: return SS_ERR_NUMERIC;
    case ErrorCode::kFormat: return SS_ERR_FORMAT;
    case ErrorCode::kExperiment: return SS_ERR_EXPERIMENT;
  }
  return SS_ERR_INTERNAL;
}

template <typename F>
ss_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return SS_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SS_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw Error(ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put_string(char** out, const std::string& s) {
  require(out, "out");
  *out = dup_string(s);
}

ModelConfig from_c(const ss_model_config& c) {
  ModelConfig m;
  m.num_layers = c.num_layers;
  m.hidden_size = c.hidden_size;
  m.num_heads = c.num_heads;
  m.ff_size = c.ff_size;
  m.max_positions = c.max_positions;
  m.vocab_size = c.vocab_size;
  m.preset_name = std::string(c.preset_name, strnlen(c.preset_name, sizeof c.preset_name));
  if (m.preset_name.empty()) m.preset_name = "custom";
  m.validate();
  return m;
}

void to_c(const ModelConfig& m, ss_model_config& c) {
  c.num_layers = m.num_layers;
  c.hidden_size = m.hidden_size;
  c.num_heads = m.num_heads;
  c.ff_size = m.ff_size;
  c.max_positions = m.max_positions;
  c.vocab_size = m.vocab_size;
  std::memset(c.preset_name, 0, sizeof c.preset_name);
  std::strncpy(c.preset_name, m.preset_name.c_str(), sizeof c.preset_name - 1);
}

Hyperparams from_c(const ss_hyperparams& h) {
  Hyperparams hp;
  hp.learning_rate = h.learning_rate;
  hp.beta1 = h.beta1;
  hp.beta2 = h.beta2;
  hp.epsilon = h.epsilon;
  hp.batch_size = h.batch_size;
  hp.epochs = h.epochs;
  hp.seed = h.seed;
  hp.validate();
  return hp;
}

CorpusFormat resolve_format(ss_format format, const char* path) {
  switch (format) {
    case SS_FORMAT_CSV: return CorpusFormat::kCsv;
    case SS_FORMAT_JSONL: return CorpusFormat::kJsonl;
    case SS_FORMAT_AUTO:
      if (path) return format_from_path(path);
      break;
  }
  throw Error(ErrorCode::kInvalidArgument, "a concrete corpus format is required");
}

std::string evaluate_metrics(const std::vector<bool>& predictions, const std::vector<bool>& labels) {
  return metrics(confusion(predictions, labels)).to_json();
}

}  // namespace

extern "C" {

const char* ss_version(void) { return sameside::kVersion; }
uint32_t ss_checkpoint_format_version(void) { return sameside::kCheckpointVersion; }
uint32_t ss_encoded_cache_format_version(void) { return sameside::kEncodedCacheVersion; }
const char* ss_last_error(void) { return g_last_error.c_str(); }
void ss_string_free(char* str) { std::free(str); }

const char* ss_status_name(ss_status status) {
  switch (status) {
    case SS_OK: return "ok";
    case SS_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SS_ERR_IO: return "i/o error";
    case SS_ERR_SCHEMA: return "schema error";
    case SS_ERR_DUPLICATE_ID: return "duplicate id";
    case SS_ERR_LABEL: return "label error";
    case SS_ERR_ENCODE: return "encode error";
    case SS_ERR_EMPTY_DATA: return "empty data";
    case SS_ERR_NUMERIC: return "numeric error";
    case SS_ERR_FORMAT: return "format error";
    case SS_ERR_EXPERIMENT: return "experiment failure";
    case SS_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

/* corpus */

ss_status ss_corpus_load(const char* path, ss_format format, ss_corpus** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new ss_corpus{load_corpus(path, resolve_format(format, path))};
  });
}

ss_status ss_corpus_parse(const char* data, size_t size, ss_format format, ss_corpus** out) {
  return guarded([&] {
    require(data, "data");
    require(out, "out");
    std::istringstream in(std::string(data, size));
    *out = new ss_corpus{parse_corpus(in, resolve_format(format, nullptr), "<memory>")};
  });
}

ss_status ss_corpus_save(const ss_corpus* corpus, const char* path, ss_format format) {
  return guarded([&] {
    require(corpus, "corpus");
    require(path, "path");
    save_corpus(path, corpus->value, resolve_format(format, path));
  });
}

void ss_corpus_free(ss_corpus* corpus) { delete corpus; }
size_t ss_corpus_size(const ss_corpus* corpus) { return corpus ? corpus->value.size() : 0; }
size_t ss_corpus_topic_count(const ss_corpus* corpus) { return corpus ? corpus->value.topics().size() : 0; }

ss_status ss_corpus_stats_json(const ss_corpus* corpus, char** out) {
  return guarded([&] {
    require(corpus, "corpus");
    put_string(out, class_statistics_json(class_statistics(corpus->value)));
  });
}

ss_status ss_corpus_stats_markdown(const ss_corpus* corpus, char** out) {
  return guarded([&] {
    require(corpus, "corpus");
    put_string(out, class_statistics_markdown(class_statistics(corpus->value)));
  });
}

ss_status ss_corpus_split(const ss_corpus* corpus, double fraction, uint64_t seed, ss_corpus** train,
                          ss_corpus** test) {
  return guarded([&] {
    require(corpus, "corpus");
    require(train, "train");
    require(test, "test");
    DataSplit s = split(corpus->value, fraction, seed);
    auto* tr = new ss_corpus{std::move(s.train)};
    *test = new ss_corpus{std::move(s.test)};
    *train = tr;
  });
}

ss_status ss_corpus_filter_untruncated(const ss_corpus* corpus, const ss_vocab* vocab, size_t max_seq_len,
                                       ss_corpus** out) {
  return guarded([&] {
    require(corpus, "corpus");
    require(vocab, "vocab");
    require(out, "out");
    *out = new ss_corpus{filter_untruncated(corpus->value, vocab->value, max_seq_len)};
  });
}

/* vocabulary */

ss_status ss_vocab_build(const ss_corpus* corpus, size_t max_size, size_t min_freq, ss_vocab** out) {
  return guarded([&] {
    require(corpus, "corpus");
    require(out, "out");
    *out = new ss_vocab{build_vocab(corpus->value, max_size, min_freq)};
  });
}

ss_status ss_vocab_load(const char* path, ss_vocab** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new ss_vocab{Vocabulary::load(std::string(path))};
  });
}

ss_status ss_vocab_save(const ss_vocab* vocab, const char* path) {
  return guarded([&] {
    require(vocab, "vocab");
    require(path, "path");
    vocab->value.save(std::string(path));
  });
}

size_t ss_vocab_size(const ss_vocab* vocab) { return vocab ? vocab->value.size() : 0; }
void ss_vocab_free(ss_vocab* vocab) { delete vocab; }

ss_status ss_encode_cache_write(const ss_corpus* corpus, const ss_vocab* vocab, size_t max_seq_len,
                                const char* path) {
  return guarded([&] {
    require(corpus, "corpus");
    require(vocab, "vocab");
    require(path, "path");
    const auto encoded = encode_corpus(corpus->value, vocab->value, max_seq_len);
    std::ostringstream out;
    write_encoded_cache(out, encoded, max_seq_len);
    detail::write_file(path, out.str());
  });
}

/* histograms */

ss_status ss_histogram_build(const ss_corpus* corpus, const ss_vocab* vocab, size_t bucket_width,
                             const size_t* thresholds, size_t threshold_count, ss_histogram** out) {
  return guarded([&] {
    require(corpus, "corpus");
    require(vocab, "vocab");
    require(out, "out");
    if (threshold_count) require(thresholds, "thresholds");
    std::vector<std::size_t> ts(thresholds, thresholds + threshold_count);
    *out = new ss_histogram{length_histogram(corpus->value, vocab->value, bucket_width, ts)};
  });
}

ss_status ss_histogram_parse_csv(const char* text, ss_histogram** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new ss_histogram{LengthHistogram::from_csv(text)};
  });
}

ss_status ss_histogram_fraction_leq(const ss_histogram* hist, size_t threshold, double* out) {
  return guarded([&] {
    require(hist, "hist");
    require(out, "out");
    const auto it = hist->value.fraction_leq.find(threshold);
    if (it == hist->value.fraction_leq.end()) {
      throw Error(ErrorCode::kInvalidArgument, "threshold " + std::to_string(threshold) + " was not requested");
    }
    *out = it->second;
  });
}

ss_status ss_histogram_json(const ss_histogram* hist, char** out) {
  return guarded([&] {
    require(hist, "hist");
    put_string(out, hist->value.to_json());
  });
}

ss_status ss_histogram_csv(const ss_histogram* hist, char** out) {
  return guarded([&] {
    require(hist, "hist");
    put_string(out, hist->value.to_csv());
  });
}

ss_status ss_histogram_svg(const ss_histogram* hist, size_t max_start, const char* title, char** out) {
  return guarded([&] {
    require(hist, "hist");
    PlotLabels labels{title ? title : "", "encoded pair length (tokens)", "pairs"};
    put_string(out, emit_plot({histogram_series(hist->value, max_start)}, PlotKind::kBar, labels));
  });
}

void ss_histogram_free(ss_histogram* hist) { delete hist; }

/* model */

ss_status ss_model_preset(const char* name, size_t vocab_size, ss_model_config* out) {
  return guarded([&] {
    require(name, "name");
    require(out, "out");
    to_c(preset_config(name, vocab_size), *out);
  });
}

void ss_hyperparams_default(ss_hyperparams* out) {
  if (!out) return;
  const Hyperparams hp;
  *out = ss_hyperparams{hp.learning_rate, hp.beta1, hp.beta2, hp.epsilon, hp.batch_size, hp.epochs, hp.seed};
}

ss_status ss_model_train(const ss_model_config* config, const ss_vocab* vocab, const ss_corpus* train,
                         const ss_hyperparams* hp, size_t max_seq_len, ss_model** out, char** report_json) {
  return guarded([&] {
    require(config, "config");
    require(vocab, "vocab");
    require(train, "train");
    require(hp, "hyperparams");
    require(out, "out");
    FineTuneResult result = fine_tune(from_c(*config), vocab->value, train->value, from_c(*hp), max_seq_len);
    std::string report = result.report.to_json();
    auto* model = new ss_model{std::move(result.params)};
    if (report_json) {
      try {
        *report_json = dup_string(report);
      } catch (...) {
        delete model;
        throw;
      }
    }
    *out = model;
  });
}

ss_status ss_model_init(const ss_model_config* config, uint64_t seed, ss_model** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = new ss_model{init_params(from_c(*config), seed)};
  });
}

ss_status ss_model_save(const ss_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    save_checkpoint(std::string(path), model->value);
  });
}

ss_status ss_model_load(const char* path, ss_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new ss_model{load_checkpoint(std::string(path))};
  });
}

ss_status ss_model_get_config(const ss_model* model, ss_model_config* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    to_c(model->value.config(), *out);
  });
}

void ss_model_free(ss_model* model) { delete model; }

ss_status ss_model_evaluate(const ss_model* model, const ss_vocab* vocab, const ss_corpus* test, size_t max_seq_len,
                            char** metrics_json) {
  return guarded([&] {
    require(model, "model");
    require(vocab, "vocab");
    require(test, "test");
    if (model->value.config().vocab_size != vocab->value.size()) {
      throw Error(ErrorCode::kInvalidArgument, "checkpoint vocabulary size " +
                                                   std::to_string(model->value.config().vocab_size) +
                                                   " differs from vocabulary file size " +
                                                   std::to_string(vocab->value.size()));
    }
    std::vector<bool> predictions, labels;
    for (const auto& rec : test->value.records()) {
      const EncodedPair pair = encode_pair(rec, vocab->value, max_seq_len);
      predictions.push_back(predict(model->value, std::span<const EncodedPair>(&pair, 1))[0]);
      labels.push_back(pair.label);
    }
    put_string(metrics_json, evaluate_metrics(predictions, labels));
  });
}

ss_status ss_gradient_check(const ss_model_config* config, uint64_t seed, size_t batch_size, size_t seq_len,
                            double step, double* max_relative_error) {
  return guarded([&] {
    require(config, "config");
    require(max_relative_error, "max_relative_error");
    const ModelConfig cfg = from_c(*config);
    if (cfg.num_layers > 2) throw Error(ErrorCode::kInvalidArgument, "gradient check supports at most 2 layers");
    const auto batch = random_batch(cfg, batch_size, seq_len, derive_seed(seed, 3));
    *max_relative_error = gradient_check(cfg, seed, batch, step);
  });
}

/* baseline */

ss_status ss_svm_train(const ss_corpus* train, const ss_vocab* vocab, double lambda, size_t epochs, uint64_t seed,
                       ss_svm** out) {
  return guarded([&] {
    require(train, "train");
    require(vocab, "vocab");
    require(out, "out");
    *out = new ss_svm{train_svm(train->value, BowFeaturizer(vocab->value), lambda, epochs, seed)};
  });
}

ss_status ss_svm_save(const ss_svm* svm, const char* path) {
  return guarded([&] {
    require(svm, "svm");
    require(path, "path");
    detail::write_file(path, svm->value.to_json());
  });
}

ss_status ss_svm_load(const char* path, ss_svm** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new ss_svm{LinearModel::from_json(detail::read_file(path))};
  });
}

ss_status ss_svm_evaluate(const ss_svm* svm, const ss_vocab* vocab, const ss_corpus* test, char** metrics_json) {
  return guarded([&] {
    require(svm, "svm");
    require(vocab, "vocab");
    require(test, "test");
    const BowFeaturizer featurizer(vocab->value);
    if (svm->value.weights.size() != featurizer.feature_dim()) {
      throw Error(ErrorCode::kInvalidArgument, "svm feature dimension does not match the vocabulary");
    }
    std::vector<bool> predictions, labels;
    for (const auto& rec : test->value.records()) {
      predictions.push_back(predict_svm(svm->value, rec, featurizer));
      labels.push_back(rec.is_same_stance);
    }
    put_string(metrics_json, evaluate_metrics(predictions, labels));
  });
}

void ss_svm_free(ss_svm* svm) { delete svm; }

/* experiments */

void ss_experiment_options_default(ss_experiment_options* out) {
  if (!out) return;
  *out = ss_experiment_options{};
  ss_hyperparams_default(&out->hyperparams);
  out->svm_lambda = kDefaultSvmLambda;
  out->svm_epochs = kDefaultSvmEpochs;
  out->jobs = 1;
}

ss_status ss_run_matrix(const ss_corpus* train, const ss_corpus* test, const ss_vocab* vocab, const char* split_mode,
                        const char* const* model_kinds, size_t model_count, const size_t* lengths, size_t length_count,
                        int trunc_train, int trunc_test, uint64_t seed, const ss_experiment_options* options,
                        ss_results** out) {
  bool any_failed = false;
  std::string first_error;
  const ss_status status = guarded([&] {
    require(train, "train");
    require(test, "test");
    require(vocab, "vocab");
    require(split_mode, "split_mode");
    require(out, "out");
    if (model_count == 0) throw Error(ErrorCode::kInvalidArgument, "no model kinds given");
    if (length_count == 0) throw Error(ErrorCode::kInvalidArgument, "no sequence lengths given");
    require(model_kinds, "model_kinds");
    require(lengths, "lengths");

    ExperimentOptions opts;
    if (options) {
      opts.hyperparams = from_c(options->hyperparams);
      opts.svm_lambda = options->svm_lambda;
      opts.svm_epochs = options->svm_epochs;
      opts.jobs = options->jobs;
      if (options->num_layers || options->hidden_size || options->num_heads || options->ff_size) {
        opts.architecture = ArchitectureOverride{options->num_layers, options->hidden_size, options->num_heads,
                                                 options->ff_size};
      }
    }
    const SplitMode mode = parse_split_mode(split_mode);
    std::vector<ExperimentSpec> specs;
    for (size_t m = 0; m < model_count; ++m) {
      require(model_kinds[m], "model kind");
      const std::string kind = model_kinds[m];
      if (kind != kSvmModelKind) preset_config(kind, vocab->value.size());  // validates the name
      for (size_t l = 0; l < length_count; ++l) {
        if (lengths[l] < kMinSequenceLength || lengths[l] > kMaxSequenceLength) {
          throw Error(ErrorCode::kInvalidArgument,
                      "sequence length " + std::to_string(lengths[l]) + " outside [8, 512]");
        }
        if (kind == kSvmModelKind && l > 0) continue;  // length does not apply
        ExperimentSpec s;
        s.split_mode = mode;
        s.model_kind = kind;
        s.max_seq_len = lengths[l];
        s.trunc_train = trunc_train != 0;
        s.trunc_test = trunc_test != 0;
        s.seed = seed;
        specs.push_back(s);
      }
    }
    const DataSplit data{train->value, test->value, 0.0, seed};
    ResultsTable table = run_matrix(specs, data, vocab->value, opts);
    for (const auto& row : table.rows) {
      if (row.failed && !any_failed) {
        any_failed = true;
        first_error = row.spec.describe() + ": " + row.error;
      }
    }
    *out = new ss_results{std::move(table)};
  });
  if (status == SS_OK && any_failed) {
    g_last_error = first_error;
    return SS_ERR_EXPERIMENT;
  }
  return status;
}

size_t ss_results_row_count(const ss_results* results) { return results ? results->value.rows.size() : 0; }

ss_status ss_results_row(const ss_results* results, size_t index, ss_result_row* out) {
  return guarded([&] {
    require(results, "results");
    require(out, "out");
    if (index >= results->value.rows.size()) throw Error(ErrorCode::kInvalidArgument, "row index out of range");
    const ResultsRow& r = results->value.rows[index];
    *out = ss_result_row{r.spec.model_kind.c_str(),
                         r.spec.max_seq_len,
                         r.spec.trunc_train ? 0 : 1,
                         r.spec.trunc_test ? 0 : 1,
                         r.num_train,
                         r.num_test,
                         r.metrics.accuracy,
                         r.metrics.precision,
                         r.metrics.recall,
                         r.metrics.f1,
                         r.runtime_seconds,
                         r.failed ? 1 : 0};
  });
}

ss_status ss_results_emit(const ss_results* results, ss_table_format format, char** out) {
  return guarded([&] {
    require(results, "results");
    TableFormat f;
    switch (format) {
      case SS_TABLE_MARKDOWN: f = TableFormat::kMarkdown; break;
      case SS_TABLE_CSV: f = TableFormat::kCsv; break;
      case SS_TABLE_JSON: f = TableFormat::kJson; break;
      default: throw Error(ErrorCode::kInvalidArgument, "unknown table format");
    }
    put_string(out, emit_results_table(results->value, f));
  });
}

ss_status ss_results_parse_csv(const char* text, ss_results** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new ss_results{parse_results_csv(text)};
  });
}

ss_status ss_results_svg(const ss_results* results, const char* title, char** out) {
  return guarded([&] {
    require(results, "results");
    PlotLabels labels{title ? title : "", "maximum sequence length (tokens)", "accuracy"};
    put_string(out, emit_plot(accuracy_series(results->value), PlotKind::kLine, labels));
  });
}

void ss_results_free(ss_results* results) { delete results; }

}  // extern "C"
