#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sameside/baseline.hpp"
#include "sameside/corpus.hpp"
#include "sameside/model.hpp"
#include "sameside/tokenizer.hpp"
#include "sameside/training.hpp"

namespace sameside {

// Positive class is same-side (true).
struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(const std::vector<bool>& predictions, const std::vector<bool>& labels);

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ConfusionMatrix counts;
  // Set when a 0/0 ratio was replaced by 0.
  bool undefined_ratio = false;

  std::string to_json() const;
};

MetricsReport metrics(const ConfusionMatrix& cm);

enum class SplitMode { kWithin, kCross };
const char* split_mode_name(SplitMode mode);
SplitMode parse_split_mode(const std::string& name);

inline constexpr const char* kSvmModelKind = "svm";

struct ExperimentSpec {
  SplitMode split_mode = SplitMode::kWithin;
  std::string model_kind = "base-mini";  // a model preset or "svm"
  std::size_t max_seq_len = 512;
  bool trunc_train = true;  // false: drop training pairs that would be truncated
  bool trunc_test = true;
  std::uint64_t seed = 42;

  bool is_svm() const { return model_kind == kSvmModelKind; }
  std::string describe() const;
};

inline const std::vector<std::size_t>& default_sweep_lengths() {
  static const std::vector<std::size_t> lengths = {32, 64, 128, 256, 512};
  return lengths;
}

struct ResultsRow {
  ExperimentSpec spec;
  std::size_t num_train = 0;
  std::size_t num_test = 0;
  MetricsReport metrics;
  double runtime_seconds = 0.0;
  bool failed = false;
  std::string error;
};

struct ResultsTable {
  std::vector<ResultsRow> rows;
};

// Optional architecture override applied on top of a preset; the preset name
// is kept so rows stay labeled by model kind.
struct ArchitectureOverride {
  std::size_t num_layers = 0;
  std::size_t hidden_size = 0;
  std::size_t num_heads = 0;
  std::size_t ff_size = 0;
};

struct ExperimentOptions {
  Hyperparams hyperparams;
  double svm_lambda = kDefaultSvmLambda;
  std::size_t svm_epochs = kDefaultSvmEpochs;
  std::optional<ArchitectureOverride> architecture;
  std::size_t jobs = 1;
};

ModelConfig experiment_model_config(const std::string& model_kind, std::size_t vocab_size,
                                    const ExperimentOptions& options);

// Filters train/test per the truncation flags, trains, evaluates on test.
ResultsRow run_experiment(const ExperimentSpec& spec, const DataSplit& data, const Vocabulary& vocab,
                          const ExperimentOptions& options = {});

// Runs every cell (up to options.jobs in parallel); failed cells become rows
// with failed = true. Rows are returned in `specs` order.
ResultsTable run_matrix(const std::vector<ExperimentSpec>& specs, const DataSplit& data, const Vocabulary& vocab,
                        const ExperimentOptions& options = {});

// One truncating cell per (model, length), ordered by model then length;
// the svm baseline gets a single cell.
// Throws on the first failed cell.
ResultsTable run_sweep(SplitMode split_mode, const std::vector<std::string>& model_kinds,
                       const std::vector<std::size_t>& lengths, const DataSplit& data, const Vocabulary& vocab,
                       const ExperimentOptions& options = {}, std::uint64_t seed = 42);

enum class TableFormat { kMarkdown, kCsv, kJson };

// Columns: No-Trunc-Train, No-Trunc-Test, Model, #Train, #Test, Acc, F1.
std::string emit_results_table(const ResultsTable& table, TableFormat format);
ResultsTable parse_results_csv(const std::string& text);

}  // namespace sameside
