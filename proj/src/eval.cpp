#include "sameside/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "sameside/error.hpp"
#include "util.hpp"

namespace sameside {

ConfusionMatrix confusion(const std::vector<bool>& predictions, const std::vector<bool>& labels) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "confusion: " + std::to_string(predictions.size()) +
                                                 " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw Error(ErrorCode::kInvalidArgument, "confusion: no predictions");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i]) {
      (labels[i] ? cm.tp : cm.fp) += 1;
    } else {
      (labels[i] ? cm.fn : cm.tn) += 1;
    }
  }
  return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.counts = cm;
  const auto ratio = [&r](double num, double den) {
    if (den == 0.0) {
      r.undefined_ratio = true;
      return 0.0;
    }
    return num / den;
  };
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  r.accuracy = ratio(d(cm.tp + cm.tn), d(cm.total()));
  r.precision = ratio(d(cm.tp), d(cm.tp + cm.fp));
  r.recall = ratio(d(cm.tp), d(cm.tp + cm.fn));
  r.f1 = ratio(2.0 * r.precision * r.recall, r.precision + r.recall);
  return r;
}

std::string MetricsReport::to_json() const {
  nlohmann::json j = {{"accuracy", accuracy},
                      {"precision", precision},
                      {"recall", recall},
                      {"f1", f1},
                      {"tp", counts.tp},
                      {"fp", counts.fp},
                      {"fn", counts.fn},
                      {"tn", counts.tn},
                      {"undefined_ratio", undefined_ratio}};
  return j.dump(2) + "\n";
}

const char* split_mode_name(SplitMode mode) { return mode == SplitMode::kWithin ? "within" : "cross"; }

SplitMode parse_split_mode(const std::string& name) {
  if (name == "within") return SplitMode::kWithin;
  if (name == "cross") return SplitMode::kCross;
  throw Error(ErrorCode::kInvalidArgument, "split mode must be 'within' or 'cross', got '" + name + "'");
}

std::string ExperimentSpec::describe() const {
  std::ostringstream out;
  out << split_mode_name(split_mode) << '/' << model_kind;
  if (!is_svm()) {
    out << '/' << max_seq_len << (trunc_train ? "" : "/no-trunc-train") << (trunc_test ? "" : "/no-trunc-test");
  }
  out << "/seed=" << seed;
  return out.str();
}

ModelConfig experiment_model_config(const std::string& model_kind, std::size_t vocab_size,
                                    const ExperimentOptions& options) {
  ModelConfig config = preset_config(model_kind, vocab_size);
  if (options.architecture) {
    const ArchitectureOverride& a = *options.architecture;
    if (a.num_layers) config.num_layers = a.num_layers;
    if (a.hidden_size) config.hidden_size = a.hidden_size;
    if (a.num_heads) config.num_heads = a.num_heads;
    if (a.ff_size) config.ff_size = a.ff_size;
  }
  config.validate();
  return config;
}

ResultsRow run_experiment(const ExperimentSpec& spec, const DataSplit& data, const Vocabulary& vocab,
                          const ExperimentOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  ResultsRow row;
  row.spec = spec;

  std::vector<bool> predictions, labels;
  if (spec.is_svm()) {
    if (data.train.empty() || data.test.empty()) {
      throw Error(ErrorCode::kExperiment, spec.describe() + ": empty train or test split");
    }
    const BowFeaturizer featurizer(vocab);
    const LinearModel model = train_svm(data.train, featurizer, options.svm_lambda, options.svm_epochs, spec.seed);
    for (const auto& rec : data.test.records()) {
      predictions.push_back(predict_svm(model, rec, featurizer));
      labels.push_back(rec.is_same_stance);
    }
    row.num_train = data.train.size();
    row.num_test = data.test.size();
  } else {
    if (spec.max_seq_len < kMinSequenceLength || spec.max_seq_len > kMaxSequenceLength) {
      throw Error(ErrorCode::kInvalidArgument,
                  spec.describe() + ": max_seq_len must lie in [8, 512], got " + std::to_string(spec.max_seq_len));
    }
    const Corpus train = spec.trunc_train ? data.train : filter_untruncated(data.train, vocab, spec.max_seq_len);
    const Corpus test = spec.trunc_test ? data.test : filter_untruncated(data.test, vocab, spec.max_seq_len);
    if (train.empty()) throw Error(ErrorCode::kExperiment, spec.describe() + ": training split is empty after filtering");
    if (test.empty()) throw Error(ErrorCode::kExperiment, spec.describe() + ": test split is empty after filtering");

    const ModelConfig config = experiment_model_config(spec.model_kind, vocab.size(), options);
    Hyperparams hp = options.hyperparams;
    hp.seed = spec.seed;
    const FineTuneResult trained = fine_tune(config, vocab, train, hp, spec.max_seq_len);
    const std::vector<EncodedPair> encoded = encode_corpus(test, vocab, spec.max_seq_len);
    for (const auto& pair : encoded) {
      predictions.push_back(predict(trained.params, std::span<const EncodedPair>(&pair, 1))[0]);
      labels.push_back(pair.label);
    }
    row.num_train = train.size();
    row.num_test = test.size();
  }
  row.metrics = metrics(confusion(predictions, labels));
  row.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return row;
}

ResultsTable run_matrix(const std::vector<ExperimentSpec>& specs, const DataSplit& data, const Vocabulary& vocab,
                        const ExperimentOptions& options) {
  ResultsTable table;
  table.rows.resize(specs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      try {
        table.rows[i] = run_experiment(specs[i], data, vocab, options);
      } catch (const std::exception& e) {
        ResultsRow& row = table.rows[i];
        row = ResultsRow{};
        row.spec = specs[i];
        row.failed = true;
        row.error = e.what();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(1, specs.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  return table;
}

ResultsTable run_sweep(SplitMode split_mode, const std::vector<std::string>& model_kinds,
                       const std::vector<std::size_t>& lengths, const DataSplit& data, const Vocabulary& vocab,
                       const ExperimentOptions& options, std::uint64_t seed) {
  if (lengths.empty()) throw Error(ErrorCode::kInvalidArgument, "sweep: no sequence lengths given");
  if (!std::is_sorted(lengths.begin(), lengths.end())) {
    throw Error(ErrorCode::kInvalidArgument, "sweep: lengths must be sorted ascending");
  }
  std::vector<ExperimentSpec> specs;
  for (const auto& kind : model_kinds) {
    for (std::size_t len : lengths) {
      if (kind == kSvmModelKind && len != lengths.front()) break;  // length does not apply
      ExperimentSpec s;
      s.split_mode = split_mode;
      s.model_kind = kind;
      s.max_seq_len = len;
      s.seed = seed;
      specs.push_back(s);
    }
  }
  ResultsTable table = run_matrix(specs, data, vocab, options);
  for (const auto& row : table.rows) {
    if (row.failed) throw Error(ErrorCode::kExperiment, row.spec.describe() + ": " + row.error);
  }
  return table;
}

namespace {

const std::vector<std::string>& table_columns() {
  static const std::vector<std::string> cols = {"No-Trunc-Train", "No-Trunc-Test", "Model", "#Train",
                                                "#Test",          "Acc",           "F1"};
  return cols;
}

constexpr const char* kNotApplicable = "n/a";
constexpr const char* kNoTruncMark = "x";
constexpr const char* kFailedMark = "FAILED";

std::string model_cell(const ExperimentSpec& spec) {
  return spec.is_svm() ? spec.model_kind : spec.model_kind + "@" + std::to_string(spec.max_seq_len);
}

std::vector<std::string> row_cells(const ResultsRow& row, bool thousands) {
  const auto flag = [&](bool trunc) -> std::string {
    if (row.spec.is_svm()) return kNotApplicable;
    return trunc ? "" : kNoTruncMark;
  };
  const auto count = [&](std::size_t v) { return thousands ? detail::with_thousands(v) : std::to_string(v); };
  return {flag(row.spec.trunc_train),
          flag(row.spec.trunc_test),
          model_cell(row.spec),
          count(row.num_train),
          count(row.num_test),
          row.failed ? kFailedMark : detail::fixed(row.metrics.accuracy, 4),
          row.failed ? kFailedMark : detail::fixed(row.metrics.f1, 4)};
}

nlohmann::json row_json(const ResultsRow& row) {
  const ExperimentSpec& s = row.spec;
  nlohmann::json j = {{"split_mode", split_mode_name(s.split_mode)},
                      {"model", s.model_kind},
                      {"seed", s.seed},
                      {"num_train", row.num_train},
                      {"num_test", row.num_test},
                      {"runtime_seconds", row.runtime_seconds},
                      {"failed", row.failed}};
  if (s.is_svm()) {
    j["max_seq_len"] = kNotApplicable;
    j["no_trunc_train"] = kNotApplicable;
    j["no_trunc_test"] = kNotApplicable;
    j["label"] = kBaselineLabel;
  } else {
    j["max_seq_len"] = s.max_seq_len;
    j["no_trunc_train"] = !s.trunc_train;
    j["no_trunc_test"] = !s.trunc_test;
  }
  if (row.failed) {
    j["error"] = row.error;
  } else {
    j["metrics"] = nlohmann::json::parse(row.metrics.to_json());
  }
  return j;
}

}  // namespace

std::string emit_results_table(const ResultsTable& table, TableFormat format) {
  const auto& cols = table_columns();
  std::ostringstream out;
  switch (format) {
    case TableFormat::kCsv:
      for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
      out << '\n';
      for (const auto& row : table.rows) {
        const auto cells = row_cells(row, false);
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << '\n';
      }
      break;
    case TableFormat::kMarkdown:
      out << '|';
      for (const auto& c : cols) out << ' ' << c << " |";
      out << "\n|:---:|:---:|---|---:|---:|---:|---:|\n";
      for (const auto& row : table.rows) {
        out << '|';
        for (const auto& c : row_cells(row, true)) out << ' ' << c << " |";
        out << '\n';
      }
      break;
    case TableFormat::kJson: {
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& row : table.rows) rows.push_back(row_json(row));
      out << nlohmann::json{{"rows", rows}}.dump(2) << '\n';
      break;
    }
  }
  return out.str();
}

ResultsTable parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kFormat, "results csv: missing header");
  const auto& cols = table_columns();
  std::vector<std::string> header;
  {
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t end = std::min(line.find(',', start), line.size());
      header.push_back(line.substr(start, end - start));
      start = end + 1;
    }
  }
  if (header != cols) throw Error(ErrorCode::kFormat, "results csv: unexpected header '" + line + "'");

  ResultsTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t end = std::min(line.find(',', start), line.size());
      cells.push_back(line.substr(start, end - start));
      start = end + 1;
    }
    const std::string where = "results csv line " + std::to_string(line_no);
    if (cells.size() != cols.size()) throw Error(ErrorCode::kFormat, where + ": expected 7 fields");
    try {
      ResultsRow row;
      const std::string& model = cells[2];
      const auto at = model.rfind('@');
      if (at == std::string::npos) {
        row.spec.model_kind = model;
      } else {
        row.spec.model_kind = model.substr(0, at);
        row.spec.max_seq_len = std::stoul(model.substr(at + 1));
      }
      row.spec.trunc_train = cells[0] != kNoTruncMark;
      row.spec.trunc_test = cells[1] != kNoTruncMark;
      row.num_train = std::stoul(cells[3]);
      row.num_test = std::stoul(cells[4]);
      if (cells[5] == kFailedMark) {
        row.failed = true;
      } else {
        row.metrics.accuracy = std::stod(cells[5]);
        row.metrics.f1 = std::stod(cells[6]);
      }
      table.rows.push_back(row);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kFormat, where + ": malformed number");
    }
  }
  return table;
}

}  // namespace sameside
