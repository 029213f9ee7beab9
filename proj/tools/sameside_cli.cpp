// sameside-cli: command-line front end over the C API.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "sameside/sameside.h"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kExperiment = 3 };

// Thrown to unwind a command with a specific exit code.
struct Failure {
  int exit_code;
  std::string message;
};

int exit_code_for(ss_status status) {
  switch (status) {
    case SS_OK:
      return kOk;
    case SS_ERR_INVALID_ARGUMENT:
      return kUsage;
    case SS_ERR_IO:
    case SS_ERR_SCHEMA:
    case SS_ERR_DUPLICATE_ID:
    case SS_ERR_LABEL:
    case SS_ERR_ENCODE:
    case SS_ERR_EMPTY_DATA:
    case SS_ERR_FORMAT:
      return kData;
    default:
      return kExperiment;
  }
}

void check(ss_status status, const std::string& what) {
  if (status != SS_OK) throw Failure{exit_code_for(status), what + ": " + ss_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Corpus = std::unique_ptr<ss_corpus, Deleter<ss_corpus, ss_corpus_free>>;
using Vocab = std::unique_ptr<ss_vocab, Deleter<ss_vocab, ss_vocab_free>>;
using Histogram = std::unique_ptr<ss_histogram, Deleter<ss_histogram, ss_histogram_free>>;
using Model = std::unique_ptr<ss_model, Deleter<ss_model, ss_model_free>>;
using Svm = std::unique_ptr<ss_svm, Deleter<ss_svm, ss_svm_free>>;
using Results = std::unique_ptr<ss_results, Deleter<ss_results, ss_results_free>>;

// Takes ownership of a string returned by the library.
std::string take(char* s) {
  std::string out = s ? s : "";
  ss_string_free(s);
  return out;
}

struct Settings {
  std::string data, train, test, vocab, out = "out", output, checkpoint, results, hist;
  std::string model = "base-mini", split_mode = "within", format = "csv", title;
  std::vector<std::string> models = {"base-mini", "large-mini"};
  std::vector<std::size_t> lengths = {32, 64, 128, 256, 512};
  std::vector<std::size_t> thresholds = {512};
  std::uint64_t seed = 42;
  double fraction = 0.9;
  std::size_t max_seq_len = 512;
  bool trunc_train = true, trunc_test = true;
  std::size_t vocab_size = 8192, min_freq = 2, bucket_width = 16;
  ss_hyperparams hp{};
  double svm_lambda = 1e-4;
  std::size_t svm_epochs = 5;
  std::size_t num_layers = 0, hidden_size = 0, num_heads = 0, ff_size = 0;
  std::size_t jobs = 0;
  double h = 1e-5, tolerance = 1e-4;
  std::size_t batch = 4, seq_len = 16;
};

void require_input(const std::string& path, const char* key) {
  if (path.empty()) throw Failure{kUsage, std::string("missing required setting '") + key + "'"};
  if (!fs::exists(path)) throw Failure{kUsage, std::string(key) + ": no such file '" + path + "'"};
}

fs::path out_dir(const Settings& s) {
  std::error_code ec;
  fs::create_directories(s.out, ec);
  if (ec) throw Failure{kUsage, "cannot create output directory '" + s.out + "': " + ec.message()};
  return s.out;
}

// Explicit --output wins over the default file name in the output directory.
std::string out_path(const Settings& s, const std::string& name) {
  if (!s.output.empty()) {
    const fs::path p(s.output);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    return s.output;
  }
  return (out_dir(s) / name).string();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Failure{kData, "cannot write '" + path.string() + "'"};
}

ss_format format_of(const std::string& name) {
  if (name == "csv") return SS_FORMAT_CSV;
  if (name == "jsonl") return SS_FORMAT_JSONL;
  throw Failure{kUsage, "format must be csv or jsonl, got '" + name + "'"};
}

Corpus load(const std::string& path, const char* key) {
  require_input(path, key);
  ss_corpus* c = nullptr;
  check(ss_corpus_load(path.c_str(), SS_FORMAT_AUTO, &c), "loading " + path);
  return Corpus(c);
}

// The configured vocabulary, or one built from `source`.
Vocab vocab_for(const Settings& s, const ss_corpus* source) {
  ss_vocab* v = nullptr;
  if (!s.vocab.empty()) {
    require_input(s.vocab, "vocab");
    check(ss_vocab_load(s.vocab.c_str(), &v), "loading vocabulary");
  } else {
    check(ss_vocab_build(source, s.vocab_size, s.min_freq, &v), "building vocabulary");
  }
  return Vocab(v);
}

ss_model_config model_config(const Settings& s, std::size_t vocab_size) {
  ss_model_config cfg;
  check(ss_model_preset(s.model.c_str(), vocab_size, &cfg), "model");
  if (s.num_layers) cfg.num_layers = s.num_layers;
  if (s.hidden_size) cfg.hidden_size = s.hidden_size;
  if (s.num_heads) cfg.num_heads = s.num_heads;
  if (s.ff_size) cfg.ff_size = s.ff_size;
  return cfg;
}

int cmd_ingest(const Settings& s) {
  Corpus c = load(s.data, "data");
  const std::string path = out_path(s, s.format == "jsonl" ? "corpus.jsonl" : "corpus.csv");
  check(ss_corpus_save(c.get(), path.c_str(), format_of(s.format)), "writing corpus");
  std::cout << ss_corpus_size(c.get()) << " records, " << ss_corpus_topic_count(c.get()) << " topics -> " << path
            << '\n';
  return kOk;
}

int cmd_stats(const Settings& s) {
  Corpus c = load(s.data, "data");
  char* json = nullptr;
  char* md = nullptr;
  check(ss_corpus_stats_json(c.get(), &json), "statistics");
  const std::string json_text = take(json);
  check(ss_corpus_stats_markdown(c.get(), &md), "statistics");
  const std::string md_text = take(md);
  const fs::path dir = out_dir(s);
  write_text(dir / "stats.json", json_text);
  write_text(dir / "stats.md", md_text);
  std::cout << md_text;
  return kOk;
}

int cmd_split(const Settings& s) {
  Corpus c = load(s.data, "data");
  ss_corpus* train = nullptr;
  ss_corpus* test = nullptr;
  check(ss_corpus_split(c.get(), s.fraction, s.seed, &train, &test), "split");
  Corpus tr(train), te(test);
  const fs::path dir = out_dir(s);
  const std::string ext = s.format == "jsonl" ? ".jsonl" : ".csv";
  check(ss_corpus_save(tr.get(), (dir / ("train" + ext)).c_str(), format_of(s.format)), "writing train split");
  check(ss_corpus_save(te.get(), (dir / ("test" + ext)).c_str(), format_of(s.format)), "writing test split");
  std::cout << "train " << ss_corpus_size(tr.get()) << ", test " << ss_corpus_size(te.get()) << " (seed " << s.seed
            << ")\n";
  return kOk;
}

int cmd_build_vocab(const Settings& s) {
  Corpus c = load(s.data.empty() ? s.train : s.data, "data");
  ss_vocab* v = nullptr;
  check(ss_vocab_build(c.get(), s.vocab_size, s.min_freq, &v), "building vocabulary");
  Vocab vocab(v);
  const std::string path = out_path(s, "vocab.txt");
  check(ss_vocab_save(vocab.get(), path.c_str()), "writing vocabulary");
  std::cout << ss_vocab_size(vocab.get()) << " entries -> " << path << '\n';
  return kOk;
}

int cmd_hist(const Settings& s) {
  if (s.bucket_width == 0) throw Failure{kUsage, "bucket_width must be at least 1"};
  Corpus c = load(s.data, "data");
  Vocab vocab = vocab_for(s, c.get());
  std::vector<std::size_t> thresholds = s.thresholds;
  thresholds.push_back(512);
  ss_histogram* h = nullptr;
  check(ss_histogram_build(c.get(), vocab.get(), s.bucket_width, thresholds.data(), thresholds.size(), &h),
        "histogram");
  Histogram hist(h);
  const fs::path dir = out_dir(s);
  char* text = nullptr;
  check(ss_histogram_csv(hist.get(), &text), "histogram");
  write_text(dir / "hist.csv", take(text));
  check(ss_histogram_json(hist.get(), &text), "histogram");
  write_text(dir / "hist.json", take(text));
  const std::string title = s.title.empty() ? "Distribution of argument pair lengths" : s.title;
  check(ss_histogram_svg(hist.get(), 0, title.c_str(), &text), "histogram");
  write_text(dir / "hist.svg", take(text));
  check(ss_histogram_svg(hist.get(), 512, (title + " (up to 512)").c_str(), &text), "histogram");
  write_text(dir / "hist_512.svg", take(text));
  double fraction = 0.0;
  check(ss_histogram_fraction_leq(hist.get(), 512, &fraction), "histogram");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", fraction);
  std::cout << "fraction_leq_512 " << buf << '\n';
  return kOk;
}

int cmd_train(const Settings& s) {
  Corpus train = load(s.train.empty() ? s.data : s.train, "train");
  Vocab vocab = vocab_for(s, train.get());
  const ss_model_config cfg = model_config(s, ss_vocab_size(vocab.get()));
  ss_model* m = nullptr;
  char* report = nullptr;
  check(ss_model_train(&cfg, vocab.get(), train.get(), &s.hp, s.max_seq_len, &m, &report), "training");
  Model model(m);
  const std::string report_text = take(report);
  const fs::path dir = out_dir(s);
  const std::string ckpt = s.checkpoint.empty() ? (dir / "model.ckpt").string() : s.checkpoint;
  check(ss_model_save(model.get(), ckpt.c_str()), "writing checkpoint");
  write_text(dir / "train_report.json", report_text);
  if (s.vocab.empty()) check(ss_vocab_save(vocab.get(), (dir / "vocab.txt").c_str()), "writing vocabulary");
  std::cout << report_text;
  return kOk;
}

int cmd_evaluate(const Settings& s) {
  require_input(s.checkpoint, "checkpoint");
  require_input(s.vocab, "vocab");
  Corpus test = load(s.test.empty() ? s.data : s.test, "test");
  Vocab vocab = vocab_for(s, test.get());
  ss_model* m = nullptr;
  check(ss_model_load(s.checkpoint.c_str(), &m), "loading checkpoint");
  Model model(m);
  char* json = nullptr;
  check(ss_model_evaluate(model.get(), vocab.get(), test.get(), s.max_seq_len, &json), "evaluation");
  const std::string text = take(json);
  write_text(out_path(s, "metrics.json"), text);
  std::cout << text;
  return kOk;
}

int cmd_baseline(const Settings& s) {
  Corpus train = load(s.train, "train");
  Corpus test = load(s.test, "test");
  Vocab vocab = vocab_for(s, train.get());
  ss_svm* raw = nullptr;
  check(ss_svm_train(train.get(), vocab.get(), s.svm_lambda, s.svm_epochs, s.seed, &raw), "baseline training");
  Svm svm(raw);
  const fs::path dir = out_dir(s);
  check(ss_svm_save(svm.get(), (dir / "svm.json").c_str()), "writing baseline model");
  char* json = nullptr;
  check(ss_svm_evaluate(svm.get(), vocab.get(), test.get(), &json), "baseline evaluation");
  const std::string text = take(json);
  write_text(dir / "svm_metrics.json", text);
  std::cout << text;
  return kOk;
}

int cmd_sweep(const Settings& s) {
  for (std::size_t len : s.lengths) {
    if (len < 8 || len > 512) {
      throw Failure{kUsage, "lengths: " + std::to_string(len) + " is outside [8, 512]"};
    }
  }
  if (s.models.empty()) throw Failure{kUsage, "models: at least one model kind is required"};
  Corpus train, test;
  if (!s.train.empty() || !s.test.empty()) {
    train = load(s.train, "train");
    test = load(s.test, "test");
  } else {
    Corpus all = load(s.data, "data");
    ss_corpus* tr = nullptr;
    ss_corpus* te = nullptr;
    check(ss_corpus_split(all.get(), s.fraction, s.seed, &tr, &te), "split");
    train.reset(tr);
    test.reset(te);
  }
  Vocab vocab = vocab_for(s, train.get());

  ss_experiment_options opts;
  ss_experiment_options_default(&opts);
  opts.hyperparams = s.hp;
  opts.svm_lambda = s.svm_lambda;
  opts.svm_epochs = s.svm_epochs;
  opts.num_layers = s.num_layers;
  opts.hidden_size = s.hidden_size;
  opts.num_heads = s.num_heads;
  opts.ff_size = s.ff_size;
  opts.jobs = s.jobs ? s.jobs : std::max(1u, std::thread::hardware_concurrency());

  std::vector<const char*> kinds;
  for (const auto& m : s.models) kinds.push_back(m.c_str());
  ss_results* raw = nullptr;
  const ss_status status =
      ss_run_matrix(train.get(), test.get(), vocab.get(), s.split_mode.c_str(), kinds.data(), kinds.size(),
                    s.lengths.data(), s.lengths.size(), s.trunc_train, s.trunc_test, s.seed, &opts, &raw);
  if (status != SS_OK && status != SS_ERR_EXPERIMENT) check(status, "sweep");
  const std::string failure = status == SS_OK ? "" : ss_last_error();
  Results results(raw);

  const fs::path dir = out_dir(s);
  char* text = nullptr;
  check(ss_results_emit(results.get(), SS_TABLE_CSV, &text), "results");
  write_text(dir / "results.csv", take(text));
  check(ss_results_emit(results.get(), SS_TABLE_MARKDOWN, &text), "results");
  const std::string md = take(text);
  write_text(dir / "results.md", md);
  check(ss_results_emit(results.get(), SS_TABLE_JSON, &text), "results");
  write_text(dir / "results.json", take(text));
  const std::string title = s.title.empty() ? "Accuracy by maximum sequence length (" + s.split_mode + ")" : s.title;
  check(ss_results_svg(results.get(), title.c_str(), &text), "plot");
  write_text(dir / "accuracy.svg", take(text));
  std::cout << md;
  if (!failure.empty()) throw Failure{kExperiment, "sweep: " + failure};
  return kOk;
}

int cmd_gradcheck(const Settings& s) {
  ss_model_config cfg;
  check(ss_model_preset(s.model.c_str(), s.vocab_size, &cfg), "model");
  cfg.num_layers = s.num_layers ? s.num_layers : 1;
  cfg.hidden_size = s.hidden_size ? s.hidden_size : 8;
  cfg.num_heads = s.num_heads ? s.num_heads : 2;
  cfg.ff_size = s.ff_size ? s.ff_size : 2 * cfg.hidden_size;
  cfg.max_positions = std::max<std::size_t>(s.seq_len, 8);
  double err = 0.0;
  check(ss_gradient_check(&cfg, s.seed, s.batch, s.seq_len, s.h, &err), "gradient check");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", err);
  std::cout << "max_relative_error " << buf << " (layers " << cfg.num_layers << ", hidden " << cfg.hidden_size
            << ", h " << s.h << ")\n";
  if (!(err < s.tolerance)) throw Failure{kExperiment, "gradient check above tolerance"};
  return kOk;
}

int cmd_plot(const Settings& s) {
  if (s.results.empty() == s.hist.empty()) throw Failure{kUsage, "plot needs exactly one of --results or --hist"};
  const std::string input = s.results.empty() ? s.hist : s.results;
  require_input(input, s.results.empty() ? "hist" : "results");
  std::ifstream in(input, std::ios::binary);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  char* svg = nullptr;
  if (!s.results.empty()) {
    ss_results* raw = nullptr;
    check(ss_results_parse_csv(text.c_str(), &raw), "reading results");
    Results results(raw);
    check(ss_results_svg(results.get(), s.title.c_str(), &svg), "plot");
  } else {
    ss_histogram* raw = nullptr;
    check(ss_histogram_parse_csv(text.c_str(), &raw), "reading histogram");
    Histogram hist(raw);
    check(ss_histogram_svg(hist.get(), 0, s.title.c_str(), &svg), "plot");
  }
  const std::string path = out_path(s, "plot.svg");
  write_text(path, take(svg));
  std::cout << path << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  ss_hyperparams_default(&s.hp);

  CLI::App app{"Same-side stance classification toolkit"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_config("--config", "", "Flat key=value settings file; flags override it");
  app.allow_config_extras(false);
  app.set_version_flag("--version",
                       std::string("sameside-cli ") + ss_version() + "\ncheckpoint format " +
                           std::to_string(ss_checkpoint_format_version()) + "\nencoded cache format " +
                           std::to_string(ss_encoded_cache_format_version()));

  app.add_option("--data", s.data, "Corpus file (csv or jsonl)");
  app.add_option("--train", s.train, "Training corpus");
  app.add_option("--test", s.test, "Test corpus");
  app.add_option("--vocab", s.vocab, "Vocabulary file; built from the data when omitted");
  app.add_option("--out", s.out, "Output directory")->capture_default_str();
  app.add_option("--output", s.output, "Explicit output file for single-file commands");
  app.add_option("--checkpoint", s.checkpoint, "Model checkpoint path");
  app.add_option("--results", s.results, "Results csv (plot)");
  app.add_option("--hist", s.hist, "Histogram csv (plot)");
  app.add_option("--format", s.format, "Corpus output format: csv or jsonl")->capture_default_str();
  app.add_option("--title", s.title, "Plot title");
  app.add_option("--model", s.model, "Model preset")->capture_default_str();
  app.add_option("--models", s.models, "Model kinds for sweeps (presets or svm)")->delimiter(',');
  app.add_option("--lengths", s.lengths, "Maximum sequence lengths for sweeps")->delimiter(',');
  app.add_option("--thresholds", s.thresholds, "Histogram thresholds")->delimiter(',');
  app.add_option("--split_mode", s.split_mode, "within or cross")->capture_default_str();
  app.add_option("--seed", s.seed)->capture_default_str();
  app.add_option("--fraction", s.fraction, "Training fraction for split")->capture_default_str();
  app.add_option("--max_seq_len", s.max_seq_len)->capture_default_str();
  app.add_option("--trunc_train", s.trunc_train, "false drops training pairs that would be truncated");
  app.add_option("--trunc_test", s.trunc_test, "false drops test pairs that would be truncated");
  app.add_option("--vocab_size", s.vocab_size)->capture_default_str();
  app.add_option("--min_freq", s.min_freq)->capture_default_str();
  app.add_option("--bucket_width", s.bucket_width)->capture_default_str();
  app.add_option("--learning_rate", s.hp.learning_rate)->capture_default_str();
  app.add_option("--beta1", s.hp.beta1)->capture_default_str();
  app.add_option("--beta2", s.hp.beta2)->capture_default_str();
  app.add_option("--epsilon", s.hp.epsilon)->capture_default_str();
  app.add_option("--batch_size", s.hp.batch_size)->capture_default_str();
  app.add_option("--epochs", s.hp.epochs)->capture_default_str();
  app.add_option("--svm_lambda", s.svm_lambda)->capture_default_str();
  app.add_option("--svm_epochs", s.svm_epochs)->capture_default_str();
  app.add_option("--num_layers", s.num_layers, "Architecture override (0 keeps the preset)");
  app.add_option("--hidden_size", s.hidden_size, "Architecture override (0 keeps the preset)");
  app.add_option("--num_heads", s.num_heads, "Architecture override (0 keeps the preset)");
  app.add_option("--ff_size", s.ff_size, "Architecture override (0 keeps the preset)");
  app.add_option("--jobs", s.jobs, "Parallel experiment cells (0 = number of processors)");
  app.add_option("--step", s.h, "Finite-difference step")->capture_default_str();
  app.add_option("--tolerance", s.tolerance, "Gradient check pass threshold")->capture_default_str();
  app.add_option("--batch", s.batch, "Gradient check batch size")->capture_default_str();
  app.add_option("--seq_len", s.seq_len, "Gradient check sequence length")->capture_default_str();

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Settings&);
  };
  const Command commands[] = {
      {"ingest", "Validate a corpus and write it in canonical form", cmd_ingest},
      {"stats", "Per-topic class statistics", cmd_stats},
      {"split", "Seeded train/test split", cmd_split},
      {"build-vocab", "Build the subword vocabulary", cmd_build_vocab},
      {"hist", "Encoded pair length histogram", cmd_hist},
      {"train", "Fine-tune the encoder", cmd_train},
      {"evaluate", "Evaluate a checkpoint on a test corpus", cmd_evaluate},
      {"sweep", "Run the experiment matrix over sequence lengths", cmd_sweep},
      {"baseline", "Train and evaluate the linear baseline", cmd_baseline},
      {"gradcheck", "Finite-difference gradient check", cmd_gradcheck},
      {"plot", "Render results or histogram csv as SVG", cmd_plot},
  };
  for (const auto& c : commands) app.add_subcommand(c.name, c.help)->fallthrough();
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  const std::string chosen = app.get_subcommands().front()->get_name();
  try {
    for (const auto& c : commands) {
      if (chosen == c.name) return c.run(s);
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
