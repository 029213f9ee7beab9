#include <cmath>

#include "doctest.h"
#include "synthetic.hpp"
#include "sameside/error.hpp"
#include "sameside/eval.hpp"
#include "sameside/plot.hpp"

using namespace sameside;

namespace {

std::size_t count_of(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

ExperimentOptions tiny_options() {
  ExperimentOptions o;
  o.architecture = ArchitectureOverride{1, 16, 2, 32};
  o.hyperparams.epochs = 2;
  o.svm_epochs = 5;
  return o;
}

}  // namespace

TEST_CASE("confusion") {
  CHECK(confusion({true, false}, {true, false}) == ConfusionMatrix{1, 0, 0, 1});
  CHECK(confusion({true, true, true, true}, {false, false, false, false}).fp == 4);
  CHECK_THROWS_AS(confusion({true}, {true, false}), Error);
  CHECK_THROWS_AS(confusion({}, {}), Error);

  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<bool> p, l;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0, same = 0;
    for (int i = 0; i < 20; ++i) {
      const bool a = rng.uniform_index(2), b = rng.uniform_index(2);
      p.push_back(a);
      l.push_back(b);
      if (a && b) ++tp;
      if (a && !b) ++fp;
      if (!a && b) ++fn;
      if (!a && !b) ++tn;
      same += a == b;
    }
    CHECK(confusion(p, l) == ConfusionMatrix{tp, fp, fn, tn});
    CHECK(metrics(confusion(p, l)).accuracy == doctest::Approx(same / 20.0).epsilon(1e-15));
    CHECK(metrics(confusion(l, l)).accuracy == 1.0);
  }
}

TEST_CASE("metrics") {
  const MetricsReport perfect = metrics({2, 0, 0, 2});
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  CHECK_FALSE(perfect.undefined_ratio);

  const MetricsReport m = metrics({3, 1, 2, 4});
  CHECK(std::abs(m.accuracy - 0.7) < 1e-12);
  CHECK(std::abs(m.precision - 0.75) < 1e-12);
  CHECK(std::abs(m.recall - 0.6) < 1e-12);
  CHECK(std::abs(m.f1 - 2.0 / 3.0) < 1e-6);

  // P = R = 0.72: 18 true positives, 7 false positives, 7 false negatives.
  const MetricsReport p72 = metrics({18, 7, 7, 68});
  CHECK(p72.precision == 0.72);
  CHECK(p72.recall == 0.72);
  CHECK(p72.f1 == 0.72);

  const MetricsReport none = metrics({0, 0, 3, 5});
  CHECK(none.precision == 0.0);
  CHECK(none.f1 == 0.0);
  CHECK(none.undefined_ratio);
  CHECK(none.to_json().find("\"undefined_ratio\": true") != std::string::npos);
}

TEST_CASE("results table") {
  ResultsTable empty;
  CHECK(emit_results_table(empty, TableFormat::kCsv) == "No-Trunc-Train,No-Trunc-Test,Model,#Train,#Test,Acc,F1\n");
  CHECK(count_of(emit_results_table(empty, TableFormat::kMarkdown), "\n") == 2);

  ResultsTable t;
  ResultsRow r;
  r.spec.model_kind = "large-mini";
  r.spec.max_seq_len = 512;
  r.spec.trunc_train = false;
  r.spec.trunc_test = false;
  r.num_train = 43678;
  r.num_test = 4932;
  r.metrics.accuracy = 0.88481;
  r.metrics.f1 = 0.8848;
  t.rows.push_back(r);
  ResultsRow svm;
  svm.spec.model_kind = "svm";
  svm.num_train = 57512;
  svm.num_test = 6391;
  svm.metrics.accuracy = 0.54;
  svm.metrics.f1 = 0.5;
  t.rows.push_back(svm);
  ResultsRow failed;
  failed.spec.model_kind = "base-mini";
  failed.spec.max_seq_len = 32;
  failed.failed = true;
  failed.error = "boom";
  t.rows.push_back(failed);

  const std::string csv = emit_results_table(t, TableFormat::kCsv);
  CHECK(csv.find("x,x,large-mini@512,43678,4932,0.8848,0.8848\n") != std::string::npos);
  CHECK(csv.find("n/a,n/a,svm,57512,6391,0.5400,0.5000\n") != std::string::npos);
  CHECK(csv.find(",,base-mini@32,0,0,FAILED,FAILED\n") != std::string::npos);
  CHECK(emit_results_table(parse_results_csv(csv), TableFormat::kCsv) == csv);

  const std::string md = emit_results_table(t, TableFormat::kMarkdown);
  CHECK(md.find("| x | x | large-mini@512 | 43,678 | 4,932 | 0.8848 | 0.8848 |") != std::string::npos);

  const std::string js = emit_results_table(t, TableFormat::kJson);
  CHECK(js.find("runtime_seconds") != std::string::npos);
  CHECK(js.find("baseline: reimplemented") != std::string::npos);
  CHECK(js.find("boom") != std::string::npos);

  CHECK_THROWS_AS(parse_results_csv("a,b\n"), Error);
  CHECK_THROWS_AS(parse_results_csv("No-Trunc-Train,No-Trunc-Test,Model,#Train,#Test,Acc,F1\n,,m@1,z,1,0.5,0.5\n"),
                  Error);
}

TEST_CASE("experiments") {
  const Corpus corpus = testing::separable_corpus(48, 21);
  const Vocabulary vocab = build_vocab(corpus, 200, 1);
  const DataSplit data = split(corpus, 0.75, 5);
  const ExperimentOptions opts = tiny_options();

  SUBCASE("no-trunc counts equal the filter") {
    ExperimentSpec spec;
    spec.max_seq_len = 12;
    spec.trunc_train = false;
    spec.trunc_test = false;
    const ResultsRow row = run_experiment(spec, data, vocab, opts);
    CHECK(row.num_train == filter_untruncated(data.train, vocab, 12).size());
    CHECK(row.num_test == filter_untruncated(data.test, vocab, 12).size());
    CHECK(row.num_test < data.test.size());

    spec.trunc_train = true;
    spec.trunc_test = true;
    const ResultsRow full = run_experiment(spec, data, vocab, opts);
    CHECK(full.num_train == data.train.size());
    CHECK(full.num_test == data.test.size());
  }

  SUBCASE("empty filtered split names the experiment") {
    DataSplit long_test = data;
    long_test.test = testing::position50_corpus(4, 1);
    ExperimentSpec spec;
    spec.max_seq_len = 8;
    spec.trunc_test = false;
    try {
      run_experiment(spec, long_test, vocab, opts);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kExperiment);
      CHECK(std::string(e.what()).find("within/base-mini/8") != std::string::npos);
    }
  }

  SUBCASE("sweep shape and order") {
    const ResultsTable t = run_sweep(SplitMode::kWithin, {"base-mini", "large-mini"}, {16, 24}, data, vocab, opts, 3);
    REQUIRE(t.rows.size() == 4);
    CHECK(t.rows[0].spec.model_kind == "base-mini");
    CHECK(t.rows[0].spec.max_seq_len == 16);
    CHECK(t.rows[1].spec.max_seq_len == 24);
    CHECK(t.rows[2].spec.model_kind == "large-mini");
    for (const auto& row : t.rows) CHECK(row.spec.seed == 3);

    ExperimentSpec single;
    single.max_seq_len = 16;
    single.seed = 3;
    const ResultsRow one = run_experiment(single, data, vocab, opts);
    CHECK(one.metrics.accuracy == t.rows[0].metrics.accuracy);
    CHECK(one.metrics.counts == t.rows[0].metrics.counts);

    CHECK_THROWS_AS(run_sweep(SplitMode::kWithin, {"base-mini"}, {}, data, vocab, opts), Error);
    CHECK_THROWS_AS(run_sweep(SplitMode::kWithin, {"base-mini"}, {64, 32}, data, vocab, opts), Error);
  }

  SUBCASE("matrix records failures and is order stable in parallel") {
    ExperimentOptions par = opts;
    par.jobs = 3;
    std::vector<ExperimentSpec> specs(4);
    specs[0].model_kind = "svm";
    specs[1].max_seq_len = 16;
    specs[2].model_kind = "no-such-model";
    specs[3].max_seq_len = 1024;
    const ResultsTable t = run_matrix(specs, data, vocab, par);
    REQUIRE(t.rows.size() == 4);
    CHECK_FALSE(t.rows[0].failed);
    CHECK(t.rows[0].num_test == data.test.size());
    CHECK_FALSE(t.rows[1].failed);
    CHECK(t.rows[2].failed);
    CHECK(t.rows[3].failed);
    const ResultsTable serial = run_matrix(specs, data, vocab, opts);
    CHECK(emit_results_table(serial, TableFormat::kCsv) == emit_results_table(t, TableFormat::kCsv));
  }
}

TEST_CASE("plots") {
  const std::vector<Series> two = {
      {"base-mini", {{32, 0.6}, {64, 0.62}, {128, 0.7}, {256, 0.71}, {512, 0.73}}},
      {"large-mini", {{32, 0.61}, {64, 0.66}, {128, 0.69}, {256, 0.75}, {512, 0.77}}},
  };
  const std::string svg = emit_plot(two, PlotKind::kLine, {"Accuracy", "max_seq_len", "accuracy"});
  CHECK(svg.starts_with("<?xml"));
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(count_of(svg, "<polyline") == 2);
  CHECK(svg.find(">base-mini<") != std::string::npos);
  CHECK(svg.find(">large-mini<") != std::string::npos);
  CHECK(svg.find(">512<") != std::string::npos);
  CHECK(emit_plot(two, PlotKind::kLine, {"Accuracy", "max_seq_len", "accuracy"}) == svg);

  const auto hist = histogram_from_lengths({10, 40, 70, 70, 600}, 32, {512});
  const std::string bars = emit_plot({histogram_series(hist)}, PlotKind::kBar, {"Lengths", "tokens", "pairs"});
  CHECK(count_of(bars, "<rect class=\"bar\"") == 4);
  CHECK(bars.find(">576<") != std::string::npos);
  CHECK(histogram_series(hist, 512).points.size() == 3);

  CHECK_THROWS_AS(emit_plot({}, PlotKind::kLine), Error);
  CHECK_THROWS_AS(emit_plot({{"nan", {{1, std::nan("")}}}}, PlotKind::kLine), Error);
  CHECK_THROWS_AS(emit_plot({{"inf", {{HUGE_VAL, 1}}}}, PlotKind::kBar), Error);

  ResultsTable t;
  for (std::size_t len : {32u, 64u}) {
    ResultsRow r;
    r.spec.max_seq_len = len;
    r.metrics.accuracy = len / 100.0;
    t.rows.push_back(r);
  }
  const auto s = accuracy_series(t);
  REQUIRE(s.size() == 1);
  CHECK(s[0].points == std::vector<std::pair<double, double>>{{32, 0.32}, {64, 0.64}});
}
