#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "sameside/sameside.h"

namespace {

const char* kToy =
    "id,topic,argument1,argument1_id,argument2,argument2_id,is_same_stance\n"
    "1,abortion,alpha the of,a1,the and to,b1,True\n"
    "2,abortion,beta the of,a2,to the a,b2,False\n"
    "3,abortion,the alpha to,a3,a is the,b3,True\n"
    "4,gay marriage,of beta the,a4,and the of,b4,False\n"
    "5,gay marriage,alpha a,a5,the to,b5,True\n"
    "6,gay marriage,beta a,a6,of of,b6,False\n"
    "7,abortion,to alpha,a7,a a,b7,True\n"
    "8,abortion,to beta,a8,the the,b8,False\n";

std::string take(char* s) {
  std::string out = s;
  ss_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("c api: corpus, vocab and errors") {
  CHECK(std::string(ss_version()) == "0.1.0");
  CHECK(std::string(ss_status_name(SS_ERR_SCHEMA)) != "");

  ss_corpus* corpus = nullptr;
  REQUIRE(ss_corpus_parse(kToy, std::strlen(kToy), SS_FORMAT_CSV, &corpus) == SS_OK);
  CHECK(ss_corpus_size(corpus) == 8);
  CHECK(ss_corpus_topic_count(corpus) == 2);

  char* md = nullptr;
  REQUIRE(ss_corpus_stats_markdown(corpus, &md) == SS_OK);
  CHECK(take(md).find("| Total | 5 | 3 | 8 |") != std::string::npos);

  ss_corpus *train = nullptr, *test = nullptr;
  REQUIRE(ss_corpus_split(corpus, 0.75, 1, &train, &test) == SS_OK);
  CHECK(ss_corpus_size(train) == 6);
  CHECK(ss_corpus_size(test) == 2);

  ss_vocab* vocab = nullptr;
  REQUIRE(ss_vocab_build(corpus, 100, 1, &vocab) == SS_OK);
  CHECK(ss_vocab_size(vocab) > 4);

  ss_corpus* kept = nullptr;
  REQUIRE(ss_corpus_filter_untruncated(corpus, vocab, 8, &kept) == SS_OK);
  CHECK(ss_corpus_size(kept) < 8);
  ss_corpus_free(kept);

  const char* bad = "id,topic\n1,t\n";
  ss_corpus* none = nullptr;
  CHECK(ss_corpus_parse(bad, std::strlen(bad), SS_FORMAT_CSV, &none) == SS_ERR_SCHEMA);
  CHECK(none == nullptr);
  CHECK(std::string(ss_last_error()).find("argument1") != std::string::npos);
  CHECK(ss_corpus_load("/no/such/file.csv", SS_FORMAT_AUTO, &none) == SS_ERR_IO);
  CHECK(ss_corpus_size(nullptr) == 0);
  CHECK(ss_vocab_build(nullptr, 100, 1, &vocab) == SS_ERR_INVALID_ARGUMENT);

  SUBCASE("histogram") {
    const size_t thresholds[] = {8, 512};
    ss_histogram* hist = nullptr;
    REQUIRE(ss_histogram_build(corpus, vocab, 4, thresholds, 2, &hist) == SS_OK);
    double f = 0;
    REQUIRE(ss_histogram_fraction_leq(hist, 512, &f) == SS_OK);
    CHECK(f == 1.0);
    char* svg = nullptr;
    REQUIRE(ss_histogram_svg(hist, 0, "lengths", &svg) == SS_OK);
    CHECK(take(svg).find("<svg") != std::string::npos);
    ss_histogram* zero = nullptr;
    CHECK(ss_histogram_build(corpus, vocab, 0, thresholds, 2, &zero) == SS_ERR_INVALID_ARGUMENT);
    ss_histogram_free(hist);
  }

  SUBCASE("model and baseline") {
    ss_model_config cfg;
    REQUIRE(ss_model_preset("base-mini", ss_vocab_size(vocab), &cfg) == SS_OK);
    CHECK(cfg.num_layers == 4);
    CHECK(std::string(cfg.preset_name) == "base-mini");
    CHECK(ss_model_preset("nope", 10, &cfg) == SS_ERR_INVALID_ARGUMENT);
    REQUIRE(ss_model_preset("base-mini", ss_vocab_size(vocab), &cfg) == SS_OK);
    cfg.num_layers = 1;
    cfg.hidden_size = 8;
    cfg.num_heads = 2;
    cfg.ff_size = 16;
    ss_hyperparams hp;
    ss_hyperparams_default(&hp);
    CHECK(hp.epochs == 3);
    CHECK(hp.batch_size == 16);
    hp.epochs = 2;
    ss_model* model = nullptr;
    char* report = nullptr;
    REQUIRE(ss_model_train(&cfg, vocab, train, &hp, 16, &model, &report) == SS_OK);
    CHECK(take(report).find("epoch_losses") != std::string::npos);

    const auto path = (std::filesystem::temp_directory_path() / "ss_c_api_test.ckpt").string();
    REQUIRE(ss_model_save(model, path.c_str()) == SS_OK);
    ss_model* loaded = nullptr;
    REQUIRE(ss_model_load(path.c_str(), &loaded) == SS_OK);
    ss_model_config back;
    REQUIRE(ss_model_get_config(loaded, &back) == SS_OK);
    CHECK(back.hidden_size == 8);
    char* m1 = nullptr;
    char* m2 = nullptr;
    REQUIRE(ss_model_evaluate(model, vocab, test, 16, &m1) == SS_OK);
    REQUIRE(ss_model_evaluate(loaded, vocab, test, 16, &m2) == SS_OK);
    CHECK(take(m1) == take(m2));
    std::remove(path.c_str());
    ss_model_free(loaded);
    ss_model_free(model);

    double err = 1;
    REQUIRE(ss_gradient_check(&cfg, 3, 2, 10, 1e-5, &err) == SS_OK);
    CHECK(err < 1e-4);

    ss_svm* svm = nullptr;
    REQUIRE(ss_svm_train(train, vocab, 1e-3, 10, 1, &svm) == SS_OK);
    char* sm = nullptr;
    REQUIRE(ss_svm_evaluate(svm, vocab, test, &sm) == SS_OK);
    CHECK(take(sm).find("accuracy") != std::string::npos);
    ss_svm_free(svm);
  }

  SUBCASE("matrix") {
    ss_experiment_options opts;
    ss_experiment_options_default(&opts);
    opts.num_layers = 1;
    opts.hidden_size = 8;
    opts.num_heads = 2;
    opts.ff_size = 16;
    opts.hyperparams.epochs = 1;
    const char* kinds[] = {"base-mini", "svm"};
    const size_t lengths[] = {16, 32};
    ss_results* results = nullptr;
    REQUIRE(ss_run_matrix(train, test, vocab, "within", kinds, 2, lengths, 2, 1, 1, 7, &opts, &results) == SS_OK);
    REQUIRE(ss_results_row_count(results) == 3);
    ss_result_row row;
    REQUIRE(ss_results_row(results, 1, &row) == SS_OK);
    CHECK(std::string(row.model_kind) == "base-mini");
    CHECK(row.max_seq_len == 32);
    CHECK(row.num_train == 6);
    CHECK(ss_results_row(results, 3, &row) == SS_ERR_INVALID_ARGUMENT);
    char* csv = nullptr;
    REQUIRE(ss_results_emit(results, SS_TABLE_CSV, &csv) == SS_OK);
    const std::string csv_text = take(csv);
    ss_results* parsed = nullptr;
    REQUIRE(ss_results_parse_csv(csv_text.c_str(), &parsed) == SS_OK);
    char* again = nullptr;
    REQUIRE(ss_results_emit(parsed, SS_TABLE_CSV, &again) == SS_OK);
    CHECK(take(again) == csv_text);
    ss_results_free(parsed);
    ss_results_free(results);

    const size_t too_long[] = {1024};
    results = nullptr;
    CHECK(ss_run_matrix(train, test, vocab, "within", kinds, 1, too_long, 1, 1, 1, 7, &opts, &results) ==
          SS_ERR_INVALID_ARGUMENT);
    CHECK(results == nullptr);

    // No training pair fits in 8 tokens: the model cell fails.
    const char* long_pairs =
        "id,topic,argument1,argument1_id,argument2,argument2_id,is_same_stance\n"
        "1,t,alpha the of the of the of,a1,the and to,b1,True\n"
        "2,t,beta the of the of the of,a2,to the a,b2,False\n";
    ss_corpus* long_train = nullptr;
    REQUIRE(ss_corpus_parse(long_pairs, std::strlen(long_pairs), SS_FORMAT_CSV, &long_train) == SS_OK);
    results = nullptr;
    const size_t tiny[] = {8};
    CHECK(ss_run_matrix(long_train, test, vocab, "within", kinds, 1, tiny, 1, 0, 1, 7, &opts, &results) ==
          SS_ERR_EXPERIMENT);
    CHECK(std::string(ss_last_error()).find("empty after filtering") != std::string::npos);
    ss_corpus_free(long_train);
    REQUIRE(results != nullptr);
    REQUIRE(ss_results_row(results, 0, &row) == SS_OK);
    CHECK(row.failed);
    ss_results_free(results);
  }

  ss_vocab_free(vocab);
  ss_corpus_free(train);
  ss_corpus_free(test);
  ss_corpus_free(corpus);
}
