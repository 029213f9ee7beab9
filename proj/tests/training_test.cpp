#include <chrono>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "reference_model.hpp"
#include "synthetic.hpp"
#include "sameside/error.hpp"
#include "sameside/random.hpp"
#include "sameside/training.hpp"

using namespace sameside;

namespace {

ModelConfig small_config(std::size_t layers, std::size_t hidden, std::size_t heads, std::size_t vocab = 24) {
  ModelConfig c;
  c.num_layers = layers;
  c.hidden_size = hidden;
  c.num_heads = heads;
  c.ff_size = 2 * hidden;
  c.max_positions = 64;
  c.vocab_size = vocab;
  return c;
}

std::vector<bool> labels_of(std::span<const EncodedPair> batch) {
  std::vector<bool> out;
  for (const auto& p : batch) out.push_back(p.label);
  return out;
}

std::string checkpoint_bytes(const Parameters& p) {
  std::ostringstream out;
  save_checkpoint(out, p);
  return out.str();
}

}  // namespace

TEST_CASE("cross_entropy") {
  CHECK(cross_entropy(Logits{{0.0, 0.0}}, {true}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(cross_entropy(Logits{{0.0, 0.0}}, {false}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  const double big = cross_entropy(Logits{{1000.0, -1000.0}}, {false});
  CHECK(std::isfinite(big));
  CHECK(big == doctest::Approx(0.0));
  CHECK(cross_entropy(Logits{{1000.0, -1000.0}}, {true}) == doctest::Approx(2000.0));

  Rng rng(3);
  Logits logits;
  std::vector<bool> labels;
  long double naive = 0;
  for (int i = 0; i < 50; ++i) {
    const long double a = rng.normal() * 3, b = rng.normal() * 3;
    logits.values.push_back(static_cast<double>(a));
    logits.values.push_back(static_cast<double>(b));
    const bool y = rng.uniform_index(2) == 1;
    labels.push_back(y);
    naive += -std::log(std::exp(y ? b : a) / (std::exp(a) + std::exp(b)));
  }
  const double ce = cross_entropy(logits, labels);
  CHECK(ce >= 0.0);
  CHECK(std::abs(ce - static_cast<double>(naive / 50)) < 1e-10);
}

TEST_CASE("backward: zero-layer classifier gradient has the closed form") {
  const ModelConfig cfg = small_config(0, 4, 1);
  Parameters p = init_params(cfg, 17);
  Rng rng(1);
  for (double& v : p.values()) v = rng.normal() * 0.5;
  const auto batch = random_batch(cfg, 3, 6, 2);
  ForwardTrace trace;
  const Logits logits = forward(p, batch, &trace);
  const auto labels = labels_of(batch);
  const Gradients g = backward(p, trace, labels);

  const auto tok = testing::tensor_matrix(p, "embeddings.token");
  const auto seg = testing::tensor_matrix(p, "embeddings.segment");
  const auto pos = testing::tensor_matrix(p, "embeddings.position");
  const auto wp = testing::tensor_matrix(p, "pooler.weight");
  const auto bp = testing::tensor_vector(p, "pooler.bias");

  const auto& lay = p.layout();
  const auto gw = g.tensor(lay.classifier_w);
  const auto gb = g.tensor(lay.classifier_b);
  std::vector<double> expect_w(4 * 2, 0.0), expect_b(2, 0.0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& pair = batch[b];
    std::vector<double> cls(4);
    for (std::size_t c = 0; c < 4; ++c)
      cls[c] = tok[static_cast<std::size_t>(pair.token_ids[0])][c] +
               seg[static_cast<std::size_t>(pair.segment_ids[0])][c] + pos[0][c];
    const auto pooled = testing::affine({cls}, wp, bp)[0];
    const double l0 = logits.at(b, 0), l1 = logits.at(b, 1);
    const double p1 = 1.0 / (1.0 + std::exp(l0 - l1));
    const double delta[2] = {(1.0 - p1) - (labels[b] ? 0.0 : 1.0), p1 - (labels[b] ? 1.0 : 0.0)};
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t k = 0; k < 2; ++k) expect_w[c * 2 + k] += std::tanh(pooled[c]) * delta[k] / 3.0;
    for (std::size_t k = 0; k < 2; ++k) expect_b[k] += delta[k] / 3.0;
  }
  for (std::size_t i = 0; i < expect_w.size(); ++i) CHECK(gw[i] == doctest::Approx(expect_w[i]).epsilon(1e-12));
  for (std::size_t i = 0; i < 2; ++i) CHECK(gb[i] == doctest::Approx(expect_b[i]).epsilon(1e-12));
}

TEST_CASE("backward: duplicated batch gives identical gradients") {
  const ModelConfig cfg = small_config(1, 8, 2);
  const Parameters p = init_params(cfg, 5);
  const auto batch = random_batch(cfg, 4, 10, 6);
  std::vector<EncodedPair> doubled;
  for (const auto& e : batch) {
    doubled.push_back(e);
    doubled.push_back(e);
  }
  ForwardTrace t1, t2;
  forward(p, batch, &t1);
  forward(p, doubled, &t2);
  const Gradients g1 = backward(p, t1, labels_of(batch));
  const Gradients g2 = backward(p, t2, labels_of(doubled));
  for (std::size_t i = 0; i < g1.values().size(); ++i) CHECK(std::abs(g1.values()[i] - g2.values()[i]) <= 1e-14);
}

TEST_CASE("backward: mismatched trace is an error") {
  const ModelConfig cfg = small_config(1, 8, 2);
  const Parameters p = init_params(cfg, 5);
  const auto batch = random_batch(cfg, 4, 10, 6);
  ForwardTrace trace;
  forward(p, batch, &trace);
  CHECK_THROWS_AS(backward(p, trace, {true, false}), Error);
  const Parameters other = init_params(small_config(2, 8, 2), 5);
  CHECK_THROWS_AS(backward(other, trace, labels_of(batch)), Error);
}

TEST_CASE("gradient_check") {
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t layers : {1u, 2u}) {
    const ModelConfig cfg = small_config(layers, 8, 2);
    const auto batch = random_batch(cfg, 3, 12, 40 + layers);
    const double err = gradient_check(cfg, 7, batch, 1e-5);
    MESSAGE("layers=" << layers << " max relative error " << err);
    CHECK(err < 1e-4);
  }
  const ModelConfig cfg = small_config(1, 8, 2);
  const auto batch = random_batch(cfg, 3, 12, 41);
  const double head = gradient_check(cfg, 7, batch, 1e-5, GradientCheckScope::kClassifierOnly);
  MESSAGE("classifier-only max relative error " << head);
  CHECK(head < 1e-6);

  const double coarse = gradient_check(cfg, 7, batch, 1e-2);
  const double fine = gradient_check(cfg, 7, batch, 1e-5);
  CHECK(fine < coarse);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() < 60.0);
}

TEST_CASE("key bias gradient vanishes") {
  const ModelConfig cfg = small_config(2, 8, 2);
  Parameters p = init_params(cfg, 3);
  Rng rng(4);
  for (double& v : p.values()) v += 0.3 * rng.normal();
  const auto batch = random_batch(cfg, 3, 12, 5);
  std::vector<bool> labels = labels_of(batch);
  ForwardTrace trace;
  forward(p, batch, &trace);
  const Gradients g = backward(p, trace, labels);
  for (const auto& lt : p.layout().layers) {
    for (double v : g.tensor(lt.key_b)) CHECK(std::abs(v) < 1e-15);
    const std::size_t e = p.layout().tensor(lt.key_b).offset;
    const double saved = p.values()[e];
    p.values()[e] = saved + 1e-3;
    const double up = cross_entropy(forward(p, batch), labels);
    p.values()[e] = saved - 1e-3;
    const double down = cross_entropy(forward(p, batch), labels);
    p.values()[e] = saved;
    CHECK(std::abs(up - down) < 1e-13);
  }
}

TEST_CASE("gradient_check across shapes and seeds") {
  double worst = 0;
  for (std::size_t layers : {1u, 2u})
    for (std::size_t hidden : {4u, 8u, 16u})
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const ModelConfig cfg = small_config(layers, hidden, hidden >= 8 ? hidden / 4 : 1, 30);
        const auto batch = random_batch(cfg, 4, 20, 100 + seed);
        worst = std::max(worst, gradient_check(cfg, seed, batch, 1e-5));
      }
  MESSAGE("worst relative error " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("adam") {
  Hyperparams hp;
  SUBCASE("zero gradients leave parameters unchanged") {
    std::vector<double> w = {1.0, -2.0, 3.5};
    const std::vector<double> g(3, 0.0);
    AdamState st(3);
    adam_update(w, g, st, hp);
    CHECK(w == std::vector<double>{1.0, -2.0, 3.5});
    CHECK(st.step == 1);
  }
  SUBCASE("first step moves by lr against the gradient sign") {
    std::vector<double> w = {0.0, 0.0, 0.0};
    const std::vector<double> g = {0.3, -5.0, 1e-3};
    AdamState st(3);
    adam_update(w, g, st, hp);
    CHECK(w[0] == doctest::Approx(-hp.learning_rate).epsilon(1e-6));
    CHECK(w[1] == doctest::Approx(hp.learning_rate).epsilon(1e-6));
    CHECK(w[2] == doctest::Approx(-hp.learning_rate).epsilon(1e-4));
  }
  SUBCASE("quadratic converges") {
    hp.learning_rate = 0.1;
    std::vector<double> w = {1.0};
    AdamState st(1);
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> g = {2.0 * w[0]};
      adam_update(w, g, st, hp);
    }
    // Independent scalar simulation.
    double x = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 100; ++t) {
      const double grad = 2.0 * x;
      m = 0.9 * m + 0.1 * grad;
      v = 0.999 * v + 0.001 * grad * grad;
      const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
      x -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    }
    CHECK(std::abs(w[0]) < 0.5);
    CHECK(w[0] == doctest::Approx(x).epsilon(1e-12));
  }
  SUBCASE("non-finite gradient names the tensor") {
    const ModelConfig cfg = small_config(1, 8, 2);
    Parameters p = init_params(cfg, 1);
    Gradients g(cfg);
    const std::size_t idx = p.layout().tensor(p.layout().layers[0].ff_in_w).offset + 3;
    g.values()[idx] = std::nan("");
    AdamState st(p.values().size());
    try {
      adam_step(p, g, st, hp);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNumeric);
      CHECK(std::string(e.what()).find("layer0.ff_in.w") != std::string::npos);
    }
  }
  SUBCASE("invalid hyperparameters") {
    hp.beta1 = 1.0;
    CHECK_THROWS_AS(hp.validate(), Error);
    hp = Hyperparams{};
    hp.batch_size = 0;
    CHECK_THROWS_AS(hp.validate(), Error);
  }
}

TEST_CASE("fine_tune") {
  const Corpus corpus = testing::separable_corpus(64, 12);
  const Vocabulary vocab = build_vocab(corpus, 200, 1);
  ModelConfig cfg = small_config(1, 16, 2, vocab.size());
  cfg.ff_size = 32;

  SUBCASE("zero epochs returns the initialization") {
    Hyperparams hp;
    hp.epochs = 0;
    const auto r = fine_tune(cfg, vocab, corpus, hp, 32);
    CHECK(r.report.epoch_losses.empty());
    CHECK(r.params == init_params(cfg, hp.seed));
  }

  SUBCASE("deterministic") {
    Hyperparams hp;
    hp.epochs = 2;
    const auto a = fine_tune(cfg, vocab, corpus, hp, 32);
    const auto b = fine_tune(cfg, vocab, corpus, hp, 32);
    CHECK(checkpoint_bytes(a.params) == checkpoint_bytes(b.params));
    CHECK(a.report.to_json(false) == b.report.to_json(false));
    hp.seed = 43;
    const auto c = fine_tune(cfg, vocab, corpus, hp, 32);
    CHECK(checkpoint_bytes(a.params) != checkpoint_bytes(c.params));
  }

  SUBCASE("overfits the separable set and loss decreases") {
    Hyperparams hp;
    hp.epochs = 200;
    const auto r = fine_tune(cfg, vocab, corpus, hp, 32);
    REQUIRE(r.report.epoch_losses.size() == 200);
    for (double l : r.report.epoch_losses) CHECK(l >= 0.0);
    CHECK(r.report.epoch_losses[0] > r.report.epoch_losses[2]);
    CHECK(r.report.train_accuracy == 1.0);
  }

  SUBCASE("empty corpus and bad pairs") {
    Hyperparams hp;
    CHECK_THROWS_AS(fine_tune_encoded(cfg, std::span<const EncodedPair>{}, hp), Error);
    CHECK_THROWS_AS(fine_tune(cfg, vocab, corpus, hp, 4), Error);
  }
}

TEST_CASE("report json") {
  TrainReport r;
  r.epoch_losses = {0.7, 0.5};
  r.wall_seconds = 1.25;
  CHECK(r.to_json(true).find("wall_seconds") != std::string::npos);
  CHECK(r.to_json(false).find("wall_seconds") == std::string::npos);
  CHECK(r.to_json(false).find("learning_rate") != std::string::npos);
}
