#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "reference_model.hpp"
#include "sameside/error.hpp"
#include "sameside/model.hpp"
#include "sameside/random.hpp"
#include "sameside/training.hpp"

using namespace sameside;

namespace {

ModelConfig tiny_config(std::size_t layers, std::size_t hidden, std::size_t heads, std::size_t vocab = 20) {
  ModelConfig c;
  c.num_layers = layers;
  c.hidden_size = hidden;
  c.num_heads = heads;
  c.ff_size = 2 * hidden;
  c.max_positions = 32;
  c.vocab_size = vocab;
  return c;
}

// Replaces every weight with a wide random value so the oracle comparison
// is not dominated by the near-zero default initialization.
void randomize(Parameters& p, std::uint64_t seed) {
  Rng rng(seed);
  for (double& v : p.values()) v = rng.normal() * 0.5;
}

}  // namespace

TEST_CASE("presets mirror the base/large contrast") {
  const ModelConfig base = preset_config("base-mini", 100);
  CHECK(base.num_layers == 4);
  CHECK(base.hidden_size == 128);
  CHECK(base.num_heads == 4);
  CHECK(base.ff_size == 512);
  const ModelConfig large = preset_config("large-mini", 100);
  CHECK(large.num_layers == 8);
  CHECK(large.hidden_size == 256);
  CHECK(large.num_heads == 8);
  CHECK(large.ff_size == 1024);
  CHECK_THROWS_AS(preset_config("bert-huge", 100), Error);
}

TEST_CASE("config validation rejects hidden size not divisible by heads") {
  ModelConfig c = tiny_config(1, 6, 4);
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("init_params") {
  const ModelConfig c = tiny_config(2, 8, 2);
  const Parameters a = init_params(c, 7);
  const Parameters b = init_params(c, 7);
  CHECK(a == b);
  CHECK_FALSE(a == init_params(c, 8));

  const auto& lay = a.layout();
  for (const auto& lt : lay.layers) {
    for (double s : a.tensor(lt.ln1_scale)) CHECK(s == 1.0);
    for (double s : a.tensor(lt.ln2_scale)) CHECK(s == 1.0);
    for (double s : a.tensor(lt.query_b)) CHECK(s == 0.0);
  }
  for (double v : a.tensor(lay.token_embeddings)) CHECK(std::abs(v) <= 2 * kInitStddev);

  SUBCASE("sample mean of 1e5 entries") {
    ModelConfig big = tiny_config(0, 100, 1, 1000);  // 1e5 token-embedding entries
    const Parameters p = init_params(big, 3);
    const auto tok = p.tensor(p.layout().token_embeddings);
    REQUIRE(tok.size() == 100000);
    const double mean = std::accumulate(tok.begin(), tok.end(), 0.0) / static_cast<double>(tok.size());
    CHECK(std::abs(mean) < 3 * kInitStddev / std::sqrt(1e5));
  }
}

TEST_CASE("attention") {
  SUBCASE("single position returns its value") {
    const std::vector<double> q = {0.3, -1.0}, k = {2.0, 0.5}, v = {4.0, -7.0};
    const std::vector<std::int32_t> mask = {1};
    const auto out = attention(q, k, v, mask, 2, 1);
    CHECK(out[0] == doctest::Approx(4.0));
    CHECK(out[1] == doctest::Approx(-7.0));
  }
  SUBCASE("identical keys give uniform weights") {
    const std::vector<double> q = {1, 2, 3, 4, 5, 6}, k = {1, 1, 1, 1, 1, 1}, v = {1, 0, 0, 1, 3, 3};
    const std::vector<std::int32_t> mask = {1, 1, 1};
    std::vector<double> probs;
    attention(q, k, v, mask, 2, 1, &probs);
    for (double p : probs) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("masked keys get exactly zero weight") {
    Rng rng(5);
    std::vector<double> q(5 * 4), k(5 * 4), v(5 * 4);
    for (auto* m : {&q, &k, &v})
      for (double& x : *m) x = rng.normal();
    const std::vector<std::int32_t> mask = {1, 0, 1, 1, 0};
    std::vector<double> probs;
    attention(q, k, v, mask, 4, 2, &probs);
    for (std::size_t row = 0; row < 2 * 5; ++row) {
      double sum = 0;
      for (std::size_t j = 0; j < 5; ++j) {
        sum += probs[row * 5 + j];
        if (!mask[j]) CHECK(probs[row * 5 + j] == 0.0);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  SUBCASE("random inputs match a brute-force softmax reference") {
    Rng rng(11);
    const std::size_t t = 5, h = 6, heads = 2;
    testing::Matrix q(t, std::vector<double>(h)), k = q, v = q;
    std::vector<double> fq, fk, fv;
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t c = 0; c < h; ++c) {
        q[i][c] = rng.normal();
        k[i][c] = rng.normal();
        v[i][c] = rng.normal();
        fq.push_back(q[i][c]);
        fk.push_back(k[i][c]);
        fv.push_back(v[i][c]);
      }
    const std::vector<std::int32_t> mask = {1, 1, 1, 1, 1};
    const auto out = attention(fq, fk, fv, mask, h, heads);
    const auto ref = testing::attention_ref(q, k, v, {1, 1, 1, 1, 1}, heads);
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t c = 0; c < h; ++c) CHECK(out[i * h + c] == doctest::Approx(ref[i][c]).epsilon(1e-12));
  }
  SUBCASE("all-masked row is an error") {
    const std::vector<double> q = {1, 2}, k = {1, 2}, v = {1, 2};
    const std::vector<std::int32_t> mask = {0};
    CHECK_THROWS_AS(attention(q, k, v, mask, 2, 1), Error);
  }
}

TEST_CASE("forward matches the straight-line reference") {
  for (const auto& cfg : {tiny_config(1, 4, 1), tiny_config(2, 8, 2), tiny_config(0, 4, 1)}) {
    Parameters p(cfg);
    randomize(p, 99 + cfg.num_layers);
    const auto batch = random_batch(cfg, 6, 12, 1234);
    const Logits logits = forward(p, batch);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      EncodedPair unpadded = batch[b];
      const std::size_t n = unpadded.unpadded_length();
      unpadded.token_ids.resize(n);
      unpadded.segment_ids.resize(n);
      unpadded.attention_mask.resize(n);
      const auto ref = testing::reference_logits(p, unpadded);
      CHECK(std::abs(logits.at(b, 0) - ref[0]) < 1e-9);
      CHECK(std::abs(logits.at(b, 1) - ref[1]) < 1e-9);
    }
  }
}

TEST_CASE("forward contracts") {
  const ModelConfig cfg = tiny_config(2, 8, 2);
  Parameters p = init_params(cfg, 1);
  randomize(p, 2);

  SUBCASE("empty batch") { CHECK(forward(p, std::span<const EncodedPair>{}).batch_size() == 0); }

  SUBCASE("extra padding does not change logits") {
    auto batch = random_batch(cfg, 4, 10, 9);
    const Logits before = forward(p, batch);
    for (auto& pair : batch) {
      pair.token_ids.resize(30, kPadId);
      pair.segment_ids.resize(30, 1);
      pair.attention_mask.resize(30, 0);
    }
    const Logits after = forward(p, batch);
    for (std::size_t i = 0; i < before.values.size(); ++i) CHECK(std::abs(before.values[i] - after.values[i]) <= 1e-6);
  }

  SUBCASE("token id outside the vocabulary") {
    auto batch = random_batch(cfg, 1, 10, 9);
    batch[0].token_ids[1] = static_cast<TokenId>(cfg.vocab_size);
    CHECK_THROWS_AS(forward(p, batch), Error);
  }

  SUBCASE("pair longer than max_positions") {
    auto batch = random_batch(cfg, 1, 10, 9);
    batch[0].token_ids.resize(40, kPadId);
    batch[0].segment_ids.resize(40, 1);
    batch[0].attention_mask.resize(40, 0);
    CHECK_THROWS_AS(forward(p, batch), Error);
  }

  SUBCASE("trace invariants") {
    const auto batch = random_batch(cfg, 3, 12, 4);
    ForwardTrace trace;
    forward(p, batch, &trace);
    REQUIRE(trace.examples.size() == 3);
    for (const auto& ex : trace.examples) {
      const std::size_t t = ex.token_ids.size();
      for (const auto& layer : ex.layers) {
        for (std::size_t row = 0; row < cfg.num_heads * t; ++row) {
          const double sum = std::accumulate(layer.probabilities.begin() + static_cast<std::ptrdiff_t>(row * t),
                                             layer.probabilities.begin() + static_cast<std::ptrdiff_t>((row + 1) * t), 0.0);
          CHECK(std::abs(sum - 1.0) <= 1e-6);
        }
        // Layer-norm statistics before scale/shift.
        for (const auto* normalized : {&layer.ln1_normalized, &layer.ln2_normalized}) {
          for (std::size_t i = 0; i < t; ++i) {
            double mean = 0, var = 0;
            for (std::size_t c = 0; c < cfg.hidden_size; ++c) mean += (*normalized)[i * cfg.hidden_size + c];
            mean /= static_cast<double>(cfg.hidden_size);
            for (std::size_t c = 0; c < cfg.hidden_size; ++c) {
              const double d = (*normalized)[i * cfg.hidden_size + c] - mean;
              var += d * d;
            }
            var /= static_cast<double>(cfg.hidden_size);
            CHECK(std::abs(mean) < 1e-6);
            CHECK(std::abs(var - 1.0) < 1e-4);
          }
        }
      }
    }
  }
}

TEST_CASE("predict tie rule") {
  CHECK(predict_label(0.2, 0.9));
  CHECK_FALSE(predict_label(0.9, 0.2));
  CHECK_FALSE(predict_label(0.5, 0.5));
}

TEST_CASE("checkpoint round trip and header validation") {
  const ModelConfig cfg = tiny_config(1, 8, 2);
  Parameters p = init_params(cfg, 5);
  std::stringstream buf;
  save_checkpoint(buf, p);
  const std::string bytes = buf.str();
  std::stringstream in(bytes);
  CHECK(load_checkpoint(in) == p);

  std::stringstream in2(bytes);
  ModelConfig other = cfg;
  other.hidden_size = 16;
  CHECK_THROWS_AS(load_checkpoint(in2, other), Error);

  std::stringstream corrupt(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_checkpoint(corrupt), Error);
  std::stringstream garbage("not a checkpoint at all");
  CHECK_THROWS_AS(load_checkpoint(garbage), Error);
}
