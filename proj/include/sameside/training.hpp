#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sameside/corpus.hpp"
#include "sameside/model.hpp"
#include "sameside/tokenizer.hpp"

namespace sameside {

struct Hyperparams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 16;
  std::size_t epochs = 3;
  std::uint64_t seed = 42;

  void validate() const;
  std::string to_json() const;
};

// Mean over the batch of -log softmax(logits)[label].
double cross_entropy(const Logits& logits, const std::vector<bool>& labels);

// Exact gradient of the mean cross-entropy over the traced batch.
Gradients backward(const Parameters& params, const ForwardTrace& trace, const std::vector<bool>& labels);
// Same, accumulated into `grads` with each example weighted by `weight`.
void backward_accumulate(const Parameters& params, const ForwardTrace& trace, const std::vector<bool>& labels,
                         double weight, Gradients& grads);

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t size = 0) : first_moment(size, 0.0), second_moment(size, 0.0) {}
};

// One bias-corrected Adam update. `describe` names the tensor owning an
// element when a non-finite gradient is found.
void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state, const Hyperparams& hp,
                 const std::function<std::string(std::size_t)>& describe = {});
void adam_step(Parameters& params, const Gradients& grads, AdamState& state, const Hyperparams& hp);

struct TrainReport {
  std::vector<double> epoch_losses;
  double train_accuracy = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  Hyperparams hyperparams;
  std::size_t max_seq_len = 0;
  std::size_t num_examples = 0;
  std::string preset;

  // wall_seconds is left out when `include_timing` is false so reports can
  // be compared byte for byte.
  std::string to_json(bool include_timing = true) const;
};

struct FineTuneResult {
  Parameters params;
  TrainReport report;
};

FineTuneResult fine_tune(const ModelConfig& config, const Vocabulary& vocab, const Corpus& train,
                         const Hyperparams& hp, std::size_t max_seq_len);
FineTuneResult fine_tune_encoded(const ModelConfig& config, std::span<const EncodedPair> train, const Hyperparams& hp);

inline constexpr std::size_t kGradientCheckSamples = 256;
inline constexpr double kGradientCheckSpread = 0.3;

// Which parameters gradient_check perturbs.
enum class GradientCheckScope { kAll, kClassifierOnly };

// Central finite differences on a fixed random sample of parameters of a
// freshly initialized model with kGradientCheckSpread gaussian noise added
// (attention key biases are not sampled); returns max |analytic - numeric| /
// max(|analytic|, |numeric|, 1e-8).
double gradient_check(const ModelConfig& config, std::uint64_t seed, std::span<const EncodedPair> batch, double h,
                      GradientCheckScope scope = GradientCheckScope::kAll);

// Random encoded pairs for exercising the model without a corpus.
std::vector<EncodedPair> random_batch(const ModelConfig& config, std::size_t batch_size, std::size_t seq_len,
                                      std::uint64_t seed);

}  // namespace sameside
