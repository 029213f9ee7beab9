#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sameside/tokenizer.hpp"

namespace sameside {

struct ModelConfig {
  std::size_t num_layers = 4;
  std::size_t hidden_size = 128;
  std::size_t num_heads = 4;
  std::size_t ff_size = 512;
  std::size_t max_positions = kMaxSequenceLength;
  std::size_t vocab_size = 0;
  std::string preset_name = "custom";

  std::size_t head_dim() const { return hidden_size / num_heads; }
  // Throws Error(kInvalidArgument) when inconsistent.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// "base-mini" (L=4, H=128, A=4, F=512) or "large-mini" (L=8, H=256, A=8, F=1024).
ModelConfig preset_config(const std::string& name, std::size_t vocab_size);
const std::vector<std::string>& preset_names();

inline constexpr double kLayerNormEpsilon = 1e-12;
inline constexpr double kMaskedLogit = -1e9;

struct TensorInfo {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return rows * cols; }
};

struct LayerTensors {
  std::size_t query_w, query_b, key_w, key_b, value_w, value_b, output_w, output_b;
  std::size_t ff_in_w, ff_in_b, ff_out_w, ff_out_b;
  std::size_t ln1_scale, ln1_shift, ln2_scale, ln2_shift;
};

// Positions of every tensor inside the flat parameter vector, in checkpoint
// order. Weight matrices are stored [in x out], row-major.
class ParameterLayout {
 public:
  explicit ParameterLayout(const ModelConfig& config);

  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& tensor(std::size_t index) const { return tensors_[index]; }
  std::size_t total_size() const { return total_; }
  // Name of the tensor that owns flat element `element`.
  const TensorInfo& owner_of(std::size_t element) const;

  std::size_t token_embeddings = 0, segment_embeddings = 0, position_embeddings = 0;
  std::vector<LayerTensors> layers;
  std::size_t pooler_w = 0, pooler_b = 0, classifier_w = 0, classifier_b = 0;

 private:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols);

  std::vector<TensorInfo> tensors_;
  std::size_t total_ = 0;
};

// Model weights (or a gradient of the same shape) as one flat vector.
class Parameters {
 public:
  explicit Parameters(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const ParameterLayout& layout() const { return layout_; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> tensor(std::size_t index);
  std::span<const double> tensor(std::size_t index) const;

  void set_zero();
  bool all_finite() const;

  bool operator==(const Parameters& other) const {
    return config_ == other.config_ && values_ == other.values_;
  }

 private:
  ModelConfig config_;
  ParameterLayout layout_;
  std::vector<double> values_;
};

using Gradients = Parameters;

inline constexpr double kInitStddev = 0.02;

// Truncated normal (sigma 0.02, cut at 2 sigma) weights, zero biases,
// unit layer-norm scales. Deterministic per seed.
Parameters init_params(const ModelConfig& config, std::uint64_t seed);

// Scaled dot-product attention over row-major [T x H] matrices split into
// num_heads column slices. mask[j] == 0 hides key j. Returns the [T x H]
// context; if `probabilities` is non-null it receives [heads x T x T].
std::vector<double> attention(std::span<const double> queries, std::span<const double> keys,
                              std::span<const double> values, std::span<const std::int32_t> mask,
                              std::size_t hidden_size, std::size_t num_heads,
                              std::vector<double>* probabilities = nullptr);

struct LayerCache {
  std::vector<double> input;          // [T x H]
  std::vector<double> q, k, v;        // [T x H]
  std::vector<double> probabilities;  // [A x T x T]
  std::vector<double> context;        // [T x H]
  std::vector<double> ln1_normalized; // [T x H], before scale/shift
  std::vector<double> ln1_inv_std;    // [T]
  std::vector<double> hidden1;        // [T x H], first layer-norm output
  std::vector<double> ff_pre;         // [T x F]
  std::vector<double> ff_act;         // [T x F]
  std::vector<double> ln2_normalized; // [T x H]
  std::vector<double> ln2_inv_std;    // [T]
};

struct ExampleTrace {
  std::vector<TokenId> token_ids;  // active prefix only
  std::vector<std::int32_t> segment_ids;
  std::vector<std::int32_t> mask;
  std::vector<LayerCache> layers;
  std::vector<double> cls_hidden;  // [H]
  std::vector<double> pooled;      // [H]
  double logits[2] = {0.0, 0.0};
};

// Activations recorded by forward() for backward().
struct ForwardTrace {
  ModelConfig config;
  std::vector<ExampleTrace> examples;
};

struct Logits {
  std::vector<double> values;  // [B x 2], row-major
  std::size_t batch_size() const { return values.size() / 2; }
  double at(std::size_t row, std::size_t col) const { return values[2 * row + col]; }
};

// Runs the encoder on every pair. Trailing positions with mask 0 are not
// evaluated: they cannot influence any unpadded position.
Logits forward(const Parameters& params, std::span<const EncodedPair> batch, ForwardTrace* trace = nullptr);

// Index 1 is same-side; ties resolve to false.
bool predict_label(double logit_different, double logit_same);
std::vector<bool> predict(const Parameters& params, std::span<const EncodedPair> batch);

inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(std::ostream& out, const Parameters& params);
void save_checkpoint(const std::string& path, const Parameters& params);
Parameters load_checkpoint(std::istream& in);
Parameters load_checkpoint(const std::string& path);
// Fails unless the file header describes `expected`.
Parameters load_checkpoint(std::istream& in, const ModelConfig& expected);

}  // namespace sameside
