#include "sameside/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "kernels.hpp"
#include "sameside/error.hpp"
#include "sameside/random.hpp"
#include "util.hpp"

namespace sameside {

void ModelConfig::validate() const {
  const auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidArgument, "model config: " + what); };
  if (hidden_size == 0) fail("hidden_size must be positive");
  if (num_heads == 0) fail("num_heads must be positive");
  if (hidden_size % num_heads != 0) fail("hidden_size must be divisible by num_heads");
  if (ff_size == 0) fail("ff_size must be positive");
  if (max_positions == 0) fail("max_positions must be positive");
  if (vocab_size < kNumSpecialTokens) fail("vocab_size must include the special tokens");
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"base-mini", "large-mini"};
  return names;
}

ModelConfig preset_config(const std::string& name, std::size_t vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.max_positions = kMaxSequenceLength;
  c.preset_name = name;
  if (name == "base-mini") {
    c.num_layers = 4;
    c.hidden_size = 128;
    c.num_heads = 4;
    c.ff_size = 512;
  } else if (name == "large-mini") {
    c.num_layers = 8;
    c.hidden_size = 256;
    c.num_heads = 8;
    c.ff_size = 1024;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown model preset '" + name + "'");
  }
  return c;
}

ParameterLayout::ParameterLayout(const ModelConfig& config) {
  const std::size_t h = config.hidden_size;
  const std::size_t f = config.ff_size;
  token_embeddings = add("embeddings.token", config.vocab_size, h);
  segment_embeddings = add("embeddings.segment", 2, h);
  position_embeddings = add("embeddings.position", config.max_positions, h);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerTensors t{};
    t.query_w = add(p + "attention.query.weight", h, h);
    t.query_b = add(p + "attention.query.bias", 1, h);
    t.key_w = add(p + "attention.key.weight", h, h);
    t.key_b = add(p + "attention.key.bias", 1, h);
    t.value_w = add(p + "attention.value.weight", h, h);
    t.value_b = add(p + "attention.value.bias", 1, h);
    t.output_w = add(p + "attention.output.weight", h, h);
    t.output_b = add(p + "attention.output.bias", 1, h);
    t.ff_in_w = add(p + "ff_in.weight", h, f);
    t.ff_in_b = add(p + "ff_in.bias", 1, f);
    t.ff_out_w = add(p + "ff_out.weight", f, h);
    t.ff_out_b = add(p + "ff_out.bias", 1, h);
    t.ln1_scale = add(p + "layer_norm1.scale", 1, h);
    t.ln1_shift = add(p + "layer_norm1.shift", 1, h);
    t.ln2_scale = add(p + "layer_norm2.scale", 1, h);
    t.ln2_shift = add(p + "layer_norm2.shift", 1, h);
    layers.push_back(t);
  }
  pooler_w = add("pooler.weight", h, h);
  pooler_b = add("pooler.bias", 1, h);
  classifier_w = add("classifier.weight", h, 2);
  classifier_b = add("classifier.bias", 1, 2);
}

std::size_t ParameterLayout::add(std::string name, std::size_t rows, std::size_t cols) {
  tensors_.push_back(TensorInfo{std::move(name), rows, cols, total_});
  total_ += rows * cols;
  return tensors_.size() - 1;
}

const TensorInfo& ParameterLayout::owner_of(std::size_t element) const {
  auto it = std::upper_bound(tensors_.begin(), tensors_.end(), element,
                             [](std::size_t e, const TensorInfo& t) { return e < t.offset; });
  return *std::prev(it);
}

Parameters::Parameters(ModelConfig config)
    : config_((config.validate(), std::move(config))), layout_(config_), values_(layout_.total_size(), 0.0) {}

std::span<double> Parameters::tensor(std::size_t index) {
  const auto& t = layout_.tensor(index);
  return std::span<double>(values_).subspan(t.offset, t.size());
}

std::span<const double> Parameters::tensor(std::size_t index) const {
  const auto& t = layout_.tensor(index);
  return std::span<const double>(values_).subspan(t.offset, t.size());
}

void Parameters::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

bool Parameters::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Parameters init_params(const ModelConfig& config, std::uint64_t seed) {
  Parameters params(config);
  const auto& layout = params.layout();
  Rng rng(seed);
  for (std::size_t i = 0; i < layout.tensors().size(); ++i) {
    const auto& info = layout.tensor(i);
    auto values = params.tensor(i);
    if (info.name.ends_with(".scale")) {
      std::fill(values.begin(), values.end(), 1.0);
    } else if (info.name.ends_with(".bias") || info.name.ends_with(".shift")) {
      std::fill(values.begin(), values.end(), 0.0);
    } else {
      for (double& v : values) v = kInitStddev * rng.truncated_normal(2.0);
    }
  }
  return params;
}

std::vector<double> attention(std::span<const double> queries, std::span<const double> keys,
                              std::span<const double> values, std::span<const std::int32_t> mask,
                              std::size_t hidden_size, std::size_t num_heads, std::vector<double>* probabilities) {
  const std::size_t t_len = mask.size();
  if (num_heads == 0 || hidden_size % num_heads != 0) {
    throw Error(ErrorCode::kInvalidArgument, "attention: hidden size not divisible by heads");
  }
  if (queries.size() != t_len * hidden_size || keys.size() != queries.size() || values.size() != queries.size()) {
    throw Error(ErrorCode::kInvalidArgument, "attention: shape mismatch");
  }
  if (std::none_of(mask.begin(), mask.end(), [](std::int32_t m) { return m != 0; })) {
    throw Error(ErrorCode::kInvalidArgument, "attention: every key position is masked");
  }
  const std::size_t d = hidden_size / num_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> context(t_len * hidden_size, 0.0);
  std::vector<double> local;
  std::vector<double>& probs = probabilities ? *probabilities : local;
  probs.assign(num_heads * t_len * t_len, 0.0);

  for (std::size_t head = 0; head < num_heads; ++head) {
    const std::size_t col = head * d;
    for (std::size_t i = 0; i < t_len; ++i) {
      double* row = probs.data() + (head * t_len + i) * t_len;
      const double* q = queries.data() + i * hidden_size + col;
      double max_logit = -INFINITY;
      for (std::size_t j = 0; j < t_len; ++j) {
        const double* k = keys.data() + j * hidden_size + col;
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += q[c] * k[c];
        row[j] = dot * scale + (mask[j] ? 0.0 : kMaskedLogit);
        max_logit = std::max(max_logit, row[j]);
      }
      double denom = 0.0;
      for (std::size_t j = 0; j < t_len; ++j) {
        row[j] = std::exp(row[j] - max_logit);
        denom += row[j];
      }
      double* out = context.data() + i * hidden_size + col;
      for (std::size_t j = 0; j < t_len; ++j) {
        row[j] /= denom;
        const double p = row[j];
        if (p == 0.0) continue;
        const double* v = values.data() + j * hidden_size + col;
        for (std::size_t c = 0; c < d; ++c) out[c] += p * v[c];
      }
    }
  }
  return context;
}

namespace {

// Normalizes each row of x [rows x h] in place into `normalized`, writes
// scale * normalized + shift to `out`.
void layer_norm(std::span<const double> x, std::span<const double> scale, std::span<const double> shift,
                std::vector<double>& normalized, std::vector<double>& inv_std, std::vector<double>& out,
                std::size_t rows, std::size_t h) {
  normalized.resize(rows * h);
  inv_std.resize(rows);
  out.resize(rows * h);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * h;
    double mean = 0.0;
    for (std::size_t c = 0; c < h; ++c) mean += xr[c];
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (std::size_t c = 0; c < h; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<double>(h);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    inv_std[r] = inv;
    for (std::size_t c = 0; c < h; ++c) {
      const double n = (xr[c] - mean) * inv;
      normalized[r * h + c] = n;
      out[r * h + c] = n * scale[c] + shift[c];
    }
  }
}

ExampleTrace forward_example(const Parameters& params, const EncodedPair& pair) {
  const ModelConfig& cfg = params.config();
  const ParameterLayout& lay = params.layout();
  const std::size_t h = cfg.hidden_size;
  const std::size_t f = cfg.ff_size;

  if (pair.token_ids.size() != pair.segment_ids.size() || pair.token_ids.size() != pair.attention_mask.size()) {
    throw Error(ErrorCode::kInvalidArgument, "pair '" + pair.pair_id + "': sequence lengths differ");
  }
  std::size_t t_len = pair.attention_mask.size();
  while (t_len > 0 && pair.attention_mask[t_len - 1] == 0) --t_len;
  if (t_len == 0) throw Error(ErrorCode::kInvalidArgument, "pair '" + pair.pair_id + "': no unmasked positions");
  if (pair.length() > cfg.max_positions) {
    throw Error(ErrorCode::kInvalidArgument, "pair '" + pair.pair_id + "': length " + std::to_string(pair.length()) +
                                                 " exceeds max_positions " + std::to_string(cfg.max_positions));
  }

  ExampleTrace ex;
  ex.token_ids.assign(pair.token_ids.begin(), pair.token_ids.begin() + static_cast<std::ptrdiff_t>(t_len));
  ex.segment_ids.assign(pair.segment_ids.begin(), pair.segment_ids.begin() + static_cast<std::ptrdiff_t>(t_len));
  ex.mask.assign(pair.attention_mask.begin(), pair.attention_mask.begin() + static_cast<std::ptrdiff_t>(t_len));

  std::vector<double> x(t_len * h);
  {
    const auto tok = params.tensor(lay.token_embeddings);
    const auto seg = params.tensor(lay.segment_embeddings);
    const auto pos = params.tensor(lay.position_embeddings);
    for (std::size_t t = 0; t < t_len; ++t) {
      const TokenId id = ex.token_ids[t];
      if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
        throw Error(ErrorCode::kInvalidArgument, "pair '" + pair.pair_id + "': token id " + std::to_string(id) +
                                                     " outside vocabulary of size " + std::to_string(cfg.vocab_size));
      }
      const std::int32_t s = ex.segment_ids[t];
      if (s != 0 && s != 1) throw Error(ErrorCode::kInvalidArgument, "pair '" + pair.pair_id + "': bad segment id");
      for (std::size_t c = 0; c < h; ++c) {
        x[t * h + c] = tok[static_cast<std::size_t>(id) * h + c] + seg[static_cast<std::size_t>(s) * h + c] +
                       pos[t * h + c];
      }
    }
  }

  for (const LayerTensors& lt : lay.layers) {
    LayerCache cache;
    cache.input = x;
    cache.q.resize(t_len * h);
    cache.k.resize(t_len * h);
    cache.v.resize(t_len * h);
    kernels::matmul_bias(x, params.tensor(lt.query_w), params.tensor(lt.query_b), cache.q, t_len, h, h);
    kernels::matmul_bias(x, params.tensor(lt.key_w), params.tensor(lt.key_b), cache.k, t_len, h, h);
    kernels::matmul_bias(x, params.tensor(lt.value_w), params.tensor(lt.value_b), cache.v, t_len, h, h);
    cache.context = attention(cache.q, cache.k, cache.v, ex.mask, h, cfg.num_heads, &cache.probabilities);

    std::vector<double> residual(t_len * h);
    kernels::matmul_bias(cache.context, params.tensor(lt.output_w), params.tensor(lt.output_b), residual, t_len, h,
                         h);
    for (std::size_t i = 0; i < residual.size(); ++i) residual[i] += x[i];
    layer_norm(residual, params.tensor(lt.ln1_scale), params.tensor(lt.ln1_shift), cache.ln1_normalized,
               cache.ln1_inv_std, cache.hidden1, t_len, h);

    cache.ff_pre.resize(t_len * f);
    kernels::matmul_bias(cache.hidden1, params.tensor(lt.ff_in_w), params.tensor(lt.ff_in_b), cache.ff_pre, t_len, h,
                         f);
    cache.ff_act.resize(t_len * f);
    for (std::size_t i = 0; i < cache.ff_pre.size(); ++i) cache.ff_act[i] = kernels::gelu(cache.ff_pre[i]);
    kernels::matmul_bias(cache.ff_act, params.tensor(lt.ff_out_w), params.tensor(lt.ff_out_b), residual, t_len, f, h);
    for (std::size_t i = 0; i < residual.size(); ++i) residual[i] += cache.hidden1[i];
    layer_norm(residual, params.tensor(lt.ln2_scale), params.tensor(lt.ln2_shift), cache.ln2_normalized,
               cache.ln2_inv_std, x, t_len, h);
    ex.layers.push_back(std::move(cache));
  }

  ex.cls_hidden.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(h));
  ex.pooled.resize(h);
  kernels::matmul_bias(ex.cls_hidden, params.tensor(lay.pooler_w), params.tensor(lay.pooler_b), ex.pooled, 1, h, h);
  for (double& p : ex.pooled) p = std::tanh(p);
  kernels::matmul_bias(ex.pooled, params.tensor(lay.classifier_w), params.tensor(lay.classifier_b),
                       std::span<double>(ex.logits, 2), 1, h, 2);
  return ex;
}

}  // namespace

Logits forward(const Parameters& params, std::span<const EncodedPair> batch, ForwardTrace* trace) {
  Logits logits;
  logits.values.reserve(2 * batch.size());
  if (trace) {
    trace->config = params.config();
    trace->examples.clear();
    trace->examples.reserve(batch.size());
  }
  for (const auto& pair : batch) {
    ExampleTrace ex = forward_example(params, pair);
    logits.values.push_back(ex.logits[0]);
    logits.values.push_back(ex.logits[1]);
    if (trace) trace->examples.push_back(std::move(ex));
  }
  return logits;
}

bool predict_label(double logit_different, double logit_same) { return logit_same > logit_different; }

std::vector<bool> predict(const Parameters& params, std::span<const EncodedPair> batch) {
  const Logits logits = forward(params, batch);
  std::vector<bool> out(logits.batch_size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = predict_label(logits.at(i, 0), logits.at(i, 1));
  return out;
}

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'S', 'M', 'O', 'D', 'E', 'L', '\0'};

struct ByteReader {
  std::istream& in;

  std::uint64_t u64() {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error(ErrorCode::kFormat, "truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::kFormat, "truncated checkpoint");
    return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
};

}  // namespace

void save_checkpoint(std::ostream& out, const Parameters& params) {
  const ModelConfig& c = params.config();
  std::string buf(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_u32(buf, kCheckpointVersion);
  for (std::size_t v : {c.num_layers, c.hidden_size, c.num_heads, c.ff_size, c.max_positions, c.vocab_size}) {
    detail::put_u64(buf, v);
  }
  detail::put_u32(buf, static_cast<std::uint32_t>(c.preset_name.size()));
  buf += c.preset_name;
  detail::put_u64(buf, params.values().size());
  buf.reserve(buf.size() + 8 * params.values().size());
  for (double v : params.values()) detail::put_f64(buf, v);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::kIo, "checkpoint write failed");
}

void save_checkpoint(const std::string& path, const Parameters& params) {
  std::ostringstream ss;
  save_checkpoint(ss, params);
  detail::write_file(path, ss.str());
}

Parameters load_checkpoint(std::istream& in) {
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::kFormat, "not a model checkpoint (bad magic)");
  }
  ByteReader r{in};
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kFormat, "unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  c.num_layers = r.u64();
  c.hidden_size = r.u64();
  c.num_heads = r.u64();
  c.ff_size = r.u64();
  c.max_positions = r.u64();
  c.vocab_size = r.u64();
  const std::uint32_t name_len = r.u32();
  if (name_len > 256) throw Error(ErrorCode::kFormat, "corrupt checkpoint header");
  c.preset_name.resize(name_len);
  if (!in.read(c.preset_name.data(), name_len)) throw Error(ErrorCode::kFormat, "truncated checkpoint");
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint header: ") + e.what());
  }
  Parameters params(c);
  const std::uint64_t count = r.u64();
  if (count != params.values().size()) {
    throw Error(ErrorCode::kFormat, "checkpoint holds " + std::to_string(count) + " values, config requires " +
                                        std::to_string(params.values().size()));
  }
  for (double& v : params.values()) v = std::bit_cast<double>(r.u64());
  return params;
}

Parameters load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open checkpoint '" + path + "'");
  return load_checkpoint(in);
}

Parameters load_checkpoint(std::istream& in, const ModelConfig& expected) {
  Parameters params = load_checkpoint(in);
  const ModelConfig& got = params.config();
  if (got.num_layers != expected.num_layers || got.hidden_size != expected.hidden_size ||
      got.num_heads != expected.num_heads || got.ff_size != expected.ff_size ||
      got.max_positions != expected.max_positions || got.vocab_size != expected.vocab_size) {
    throw Error(ErrorCode::kFormat, "checkpoint config does not match the expected model config");
  }
  return params;
}

}  // namespace sameside
