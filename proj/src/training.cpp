#include "sameside/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "kernels.hpp"
#include "sameside/error.hpp"
#include "sameside/random.hpp"

namespace sameside {

void Hyperparams::validate() const {
  const auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidArgument, "hyperparams: " + what); };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) fail("beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) fail("beta2 must lie in (0, 1)");
  if (!(epsilon > 0.0)) fail("epsilon must be positive");
  if (batch_size == 0) fail("batch_size must be >= 1");
}

std::string Hyperparams::to_json() const {
  nlohmann::json j = {{"learning_rate", learning_rate}, {"beta1", beta1}, {"beta2", beta2}, {"epsilon", epsilon},
                      {"batch_size", batch_size},       {"epochs", epochs}, {"seed", seed}};
  return j.dump();
}

namespace {

// -log softmax(z)[label] via log-sum-exp.
double example_loss(double z0, double z1, bool label) {
  const double m = std::max(z0, z1);
  const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
  return lse - (label ? z1 : z0);
}

void softmax2(double z0, double z1, double& p0, double& p1) {
  const double m = std::max(z0, z1);
  const double e0 = std::exp(z0 - m);
  const double e1 = std::exp(z1 - m);
  p0 = e0 / (e0 + e1);
  p1 = e1 / (e0 + e1);
}

// In: d_out w.r.t. the layer-norm output. Out: d_in w.r.t. its input.
void layer_norm_backward(std::span<const double> d_out, std::span<const double> normalized,
                         std::span<const double> inv_std, std::span<const double> scale, std::span<double> d_scale,
                         std::span<double> d_shift, std::vector<double>& d_in, std::size_t rows, std::size_t h) {
  d_in.resize(rows * h);
  std::vector<double> dn(h);
  for (std::size_t r = 0; r < rows; ++r) {
    double mean_dn = 0.0, mean_dn_n = 0.0;
    for (std::size_t c = 0; c < h; ++c) {
      const double g = d_out[r * h + c];
      const double n = normalized[r * h + c];
      d_scale[c] += g * n;
      d_shift[c] += g;
      dn[c] = g * scale[c];
      mean_dn += dn[c];
      mean_dn_n += dn[c] * n;
    }
    mean_dn /= static_cast<double>(h);
    mean_dn_n /= static_cast<double>(h);
    for (std::size_t c = 0; c < h; ++c) {
      d_in[r * h + c] = inv_std[r] * (dn[c] - mean_dn - normalized[r * h + c] * mean_dn_n);
    }
  }
}

void attention_backward(const LayerCache& c, std::span<const double> d_context, std::size_t t_len, std::size_t h,
                        std::size_t heads, std::vector<double>& dq, std::vector<double>& dk,
                        std::vector<double>& dv) {
  const std::size_t d = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  dq.assign(t_len * h, 0.0);
  dk.assign(t_len * h, 0.0);
  dv.assign(t_len * h, 0.0);
  std::vector<double> d_prob(t_len);
  for (std::size_t head = 0; head < heads; ++head) {
    const std::size_t col = head * d;
    for (std::size_t i = 0; i < t_len; ++i) {
      const double* prob = c.probabilities.data() + (head * t_len + i) * t_len;
      const double* dctx = d_context.data() + i * h + col;
      double weighted = 0.0;
      for (std::size_t j = 0; j < t_len; ++j) {
        const double* v = c.v.data() + j * h + col;
        double dot = 0.0;
        for (std::size_t x = 0; x < d; ++x) dot += dctx[x] * v[x];
        d_prob[j] = dot;
        weighted += prob[j] * dot;
        if (prob[j] != 0.0) {
          double* dvj = dv.data() + j * h + col;
          for (std::size_t x = 0; x < d; ++x) dvj[x] += prob[j] * dctx[x];
        }
      }
      const double* qi = c.q.data() + i * h + col;
      double* dqi = dq.data() + i * h + col;
      for (std::size_t j = 0; j < t_len; ++j) {
        const double d_score = prob[j] * (d_prob[j] - weighted) * scale;
        if (d_score == 0.0) continue;
        const double* kj = c.k.data() + j * h + col;
        double* dkj = dk.data() + j * h + col;
        for (std::size_t x = 0; x < d; ++x) {
          dqi[x] += d_score * kj[x];
          dkj[x] += d_score * qi[x];
        }
      }
    }
  }
}

void backward_example(const Parameters& params, const ExampleTrace& ex, bool label, double weight,
                      Gradients& grads) {
  const ModelConfig& cfg = params.config();
  const ParameterLayout& lay = params.layout();
  const std::size_t h = cfg.hidden_size;
  const std::size_t f = cfg.ff_size;
  const std::size_t t_len = ex.token_ids.size();

  double p0, p1;
  softmax2(ex.logits[0], ex.logits[1], p0, p1);
  const double d_logits[2] = {weight * (p0 - (label ? 0.0 : 1.0)), weight * (p1 - (label ? 1.0 : 0.0))};

  kernels::accumulate_weight_grad(ex.pooled, std::span<const double>(d_logits, 2), grads.tensor(lay.classifier_w),
                                  grads.tensor(lay.classifier_b), 1, h, 2);
  std::vector<double> d_pooled(h);
  kernels::matmul_transposed(std::span<const double>(d_logits, 2), params.tensor(lay.classifier_w), d_pooled, 1, h, 2,
                             false);
  for (std::size_t c = 0; c < h; ++c) d_pooled[c] *= 1.0 - ex.pooled[c] * ex.pooled[c];
  kernels::accumulate_weight_grad(ex.cls_hidden, d_pooled, grads.tensor(lay.pooler_w), grads.tensor(lay.pooler_b), 1,
                                  h, h);

  std::vector<double> d_x(t_len * h, 0.0);
  kernels::matmul_transposed(d_pooled, params.tensor(lay.pooler_w), std::span<double>(d_x).first(h), 1, h, h, false);

  std::vector<double> d_r2, d_h1, d_act(t_len * f), d_r1, d_ctx(t_len * h), dq, dk, dv;
  for (std::size_t l = cfg.num_layers; l-- > 0;) {
    const LayerTensors& lt = lay.layers[l];
    const LayerCache& c = ex.layers[l];

    layer_norm_backward(d_x, c.ln2_normalized, c.ln2_inv_std, params.tensor(lt.ln2_scale),
                        grads.tensor(lt.ln2_scale), grads.tensor(lt.ln2_shift), d_r2, t_len, h);
    d_h1 = d_r2;
    kernels::accumulate_weight_grad(c.ff_act, d_r2, grads.tensor(lt.ff_out_w), grads.tensor(lt.ff_out_b), t_len, f,
                                    h);
    kernels::matmul_transposed(d_r2, params.tensor(lt.ff_out_w), d_act, t_len, f, h, false);
    for (std::size_t i = 0; i < d_act.size(); ++i) d_act[i] *= kernels::gelu_derivative(c.ff_pre[i]);
    kernels::accumulate_weight_grad(c.hidden1, d_act, grads.tensor(lt.ff_in_w), grads.tensor(lt.ff_in_b), t_len, h,
                                    f);
    kernels::matmul_transposed(d_act, params.tensor(lt.ff_in_w), d_h1, t_len, h, f, true);

    layer_norm_backward(d_h1, c.ln1_normalized, c.ln1_inv_std, params.tensor(lt.ln1_scale),
                        grads.tensor(lt.ln1_scale), grads.tensor(lt.ln1_shift), d_r1, t_len, h);
    kernels::accumulate_weight_grad(c.context, d_r1, grads.tensor(lt.output_w), grads.tensor(lt.output_b), t_len, h,
                                    h);
    kernels::matmul_transposed(d_r1, params.tensor(lt.output_w), d_ctx, t_len, h, h, false);
    attention_backward(c, d_ctx, t_len, h, cfg.num_heads, dq, dk, dv);

    d_x = d_r1;
    kernels::accumulate_weight_grad(c.input, dq, grads.tensor(lt.query_w), grads.tensor(lt.query_b), t_len, h, h);
    kernels::accumulate_weight_grad(c.input, dk, grads.tensor(lt.key_w), grads.tensor(lt.key_b), t_len, h, h);
    kernels::accumulate_weight_grad(c.input, dv, grads.tensor(lt.value_w), grads.tensor(lt.value_b), t_len, h, h);
    kernels::matmul_transposed(dq, params.tensor(lt.query_w), d_x, t_len, h, h, true);
    kernels::matmul_transposed(dk, params.tensor(lt.key_w), d_x, t_len, h, h, true);
    kernels::matmul_transposed(dv, params.tensor(lt.value_w), d_x, t_len, h, h, true);
  }

  auto g_tok = grads.tensor(lay.token_embeddings);
  auto g_seg = grads.tensor(lay.segment_embeddings);
  auto g_pos = grads.tensor(lay.position_embeddings);
  for (std::size_t t = 0; t < t_len; ++t) {
    const std::size_t id = static_cast<std::size_t>(ex.token_ids[t]);
    const std::size_t s = static_cast<std::size_t>(ex.segment_ids[t]);
    for (std::size_t c = 0; c < h; ++c) {
      const double g = d_x[t * h + c];
      g_tok[id * h + c] += g;
      g_seg[s * h + c] += g;
      g_pos[t * h + c] += g;
    }
  }
}

}  // namespace

double cross_entropy(const Logits& logits, const std::vector<bool>& labels) {
  const std::size_t b = logits.batch_size();
  if (b == 0) throw Error(ErrorCode::kInvalidArgument, "cross_entropy: empty batch");
  if (labels.size() != b) throw Error(ErrorCode::kInvalidArgument, "cross_entropy: label count mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < b; ++i) sum += example_loss(logits.at(i, 0), logits.at(i, 1), labels[i]);
  return sum / static_cast<double>(b);
}

void backward_accumulate(const Parameters& params, const ForwardTrace& trace, const std::vector<bool>& labels,
                         double weight, Gradients& grads) {
  if (labels.size() != trace.examples.size()) {
    throw Error(ErrorCode::kInvalidArgument, "backward: trace holds " + std::to_string(trace.examples.size()) +
                                                 " examples but " + std::to_string(labels.size()) + " labels given");
  }
  if (!(trace.config == params.config()) || !(grads.config() == params.config())) {
    throw Error(ErrorCode::kInvalidArgument, "backward: trace or gradient config does not match parameters");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (trace.examples[i].layers.size() != params.config().num_layers) {
      throw Error(ErrorCode::kInvalidArgument, "backward: trace layer count mismatch");
    }
    backward_example(params, trace.examples[i], labels[i], weight, grads);
  }
}

Gradients backward(const Parameters& params, const ForwardTrace& trace, const std::vector<bool>& labels) {
  Gradients grads(params.config());
  if (labels.empty()) return grads;
  backward_accumulate(params, trace, labels, 1.0 / static_cast<double>(labels.size()), grads);
  return grads;
}

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state, const Hyperparams& hp,
                 const std::function<std::string(std::size_t)>& describe) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw Error(ErrorCode::kInvalidArgument, "adam: parameter, gradient and state sizes differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw Error(ErrorCode::kNumeric, "adam: non-finite gradient in " +
                                           (describe ? describe(i) : "element " + std::to_string(i)) + " at step " +
                                           std::to_string(state.step + 1));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(hp.beta1, t);
  const double correction2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = hp.beta1 * m + (1.0 - hp.beta1) * g;
    v = hp.beta2 * v + (1.0 - hp.beta2) * g * g;
    if (m == 0.0) continue;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= hp.learning_rate * m_hat / (std::sqrt(v_hat) + hp.epsilon);
  }
}

void adam_step(Parameters& params, const Gradients& grads, AdamState& state, const Hyperparams& hp) {
  const ParameterLayout& layout = params.layout();
  adam_update(params.values(), grads.values(), state, hp, [&layout](std::size_t i) {
    const TensorInfo& t = layout.owner_of(i);
    return "tensor '" + t.name + "' (element " + std::to_string(i - t.offset) + ")";
  });
}

std::string TrainReport::to_json(bool include_timing) const {
  nlohmann::json j;
  j["preset"] = preset;
  j["epoch_losses"] = epoch_losses;
  j["train_accuracy"] = train_accuracy;
  j["num_examples"] = num_examples;
  j["max_seq_len"] = max_seq_len;
  j["seed"] = seed;
  j["hyperparams"] = nlohmann::json::parse(hyperparams.to_json());
  if (include_timing) j["wall_seconds"] = wall_seconds;
  return j.dump(2) + "\n";
}

FineTuneResult fine_tune_encoded(const ModelConfig& config, std::span<const EncodedPair> train,
                                 const Hyperparams& hp) {
  hp.validate();
  if (train.empty()) throw Error(ErrorCode::kEmptyData, "fine_tune: training set is empty");
  const auto started = std::chrono::steady_clock::now();

  FineTuneResult result{init_params(config, hp.seed), {}};
  Parameters& params = result.params;
  TrainReport& report = result.report;
  report.seed = hp.seed;
  report.hyperparams = hp;
  report.num_examples = train.size();
  report.max_seq_len = train.front().length();
  report.preset = config.preset_name;

  Gradients grads(config);
  AdamState state(params.values().size());
  std::vector<std::size_t> order(train.size());
  ForwardTrace trace;
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(hp.seed, 1000 + epoch));
    rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      const std::size_t end = std::min(order.size(), start + hp.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      grads.set_zero();
      for (std::size_t k = start; k < end; ++k) {
        const EncodedPair& pair = train[order[k]];
        try {
          const Logits logits = forward(params, std::span<const EncodedPair>(&pair, 1), &trace);
          loss_sum += example_loss(logits.at(0, 0), logits.at(0, 1), pair.label);
          backward_accumulate(params, trace, {pair.label}, weight, grads);
        } catch (const Error& e) {
          throw Error(e.code(), "fine_tune: pair '" + pair.pair_id + "': " + e.what());
        }
      }
      adam_step(params, grads, state, hp);
    }
    report.epoch_losses.push_back(loss_sum / static_cast<double>(train.size()));
  }

  std::size_t correct = 0;
  for (const auto& pair : train) {
    if (predict(params, std::span<const EncodedPair>(&pair, 1))[0] == pair.label) ++correct;
  }
  report.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

FineTuneResult fine_tune(const ModelConfig& config, const Vocabulary& vocab, const Corpus& train,
                         const Hyperparams& hp, std::size_t max_seq_len) {
  if (train.empty()) throw Error(ErrorCode::kEmptyData, "fine_tune: training corpus is empty");
  if (config.vocab_size != vocab.size()) {
    throw Error(ErrorCode::kInvalidArgument, "fine_tune: model vocab_size " + std::to_string(config.vocab_size) +
                                                 " differs from vocabulary size " + std::to_string(vocab.size()));
  }
  const std::vector<EncodedPair> encoded = encode_corpus(train, vocab, max_seq_len);
  return fine_tune_encoded(config, encoded, hp);
}

std::vector<EncodedPair> random_batch(const ModelConfig& config, std::size_t batch_size, std::size_t seq_len,
                                      std::uint64_t seed) {
  if (seq_len < 5 || seq_len > config.max_positions) {
    throw Error(ErrorCode::kInvalidArgument, "random_batch: seq_len must lie in [5, max_positions]");
  }
  if (config.vocab_size <= kNumSpecialTokens) {
    throw Error(ErrorCode::kInvalidArgument, "random_batch: vocabulary has no ordinary tokens");
  }
  Rng rng(seed);
  std::vector<EncodedPair> batch;
  for (std::size_t b = 0; b < batch_size; ++b) {
    const std::size_t used = 5 + rng.uniform_index(seq_len - 4);  // in [5, seq_len]
    const std::size_t len_a = 1 + rng.uniform_index(used - 4);
    EncodedPair p;
    p.pair_id = "random-" + std::to_string(b);
    p.label = rng.uniform_index(2) == 1;
    p.token_ids.assign(seq_len, kPadId);
    p.segment_ids.assign(seq_len, 1);
    p.attention_mask.assign(seq_len, 0);
    for (std::size_t t = 0; t < used; ++t) {
      p.attention_mask[t] = 1;
      p.token_ids[t] = static_cast<TokenId>(kNumSpecialTokens + rng.uniform_index(config.vocab_size - kNumSpecialTokens));
      if (t <= len_a + 1) p.segment_ids[t] = 0;
    }
    p.token_ids[0] = kClsId;
    p.token_ids[len_a + 1] = kSepId;
    p.token_ids[used - 1] = kSepId;
    batch.push_back(std::move(p));
  }
  return batch;
}

double gradient_check(const ModelConfig& config, std::uint64_t seed, std::span<const EncodedPair> batch, double h,
                      GradientCheckScope scope) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "gradient_check: empty batch");
  if (!(h > 0.0)) throw Error(ErrorCode::kInvalidArgument, "gradient_check: step must be positive");
  Parameters params = init_params(config, seed);
  // The default 0.02 spread leaves attention score gradients near 1e-11,
  // below what central differences can resolve; widen it.
  Rng spread(derive_seed(seed, 6));
  for (double& v : params.values()) v += kGradientCheckSpread * spread.normal();
  std::vector<bool> labels;
  for (const auto& p : batch) labels.push_back(p.label);

  ForwardTrace trace;
  forward(params, batch, &trace);
  const Gradients analytic = backward(params, trace, labels);

  // Candidate elements: every tensor, with embedding tables limited to the
  // rows this batch can reach.
  const ParameterLayout& lay = params.layout();
  std::size_t max_active = 0;
  std::vector<std::size_t> used_tokens;
  for (const auto& p : batch) {
    max_active = std::max(max_active, p.unpadded_length());
    for (std::size_t t = 0; t < p.length(); ++t) {
      if (p.attention_mask[t]) used_tokens.push_back(static_cast<std::size_t>(p.token_ids[t]));
    }
  }
  std::sort(used_tokens.begin(), used_tokens.end());
  used_tokens.erase(std::unique(used_tokens.begin(), used_tokens.end()), used_tokens.end());

  std::vector<std::size_t> tensor_ids;
  if (scope == GradientCheckScope::kClassifierOnly) {
    tensor_ids = {lay.classifier_w, lay.classifier_b};
  } else {
    // Key biases shift every score in a softmax row equally, so their
    // gradient is identically zero and a relative error is meaningless.
    for (std::size_t i = 0; i < lay.tensors().size(); ++i) {
      const bool key_bias =
          std::any_of(lay.layers.begin(), lay.layers.end(), [i](const LayerTensors& lt) { return lt.key_b == i; });
      if (!key_bias) tensor_ids.push_back(i);
    }
  }

  Rng rng(derive_seed(seed, 7));
  const std::size_t h_size = config.hidden_size;
  std::vector<std::size_t> elements;
  for (std::size_t n = 0; n < kGradientCheckSamples; ++n) {
    const std::size_t tid = tensor_ids[rng.uniform_index(tensor_ids.size())];
    const TensorInfo& info = lay.tensor(tid);
    std::size_t local;
    if (tid == lay.token_embeddings) {
      local = used_tokens[rng.uniform_index(used_tokens.size())] * h_size + rng.uniform_index(h_size);
    } else if (tid == lay.position_embeddings) {
      local = rng.uniform_index(max_active) * h_size + rng.uniform_index(h_size);
    } else {
      local = rng.uniform_index(info.size());
    }
    elements.push_back(info.offset + local);
  }

  double worst = 0.0;
  auto values = params.values();
  for (std::size_t e : elements) {
    const double saved = values[e];
    values[e] = saved + h;
    const double up = cross_entropy(forward(params, batch), labels);
    values[e] = saved - h;
    const double down = cross_entropy(forward(params, batch), labels);
    values[e] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double exact = analytic.values()[e];
    const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(exact - numeric) / denom);
  }
  return worst;
}

}  // namespace sameside
