#include "sameside/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "json.hpp"
#include "sameside/error.hpp"
#include "sameside/random.hpp"

namespace sameside {

SparseVector BowFeaturizer::featurize(const ArgumentPairRecord& rec) const {
  std::map<std::uint32_t, double> counts;
  const auto offset = static_cast<std::uint32_t>(vocab_->size());
  for (TokenId id : tokenize(rec.argument1, *vocab_)) {
    if (static_cast<std::size_t>(id) >= kNumSpecialTokens) counts[static_cast<std::uint32_t>(id)] += 1.0;
  }
  for (TokenId id : tokenize(rec.argument2, *vocab_)) {
    if (static_cast<std::size_t>(id) >= kNumSpecialTokens) counts[offset + static_cast<std::uint32_t>(id)] += 1.0;
  }
  return SparseVector(counts.begin(), counts.end());
}

double LinearModel::score(const SparseVector& x) const {
  double s = bias;
  for (const auto& [i, v] : x) {
    if (i < weights.size()) s += weights[i] * v;
  }
  return s;
}

std::string LinearModel::to_json() const {
  nlohmann::json sparse = nlohmann::json::array();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] != 0.0) sparse.push_back({i, weights[i]});
  }
  nlohmann::json j = {{"label", kBaselineLabel}, {"lambda", lambda}, {"epochs", epochs},
                      {"seed", seed},            {"bias", bias},     {"feature_dim", weights.size()},
                      {"weights", sparse}};
  return j.dump() + "\n";
}

LinearModel LinearModel::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    LinearModel m;
    m.lambda = j.at("lambda").get<double>();
    m.epochs = j.at("epochs").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.bias = j.at("bias").get<double>();
    m.weights.assign(j.at("feature_dim").get<std::size_t>(), 0.0);
    for (const auto& entry : j.at("weights")) {
      const auto index = entry.at(0).get<std::size_t>();
      if (index >= m.weights.size()) throw Error(ErrorCode::kFormat, "svm model: weight index out of range");
      m.weights[index] = entry.at(1).get<double>();
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("svm model: ") + e.what());
  }
}

double svm_objective(const std::vector<double>& weights, double bias, double lambda,
                     const std::vector<SparseVector>& features, const std::vector<bool>& labels) {
  double norm = bias * bias;
  for (double w : weights) norm += w * w;
  double hinge = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    double s = bias;
    for (const auto& [j, v] : features[i]) s += weights[j] * v;
    const double y = labels[i] ? 1.0 : -1.0;
    hinge += std::max(0.0, 1.0 - y * s);
  }
  return 0.5 * lambda * norm + hinge / static_cast<double>(features.size());
}

LinearModel train_linear_svm(const std::vector<SparseVector>& features, const std::vector<bool>& labels,
                             std::size_t feature_dim, double lambda, std::size_t epochs, std::uint64_t seed,
                             SvmTrainTrace* trace) {
  if (features.empty()) throw Error(ErrorCode::kEmptyData, "svm: training set is empty");
  if (features.size() != labels.size()) throw Error(ErrorCode::kInvalidArgument, "svm: feature/label count mismatch");
  if (!(lambda > 0.0)) throw Error(ErrorCode::kInvalidArgument, "svm: lambda must be positive");
  const auto positives = std::count(labels.begin(), labels.end(), true);
  if (positives == 0 || static_cast<std::size_t>(positives) == labels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "svm: training data contains a single class");
  }

  // w = scale * v, with the bias as coordinate feature_dim.
  std::vector<double> v(feature_dim + 1, 0.0);
  double scale = 1.0;
  double sq_norm = 0.0;  // |w|^2
  const double radius_sq = 1.0 / lambda;

  std::vector<double> avg(feature_dim + 1, 0.0);
  std::vector<std::size_t> order(features.size());
  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, epoch));
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t idx : order) {
      ++t;
      const SparseVector& x = features[idx];
      const double y = labels[idx] ? 1.0 : -1.0;
      double margin = v[feature_dim];
      for (const auto& [j, val] : x) margin += v[j] * val;
      margin *= scale * y;

      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double shrink = 1.0 - eta * lambda;
      if (shrink <= 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        scale = 1.0;
        sq_norm = 0.0;
      } else {
        scale *= shrink;
        sq_norm *= shrink * shrink;
      }
      if (margin < 1.0) {
        const double step = eta * y / scale;
        const auto bump = [&](std::size_t j, double val) {
          const double before = v[j];
          v[j] += step * val;
          sq_norm += scale * scale * (v[j] * v[j] - before * before);
        };
        for (const auto& [j, val] : x) bump(j, val);
        bump(feature_dim, 1.0);
      }
      if (sq_norm > radius_sq) {
        scale *= std::sqrt(radius_sq / sq_norm);
        sq_norm = radius_sq;
      }
      if (scale < 1e-100) {
        for (double& e : v) e *= scale;
        scale = 1.0;
      }
      for (std::size_t j = 0; j < v.size(); ++j) avg[j] += scale * v[j];
    }
    if (trace) {
      const double n = static_cast<double>(t);
      std::vector<double> w(avg.begin(), avg.end() - 1);
      for (double& e : w) e /= n;
      trace->epoch_objective.push_back(svm_objective(w, avg.back() / n, lambda, features, labels));
    }
  }

  LinearModel model;
  model.weights.resize(feature_dim);
  const double steps = static_cast<double>(std::max<std::uint64_t>(t, 1));
  for (std::size_t j = 0; j < feature_dim; ++j) model.weights[j] = avg[j] / steps;
  model.bias = avg[feature_dim] / steps;
  model.lambda = lambda;
  model.epochs = epochs;
  model.seed = seed;
  return model;
}

LinearModel train_svm(const Corpus& train, const BowFeaturizer& featurizer, double lambda, std::size_t epochs,
                      std::uint64_t seed, SvmTrainTrace* trace) {
  if (train.empty()) throw Error(ErrorCode::kEmptyData, "svm: training corpus is empty");
  std::vector<SparseVector> features;
  std::vector<bool> labels;
  features.reserve(train.size());
  for (const auto& rec : train.records()) {
    features.push_back(featurizer.featurize(rec));
    labels.push_back(rec.is_same_stance);
  }
  return train_linear_svm(features, labels, featurizer.feature_dim(), lambda, epochs, seed, trace);
}

bool predict_svm(const LinearModel& model, const SparseVector& x) { return model.score(x) > 0.0; }

bool predict_svm(const LinearModel& model, const ArgumentPairRecord& rec, const BowFeaturizer& featurizer) {
  return predict_svm(model, featurizer.featurize(rec));
}

}  // namespace sameside
