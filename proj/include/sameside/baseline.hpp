#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sameside/corpus.hpp"
#include "sameside/tokenizer.hpp"

namespace sameside {

// Sorted (index, value) pairs with unique indices.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

// Bag-of-subwords pair features: counts of argument1's pieces in the first
// |V| slots, argument2's in the second. Special tokens are not counted.
class BowFeaturizer {
 public:
  explicit BowFeaturizer(const Vocabulary& vocab) : vocab_(&vocab) {}

  std::size_t feature_dim() const { return 2 * vocab_->size(); }
  const Vocabulary& vocab() const { return *vocab_; }

  SparseVector featurize(const ArgumentPairRecord& rec) const;

 private:
  const Vocabulary* vocab_;
};

inline SparseVector featurize_pair(const ArgumentPairRecord& rec, const BowFeaturizer& featurizer) {
  return featurizer.featurize(rec);
}

inline constexpr double kDefaultSvmLambda = 1e-4;
inline constexpr std::size_t kDefaultSvmEpochs = 5;

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  double lambda = kDefaultSvmLambda;
  std::size_t epochs = kDefaultSvmEpochs;
  std::uint64_t seed = 0;

  double score(const SparseVector& x) const;
  std::string to_json() const;
  static LinearModel from_json(const std::string& text);
};

// Regularized hinge objective: lambda/2 (|w|^2 + b^2) + mean hinge loss.
double svm_objective(const std::vector<double>& weights, double bias, double lambda,
                     const std::vector<SparseVector>& features, const std::vector<bool>& labels);

struct SvmTrainTrace {
  // Objective at the running average of all iterates so far, taken at the
  // end of each epoch.
  std::vector<double> epoch_objective;
};

// Pegasos on precomputed features: step t uses rate 1/(lambda t); the bias
// is trained as a regularized constant feature; iterates are projected onto
// the ball of radius 1/sqrt(lambda). Labels map false -> -1, true -> +1.
// Returns the average of all iterates.
LinearModel train_linear_svm(const std::vector<SparseVector>& features, const std::vector<bool>& labels,
                             std::size_t feature_dim, double lambda, std::size_t epochs, std::uint64_t seed,
                             SvmTrainTrace* trace = nullptr);

LinearModel train_svm(const Corpus& train, const BowFeaturizer& featurizer, double lambda = kDefaultSvmLambda,
                      std::size_t epochs = kDefaultSvmEpochs, std::uint64_t seed = 0, SvmTrainTrace* trace = nullptr);

// sign(w.x + b) > 0 is same-side; a zero score is false.
bool predict_svm(const LinearModel& model, const ArgumentPairRecord& rec, const BowFeaturizer& featurizer);
bool predict_svm(const LinearModel& model, const SparseVector& x);

// Reports produced by this module carry this label.
inline constexpr const char* kBaselineLabel = "baseline: reimplemented";

}  // namespace sameside
