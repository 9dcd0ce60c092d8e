#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "iwes/data.hpp"
#include "iwes/errors.hpp"
#include "iwes/rng.hpp"

namespace iwes {

// Anything exposing per-class probabilities P(y|x).
class ProbabilisticClassifier {
public:
  virtual ~ProbabilisticClassifier() = default;
  virtual std::vector<double> predict_proba(std::span<const double> features) const = 0;
  virtual int num_classes() const = 0;
};

// Penultimate-layer representation used by the coreset and BADGE selectors.
class EmbeddingExtractor {
public:
  virtual ~EmbeddingExtractor() = default;
  virtual std::vector<double> embed(std::span<const double> features) const = 0;
  virtual std::size_t embedding_dim() const = 0;
};

class TrainedModel : public ProbabilisticClassifier, public EmbeddingExtractor {};

// Bounded loss on (probability vector, label), range [0,1].
class LossFunction {
public:
  virtual ~LossFunction() = default;
  virtual double loss(std::span<const double> prediction, int label) const = 0;
};

class WeightedTrainer {
public:
  virtual ~WeightedTrainer() = default;
  // Trains a model minimizing sum_i w_i * loss(h(x_i), y_i) over the subset.
  virtual std::shared_ptr<const TrainedModel> train(const std::vector<WeightedExample>& subset,
                                                    const Pool& pool, RngStream& rng) const = 0;
};

inline bool is_probability_vector(std::span<const double> p, double tol = 1e-9) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || v > 1.0 + tol) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

inline void check_probability_vector(std::span<const double> p) {
  if (!is_probability_vector(p))
    throw InvalidInputError("not a valid probability vector");
}

// Argmax with ties broken by lowest index.
inline int argmax_class(std::span<const double> p) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(p.size()); ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

// 0 if the top class matches the label, 1 otherwise.
inline double zero_one_loss(std::span<const double> prediction, int label) {
  check_probability_vector(prediction);
  if (label < 0 || label >= static_cast<int>(prediction.size()))
    throw InvalidInputError("zero_one_loss: label outside prediction dimension");
  return argmax_class(prediction) == label ? 0.0 : 1.0;
}

class ZeroOneLoss final : public LossFunction {
public:
  double loss(std::span<const double> prediction, int label) const override {
    return zero_one_loss(prediction, label);
  }
};

// Cross-entropy divided by a declared maximum (nats), clipped to [0,1].
class ClippedCrossEntropyLoss final : public LossFunction {
public:
  explicit ClippedCrossEntropyLoss(double max_nats = 10.0) : max_nats_(max_nats) {
    if (max_nats_ <= 0.0) throw InvalidInputError("ClippedCrossEntropyLoss: max must be positive");
  }
  double loss(std::span<const double> prediction, int label) const override {
    check_probability_vector(prediction);
    if (label < 0 || label >= static_cast<int>(prediction.size()))
      throw InvalidInputError("ClippedCrossEntropyLoss: label outside prediction dimension");
    const double p = prediction[label];
    const double ce = p > 0.0 ? -std::log(p) : std::numeric_limits<double>::infinity();
    return std::min(ce, max_nats_) / max_nats_;
  }
  double max_nats() const { return max_nats_; }

private:
  double max_nats_;
};

// (1/T) * sum over the subset of w_i * loss(f(x_i), y_i), T the original pool
// size. Equals the plain mean loss when the subset is the whole pool with
// unit weights.
inline double weighted_empirical_loss(const ProbabilisticClassifier& model,
                                      const std::vector<WeightedExample>& subset,
                                      const Pool& pool, const LossFunction& loss) {
  if (pool.size() == 0) throw InvalidInputError("weighted_empirical_loss: empty pool");
  double sum = 0.0;
  for (const auto& we : subset) {
    if (we.example_index >= pool.size())
      throw InvalidInputError("weighted_empirical_loss: subset index outside pool");
    const auto& ex = pool[we.example_index];
    sum += we.weight * loss.loss(model.predict_proba(ex.features), ex.label);
  }
  return sum / static_cast<double>(pool.size());
}

// Fraction of examples whose argmax prediction matches the label.
inline double accuracy(const ProbabilisticClassifier& model, const Pool& pool,
                       const std::vector<std::size_t>& indices) {
  if (indices.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i : indices) {
    const auto p = model.predict_proba(pool[i].features);
    if (argmax_class(p) == pool[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

inline double accuracy(const ProbabilisticClassifier& model, const Pool& pool) {
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return accuracy(model, pool, idx);
}

}  // namespace iwes
