#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "iwes/data.hpp"
#include "iwes/errors.hpp"
#include "iwes/hypothesis.hpp"
#include "iwes/model.hpp"
#include "iwes/rng.hpp"
#include "iwes/theory.hpp"

namespace iwes {

// Gaussian class blobs with well-separated means: classes sit on a circle of
// radius 3 in the first two dimensions (on a line for d = 1), remaining
// coordinates are pure noise. Class sizes are n/c with the remainder going to
// the first classes, laid out class-major.
inline Pool make_blobs(std::size_t n, std::size_t d, int c, double noise_sigma,
                       std::uint64_t seed) {
  if (n == 0) throw InvalidInputError("make_blobs: n must be positive");
  if (d == 0) throw InvalidInputError("make_blobs: d must be positive");
  if (c < 2) throw InvalidInputError("make_blobs: need at least 2 classes");
  if (!(noise_sigma >= 0.0)) throw InvalidInputError("make_blobs: noise must be >= 0");
  if (n < static_cast<std::size_t>(c)) throw InvalidInputError("make_blobs: need n >= c");

  std::vector<std::vector<double>> centers(static_cast<std::size_t>(c),
                                           std::vector<double>(d, 0.0));
  constexpr double kRadius = 3.0;
  for (int j = 0; j < c; ++j) {
    if (d == 1) {
      centers[j][0] = kRadius * (2.0 * static_cast<double>(j) / static_cast<double>(c - 1) - 1.0);
    } else {
      const double angle = 2.0 * M_PI * static_cast<double>(j) / static_cast<double>(c);
      centers[j][0] = kRadius * std::cos(angle);
      centers[j][1] = kRadius * std::sin(angle);
    }
  }

  RngStream rng(seed);
  std::vector<LabeledExample> examples;
  examples.reserve(n);
  const std::size_t base = n / static_cast<std::size_t>(c);
  const std::size_t remainder = n % static_cast<std::size_t>(c);
  for (int j = 0; j < c; ++j) {
    const std::size_t count = base + (static_cast<std::size_t>(j) < remainder ? 1 : 0);
    for (std::size_t i = 0; i < count; ++i) {
      LabeledExample ex;
      ex.label = j;
      ex.features.resize(d);
      for (std::size_t dim = 0; dim < d; ++dim)
        ex.features[dim] = centers[j][dim] + noise_sigma * rng.normal();
      examples.push_back(std::move(ex));
    }
  }
  return Pool(std::move(examples), c);
}

// Two-class XOR: four Gaussian clusters at (+-1, +-1); same-sign corners are
// class 0, mixed-sign corners class 1. No linear separator exists.
inline Pool make_xor(std::size_t n, double noise_sigma, std::uint64_t seed) {
  if (n < 4) throw InvalidInputError("make_xor: need n >= 4");
  if (!(noise_sigma >= 0.0)) throw InvalidInputError("make_xor: noise must be >= 0");
  const double corners[4][2] = {{1.0, 1.0}, {-1.0, -1.0}, {1.0, -1.0}, {-1.0, 1.0}};
  RngStream rng(seed);
  std::vector<LabeledExample> examples;
  examples.reserve(n);
  const std::size_t base = n / 4;
  const std::size_t remainder = n % 4;
  for (std::size_t q = 0; q < 4; ++q) {
    const std::size_t count = base + (q < remainder ? 1 : 0);
    for (std::size_t i = 0; i < count; ++i) {
      LabeledExample ex;
      ex.label = q < 2 ? 0 : 1;
      ex.features = {corners[q][0] + noise_sigma * rng.normal(),
                     corners[q][1] + noise_sigma * rng.normal()};
      examples.push_back(std::move(ex));
    }
  }
  return Pool(std::move(examples), 2);
}

// A 1-d threshold-learning instance with exact arithmetic: `num_points` grid
// points in [0, 1], `copies` examples per point, and per point exactly
// round(copies * noise) labels flipped away from the true threshold rule
// [x >= 0.5]. The pool (uniform over its rows) IS the data distribution, so
// hypothesis risks and the realized noise rate are exact rationals realized
// in double arithmetic, and noise 0 gives L(h*) = 0 exactly.
struct ThresholdsInstance {
  Pool pool;
  HypothesisTable table;          // [x >= tau] classifiers, predictions included
  std::vector<double> thresholds;
  std::vector<double> grid;       // distinct feature values
  std::vector<double> prob_one;   // exact P(y = 1 | x = grid[g])
  std::size_t best = 0;           // lowest-risk hypothesis, lowest index on ties
  double best_risk = 0.0;
  double realized_noise = 0.0;    // flipped fraction of the pool
};

inline ThresholdsInstance make_thresholds_1d(std::size_t num_points, std::size_t copies,
                                             double noise, std::size_t num_thresholds) {
  if (num_points < 2) throw InvalidInputError("make_thresholds_1d: need >= 2 grid points");
  if (copies == 0) throw InvalidInputError("make_thresholds_1d: copies must be positive");
  if (!(noise >= 0.0 && noise <= 0.5))
    throw InvalidInputError("make_thresholds_1d: noise must lie in [0, 0.5]");
  if (num_thresholds < 2) throw InvalidInputError("make_thresholds_1d: need >= 2 thresholds");

  const std::size_t flips = static_cast<std::size_t>(
      std::lround(noise * static_cast<double>(copies)));
  std::vector<LabeledExample> examples;
  examples.reserve(num_points * copies);
  std::vector<double> grid(num_points);
  std::vector<double> prob_one(num_points);
  std::size_t total_flips = 0;
  for (std::size_t g = 0; g < num_points; ++g) {
    grid[g] = static_cast<double>(g) / static_cast<double>(num_points - 1);
    const int clean_label = grid[g] >= 0.5 ? 1 : 0;
    prob_one[g] = clean_label == 1
                      ? static_cast<double>(copies - flips) / static_cast<double>(copies)
                      : static_cast<double>(flips) / static_cast<double>(copies);
    for (std::size_t i = 0; i < copies; ++i) {
      const bool flipped = i < flips;
      examples.push_back({{grid[g]}, flipped ? 1 - clean_label : clean_label});
      if (flipped) ++total_flips;
    }
  }

  std::vector<double> thresholds(num_thresholds);
  for (std::size_t m = 0; m < num_thresholds; ++m)
    thresholds[m] = static_cast<double>(m) / static_cast<double>(num_thresholds - 1);

  Pool pool(std::move(examples), 2);
  HypothesisTable table = make_threshold_table(pool, thresholds);
  ThresholdsInstance instance{std::move(pool),
                              std::move(table),
                              std::move(thresholds),
                              std::move(grid),
                              std::move(prob_one)};
  instance.best = instance.table.best_hypothesis();
  instance.best_risk = instance.table.pool_risk(instance.best);
  instance.realized_noise =
      static_cast<double>(total_flips) / static_cast<double>(instance.pool.size());
  return instance;
}

// Random finite instance with clipped cross-entropy per-label losses: each
// (hypothesis, example) cell gets an independent random probability vector,
// so slope asymmetry is finite with probability one.
inline LossTensor make_random_ce_tensor(std::size_t num_hypotheses, std::size_t num_examples,
                                        std::size_t num_labels, RngStream& rng) {
  if (num_hypotheses == 0 || num_examples == 0 || num_labels < 2)
    throw InvalidInputError("make_random_ce_tensor: need hypotheses, examples, >= 2 labels");
  const ClippedCrossEntropyLoss loss;
  LossTensor tensor;
  tensor.values.resize(num_hypotheses);
  for (std::size_t h = 0; h < num_hypotheses; ++h) {
    tensor.values[h].resize(num_examples);
    for (std::size_t i = 0; i < num_examples; ++i) {
      std::vector<double> q(num_labels);
      double total = 0.0;
      for (std::size_t y = 0; y < num_labels; ++y) {
        q[y] = -std::log(1.0 - rng.uniform01());  // Exp(1); argument stays in (0, 1]
        total += q[y];
      }
      double running = 0.0;
      for (std::size_t y = 0; y + 1 < num_labels; ++y) {
        q[y] /= total;
        running += q[y];
      }
      q[num_labels - 1] = 1.0 - running;  // exact renormalization
      tensor.values[h][i].resize(num_labels);
      for (std::size_t y = 0; y < num_labels; ++y)
        tensor.values[h][i][y] = loss.loss(q, static_cast<int>(y));
    }
  }
  tensor.labels.resize(num_examples);
  for (std::size_t i = 0; i < num_examples; ++i)
    tensor.labels[i] = static_cast<int>(rng.uniform_int(num_labels));
  tensor.validate();
  return tensor;
}

}  // namespace iwes
