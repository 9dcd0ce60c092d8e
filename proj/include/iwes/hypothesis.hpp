#pragma once

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "iwes/data.hpp"
#include "iwes/errors.hpp"

namespace iwes {

// A finite hypothesis class evaluated on a fixed labeled pool: one row per
// hypothesis, one column per example, entries ℓ(h(x_i), y_i) in [0,1]. The
// loss matrix is precomputed once so version-space scans stay O(|H|) per
// step. Predictions are optional; when present they allow recomputing losses
// under counterfactual labels (the all-label analyses need that).
class HypothesisTable {
public:
  HypothesisTable() = default;
  HypothesisTable(std::vector<std::vector<double>> losses, std::vector<std::string> names = {},
                  std::vector<std::vector<int>> predictions = {})
      : losses_(std::move(losses)), names_(std::move(names)),
        predictions_(std::move(predictions)) {
    if (losses_.empty()) throw InvalidInputError("HypothesisTable: need at least one hypothesis");
    const std::size_t cols = losses_[0].size();
    if (cols == 0) throw InvalidInputError("HypothesisTable: need at least one example");
    for (const auto& row : losses_) {
      if (row.size() != cols) throw InvalidInputError("HypothesisTable: ragged loss matrix");
      for (double v : row)
        if (!(v >= 0.0 && v <= 1.0))
          throw InvalidInputError("HypothesisTable: loss outside [0,1]");
    }
    if (!predictions_.empty()) {
      if (predictions_.size() != losses_.size())
        throw InvalidInputError("HypothesisTable: prediction row count mismatch");
      for (const auto& row : predictions_)
        if (row.size() != cols)
          throw InvalidInputError("HypothesisTable: prediction column count mismatch");
    }
    if (names_.empty()) {
      names_.reserve(losses_.size());
      for (std::size_t h = 0; h < losses_.size(); ++h) names_.push_back("h" + std::to_string(h));
    } else if (names_.size() != losses_.size()) {
      throw InvalidInputError("HypothesisTable: name count mismatch");
    }
  }

  std::size_t num_hypotheses() const { return losses_.size(); }
  std::size_t num_examples() const { return losses_[0].size(); }
  double loss(std::size_t h, std::size_t i) const { return losses_[h][i]; }
  const std::vector<double>& row(std::size_t h) const { return losses_[h]; }
  const std::string& name(std::size_t h) const { return names_[h]; }
  bool has_predictions() const { return !predictions_.empty(); }
  int prediction(std::size_t h, std::size_t i) const { return predictions_[h][i]; }

  // Pool-uniform true risk of hypothesis h (the pool is the distribution).
  double pool_risk(std::size_t h) const {
    double sum = 0.0;
    for (double v : losses_[h]) sum += v;
    return sum / static_cast<double>(num_examples());
  }

  // Index of the pool-risk minimizer, ties toward the lowest index.
  std::size_t best_hypothesis() const {
    std::size_t best = 0;
    double best_risk = pool_risk(0);
    for (std::size_t h = 1; h < num_hypotheses(); ++h) {
      const double r = pool_risk(h);
      if (r < best_risk) {
        best_risk = r;
        best = h;
      }
    }
    return best;
  }

private:
  std::vector<std::vector<double>> losses_;
  std::vector<std::string> names_;
  std::vector<std::vector<int>> predictions_;
};

// CSV with one row per hypothesis, columns = per-example losses. An optional
// leading string cell per row names the hypothesis.
inline HypothesisTable load_hypothesis_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open hypothesis file: " + path);
  std::vector<std::vector<double>> losses;
  std::vector<std::string> names;
  std::string line;
  std::size_t lineno = 0;
  bool named = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    std::size_t start = 0;
    if (losses.empty()) {
      // detect the optional name column on the first data row
      try {
        (void)std::stod(fields[0]);
      } catch (const std::exception&) {
        named = true;
      }
    }
    if (named) {
      names.push_back(fields[0]);
      start = 1;
    }
    std::vector<double> row;
    row.reserve(fields.size() - start);
    try {
      for (std::size_t j = start; j < fields.size(); ++j) row.push_back(std::stod(fields[j]));
    } catch (const std::exception&) {
      throw InvalidInputError(path + ":" + std::to_string(lineno) + ": unparseable loss value");
    }
    losses.push_back(std::move(row));
  }
  if (losses.empty()) throw InvalidInputError(path + ": no hypothesis rows");
  return HypothesisTable(std::move(losses), std::move(names));
}

// All 1-D threshold classifiers h_tau(x) = [x >= tau] under 0-1 loss against
// the pool labels (feature 0 is the threshold coordinate). Predictions are
// stored so label-counterfactual losses can be recovered.
inline HypothesisTable make_threshold_table(const Pool& pool, const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw InvalidInputError("make_threshold_table: no thresholds");
  if (pool.size() == 0) throw InvalidInputError("make_threshold_table: empty pool");
  if (pool.dim() < 1) throw InvalidInputError("make_threshold_table: need 1-D features");
  std::vector<std::vector<double>> losses(thresholds.size());
  std::vector<std::vector<int>> predictions(thresholds.size());
  std::vector<std::string> names;
  names.reserve(thresholds.size());
  char buf[48];
  for (std::size_t h = 0; h < thresholds.size(); ++h) {
    losses[h].resize(pool.size());
    predictions[h].resize(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const int pred = pool[i].features[0] >= thresholds[h] ? 1 : 0;
      predictions[h][i] = pred;
      losses[h][i] = pred == pool[i].label ? 0.0 : 1.0;
    }
    std::snprintf(buf, sizeof(buf), "thr@%g", thresholds[h]);
    names.emplace_back(buf);
  }
  return HypothesisTable(std::move(losses), std::move(names), std::move(predictions));
}

}  // namespace iwes
