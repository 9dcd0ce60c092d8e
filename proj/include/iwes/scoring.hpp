#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "iwes/errors.hpp"
#include "iwes/model.hpp"

// Sampling-probability and uncertainty-score formulas, as pure functions of
// model probability vectors. The disagreement and loss-entropy scores use the
// natural logarithm, which keeps their range inside [0, 1/e] so they are
// valid probabilities without further normalization; the normalized entropy
// is defined in bits with a log2|Y| normalizer.

namespace iwes {

namespace detail {

inline void check_unit_interval(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidInputError(std::string(what) + ": input outside [0,1]");
}

// x * ln(x) with the 0*ln(0) := 0 convention.
inline double xlnx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// x * log2(x) with the same convention.
inline double xlog2x(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

}  // namespace detail

// |pf*ln(pf) - pg*ln(pg)| for the two models' probabilities of the true
// label. Range [0, 1/e].
inline double entropy_disagreement(double pf_y, double pg_y) {
  detail::check_unit_interval(pf_y, "entropy_disagreement");
  detail::check_unit_interval(pg_y, "entropy_disagreement");
  return std::abs(detail::xlnx(pf_y) - detail::xlnx(pg_y));
}

// Shannon entropy of p in bits divided by log2(c). 1 iff uniform, 0 iff
// one-hot. Requires c >= 2.
inline double normalized_entropy(std::span<const double> p) {
  if (p.size() < 2)
    throw InvalidInputError("normalized_entropy: need at least 2 classes");
  check_probability_vector(p);
  double h = 0.0;
  for (double v : p) h -= detail::xlog2x(v);
  double value = h / std::log2(static_cast<double>(p.size()));
  return std::clamp(value, 0.0, 1.0);
}

// -pf*ln(pf) on the true-label probability. Range [0, 1/e].
inline double loss_entropy(double pf_y) {
  detail::check_unit_interval(pf_y, "loss_entropy");
  return -detail::xlnx(pf_y);
}

// Binary entropy in bits of the positive-label probability, for one
// (example, class) pair in the multi-label setting. Range [0, 1].
inline double multilabel_binary_entropy(double pf_pos) {
  detail::check_unit_interval(pf_pos, "multilabel_binary_entropy");
  const double h = -detail::xlog2x(pf_pos) - detail::xlog2x(1.0 - pf_pos);
  return std::clamp(h, 0.0, 1.0);
}

// 1 - (top probability - second probability). Ties broken by lowest index.
inline double margin_score(std::span<const double> p) {
  if (p.size() < 2) throw InvalidInputError("margin_score: need at least 2 classes");
  check_probability_vector(p);
  const int first = argmax_class(p);
  int second = first == 0 ? 1 : 0;
  for (int i = 0; i < static_cast<int>(p.size()); ++i) {
    if (i == first) continue;
    if (p[i] > p[second]) second = i;
  }
  return 1.0 - (p[first] - p[second]);
}

// 1 - max entry.
inline double least_confident_score(std::span<const double> p) {
  check_probability_vector(p);
  return 1.0 - p[argmax_class(p)];
}

// Shannon entropy in nats (unnormalized, for the entropy-sampling baseline).
inline double entropy_score(std::span<const double> p) {
  check_probability_vector(p);
  double h = 0.0;
  for (double v : p) h -= detail::xlnx(v);
  return std::max(h, 0.0);
}

}  // namespace iwes
