#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "iwes/errors.hpp"
#include "iwes/hypothesis.hpp"
#include "iwes/rng.hpp"

namespace iwes {

enum class SlackVariant { kStandard, kEnhanced };

// sqrt(8 ln(2 T (T+1) |H|^2 / delta) / (t-1)): the confidence radius applied
// when forming the version space at step t (so the divisor is t-1 >= 1).
inline double slack_standard(int t, int T, std::size_t H_size, double delta) {
  if (t < 2) throw InvalidInputError("slack_standard: t must be >= 2");
  if (T < 1) throw InvalidInputError("slack_standard: T must be positive");
  if (H_size < 1) throw InvalidInputError("slack_standard: empty hypothesis class");
  if (!(delta > 0.0 && delta <= 1.0))
    throw InvalidInputError("slack_standard: delta must lie in (0,1]");
  const double hs = static_cast<double>(H_size);
  const double arg = 2.0 * static_cast<double>(T) * (static_cast<double>(T) + 1.0) * hs * hs / delta;
  return std::sqrt(8.0 * std::log(arg) / (static_cast<double>(t) - 1.0));
}

// (2/t) (sqrt(sum_p) + 6 sqrt(ln((3+t) t^2 / delta))) sqrt(ln(8 T^2 |H|^2 ln(T) / delta)).
// The data-dependent radius: sum_p is the realized sum of sampling
// probabilities through step t.
inline double slack_enhanced(int t, int T, std::size_t H_size, double delta, double sum_p) {
  if (t < 1) throw InvalidInputError("slack_enhanced: t must be >= 1");
  if (T < 3) throw InvalidInputError("slack_enhanced: T must be >= 3");
  if (H_size < 1) throw InvalidInputError("slack_enhanced: empty hypothesis class");
  if (!(delta > 0.0 && delta <= 1.0))
    throw InvalidInputError("slack_enhanced: delta must lie in (0,1]");
  if (!(sum_p >= 0.0)) throw InvalidInputError("slack_enhanced: sum_p must be nonnegative");
  const double td = static_cast<double>(t);
  const double Td = static_cast<double>(T);
  const double hs = static_cast<double>(H_size);
  const double inner = std::log((3.0 + td) * td * td / delta);
  const double outer = std::log(8.0 * Td * Td * hs * hs * std::log(Td) / delta);
  return (2.0 / td) * (std::sqrt(sum_p) + 6.0 * std::sqrt(inner)) * std::sqrt(outer);
}

// The active hypothesis set at time t plus each hypothesis's cumulative
// importance-weighted loss sum_{i<=t, Q_i=1} loss(h, x_i) / p_i.
struct VersionSpace {
  std::vector<char> active;
  int t = 0;  // steps completed
  std::vector<double> cum_iw_loss;

  static VersionSpace full(std::size_t H_size) {
    VersionSpace v;
    v.active.assign(H_size, 1);
    v.cum_iw_loss.assign(H_size, 0.0);
    return v;
  }
  std::size_t active_count() const {
    std::size_t n = 0;
    for (char a : active)
      if (a) ++n;
    return n;
  }
};

// max - min of losses[h][i] over the active hypotheses: the width of the
// version space's disagreement on example i.
inline double sampling_probability_vspace(const HypothesisTable& table, const VersionSpace& vspace,
                                          std::size_t example_index) {
  if (example_index >= table.num_examples())
    throw InvalidInputError("sampling_probability_vspace: example index out of range");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t h = 0; h < table.num_hypotheses(); ++h) {
    if (!vspace.active[h]) continue;
    const double v = table.loss(h, example_index);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi >= lo)) throw InternalError("sampling_probability_vspace: empty version space");
  return hi - lo;
}

// Keeps the previously-active hypotheses whose normalized IW loss is within
// slack of the best previously-active one. Never empties: the minimizer
// always survives.
inline VersionSpace update_version_space(const VersionSpace& vspace, const HypothesisTable& table,
                                         double slack) {
  if (vspace.t < 1) throw InvalidInputError("update_version_space: no completed steps yet");
  if (!(slack >= 0.0)) throw InvalidInputError("update_version_space: negative slack");
  VersionSpace next = vspace;
  const double norm = 1.0 / static_cast<double>(vspace.t);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t h = 0; h < table.num_hypotheses(); ++h)
    if (vspace.active[h]) best = std::min(best, vspace.cum_iw_loss[h] * norm);
  if (!std::isfinite(best)) throw InternalError("update_version_space: empty version space");
  for (std::size_t h = 0; h < table.num_hypotheses(); ++h)
    if (next.active[h] && !(vspace.cum_iw_loss[h] * norm <= best + slack)) next.active[h] = 0;
  return next;
}

struct IwesvResult {
  std::size_t final_hypothesis = 0;  // IW-ERM over the full class, lowest-index ties
  std::vector<WeightedExample> selected;  // (stream index into the table, 1/p_t)
  std::vector<double> p_trajectory;       // p_t for t = 1..T
  double sum_p = 0.0;
  std::vector<double> exact_mean_p;  // E[p_t | F_{t-1}] under pool-uniform x, if requested
  std::vector<int> eliminated_at;    // step t whose update removed h; -1 = never
  std::size_t final_active_count = 0;
  double final_iw_loss = 0.0;  // unnormalized IW loss of the returned hypothesis
};

struct IwesvOptions {
  double delta = 0.1;
  SlackVariant slack_variant = SlackVariant::kStandard;
  // Record the exact conditional expectation of p_t (pool-uniform average of
  // the version-space width) before each step. Cached on the active mask, so
  // it costs one pool scan per elimination, not per step.
  bool record_exact_mean_p = false;
};

// Algorithm run over a fixed stream of pool indices. Step t: form H_t from
// the previous step's IW losses (slack first applied at t = 2), price the
// streamed example by the active max-min loss gap, flip Bernoulli(p_t), and
// on acceptance add (x_t, 1/p_t) to the selection and to every hypothesis's
// cumulative IW loss. p_t = 0 skips the coin and contributes zero. Returns
// the IW-ERM over the FULL class.
inline IwesvResult run_iwesv(const HypothesisTable& table, const std::vector<std::size_t>& stream,
                             const IwesvOptions& options, RngStream& rng) {
  if (stream.empty()) throw InvalidInputError("run_iwesv: empty stream");
  if (!(options.delta > 0.0 && options.delta <= 1.0))
    throw InvalidInputError("run_iwesv: delta must lie in (0,1]");
  const int T = static_cast<int>(stream.size());
  if (options.slack_variant == SlackVariant::kEnhanced && T < 3)
    throw InvalidInputError("run_iwesv: enhanced slack needs T >= 3");
  for (std::size_t i : stream)
    if (i >= table.num_examples()) throw InvalidInputError("run_iwesv: stream index out of range");

  const std::size_t H = table.num_hypotheses();
  VersionSpace vspace = VersionSpace::full(H);
  IwesvResult result;
  result.eliminated_at.assign(H, -1);
  result.p_trajectory.reserve(stream.size());

  // cache of per-example widths under the current mask
  std::vector<double> width_cache;
  double width_mean = 0.0;
  bool cache_stale = true;
  auto refresh_cache = [&]() {
    width_cache.resize(table.num_examples());
    double sum = 0.0;
    for (std::size_t i = 0; i < table.num_examples(); ++i) {
      width_cache[i] = sampling_probability_vspace(table, vspace, i);
      sum += width_cache[i];
    }
    width_mean = sum / static_cast<double>(table.num_examples());
    cache_stale = false;
  };

  for (int t = 1; t <= T; ++t) {
    if (t >= 2) {
      const double slack =
          options.slack_variant == SlackVariant::kStandard
              ? slack_standard(t, T, H, options.delta)
              : slack_enhanced(t - 1, T, H, options.delta, result.sum_p);
      VersionSpace next = update_version_space(vspace, table, slack);
      for (std::size_t h = 0; h < H; ++h)
        if (vspace.active[h] && !next.active[h]) {
          result.eliminated_at[h] = t;
          cache_stale = true;
        }
      next.t = vspace.t;
      vspace = std::move(next);
    }
    if (options.record_exact_mean_p) {
      if (cache_stale) refresh_cache();
      result.exact_mean_p.push_back(width_mean);
    }

    const std::size_t x = stream[static_cast<std::size_t>(t - 1)];
    const double p = cache_stale || !options.record_exact_mean_p
                         ? sampling_probability_vspace(table, vspace, x)
                         : width_cache[x];
    result.p_trajectory.push_back(p);
    result.sum_p += p;
    if (p > 0.0 && rng.bernoulli(p)) {
      const double w = 1.0 / p;
      result.selected.push_back({x, w, p, t});
      for (std::size_t h = 0; h < H; ++h) vspace.cum_iw_loss[h] += table.loss(h, x) * w;
    }
    vspace.t = t;
  }

  // IW-ERM by enumeration over the full class
  std::size_t best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t h = 0; h < H; ++h) {
    double loss = 0.0;
    for (const auto& we : result.selected) loss += we.weight * table.loss(h, we.example_index);
    if (loss < best_loss) {
      best_loss = loss;
      best = h;
    }
  }
  result.final_hypothesis = best;
  result.final_iw_loss = best_loss == std::numeric_limits<double>::infinity() ? 0.0 : best_loss;
  if (result.selected.empty()) {
    result.final_hypothesis = 0;  // no evidence: every IW loss is 0, lowest index
    result.final_iw_loss = 0.0;
  }
  result.final_active_count = vspace.active_count();
  return result;
}

}  // namespace iwes
