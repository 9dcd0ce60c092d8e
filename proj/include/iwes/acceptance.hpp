#pragma once

// Release acceptance suite. Each criterion is a self-contained check with a
// frozen expectation (hand-computed oracle values, closed-form references, or
// brute-force comparisons) and prints exactly one [PASS]/[FAIL] line through
// run_and_report(). The checks are ordered from the smallest building blocks
// (scoring primitives) up to full end-to-end experiment runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "iwes/baselines.hpp"
#include "iwes/data.hpp"
#include "iwes/errors.hpp"
#include "iwes/harness.hpp"
#include "iwes/iwes.hpp"
#include "iwes/iwesv.hpp"
#include "iwes/learners.hpp"
#include "iwes/model.hpp"
#include "iwes/rng.hpp"
#include "iwes/scoring.hpp"
#include "iwes/synthetic.hpp"
#include "iwes/theory.hpp"

namespace iwes::acceptance {

struct CriterionResult {
  int number = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

inline std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return std::string(buf);
}

// Accumulates failure descriptions; empty = criterion passed.
class Checker {
 public:
  void require(bool condition, const std::string& what) {
    if (!condition && failures_ < 4) messages_ += (messages_.empty() ? "" : "; ") + what;
    failures_ += condition ? 0 : 1;
  }
  void require_close(double got, double want, double tol, const std::string& what) {
    require(std::abs(got - want) <= tol,
            what + fmt(": got %.17g want %.17g", got, want));
  }
  bool ok() const { return failures_ == 0; }
  std::string summary(const std::string& pass_detail) const {
    if (failures_ == 0) return pass_detail;
    std::string s = messages_;
    if (failures_ > 4) s += fmt("; (+%d more)", failures_ - 4);
    return s;
  }

 private:
  int failures_ = 0;
  std::string messages_;
};

inline std::vector<double> random_simplex(std::size_t c, RngStream& rng) {
  std::vector<double> p(c);
  double sum = 0.0;
  for (auto& v : p) {
    v = -std::log(1.0 - rng.uniform01());
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InternalError("acceptance: cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

class IdentityExtractor final : public EmbeddingExtractor {
 public:
  explicit IdentityExtractor(std::size_t dim) : dim_(dim) {}
  std::vector<double> embed(std::span<const double> x) const override {
    return std::vector<double>(x.begin(), x.end());
  }
  std::size_t embedding_dim() const override { return dim_; }

 private:
  std::size_t dim_;
};

// feature[0] indexes a fixed probability row; used to make top-k selection
// directly comparable against a plain sort.
class TableModel final : public ProbabilisticClassifier {
 public:
  explicit TableModel(std::vector<std::vector<double>> rows) : rows_(std::move(rows)) {}
  std::vector<double> predict_proba(std::span<const double> x) const override {
    return rows_.at(static_cast<std::size_t>(x[0]));
  }
  int num_classes() const override { return static_cast<int>(rows_[0].size()); }

 private:
  std::vector<std::vector<double>> rows_;
};

inline double covering_radius(const std::vector<std::vector<double>>& pts,
                              const std::vector<std::size_t>& centers) {
  double radius = 0.0;
  for (const auto& p : pts) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t c : centers) {
      double d = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) d += (p[j] - pts[c][j]) * (p[j] - pts[c][j]);
      nearest = std::min(nearest, std::sqrt(d));
    }
    radius = std::max(radius, nearest);
  }
  return radius;
}

inline double optimal_radius_bruteforce(const std::vector<std::vector<double>>& pts,
                                        std::size_t k) {
  const std::size_t n = pts.size();
  std::vector<std::size_t> centers;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcountll(mask)) != k) continue;
    centers.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) centers.push_back(i);
    best = std::min(best, covering_radius(pts, centers));
  }
  return best;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 1. Scoring primitives: frozen oracle values at 1e-9 plus a fuzz sweep that
//    keeps every sampling probability inside [0, 1].
// ---------------------------------------------------------------------------
inline CriterionResult criterion_scoring() {
  detail::Checker c;
  const double tol = 1e-9;

  c.require_close(entropy_disagreement(0.9, 0.5), 0.251749126187928984, tol,
                  "entropy_disagreement(0.9,0.5)");
  c.require_close(entropy_disagreement(0.5, 0.5), 0.0, tol, "entropy_disagreement(equal)");
  c.require_close(entropy_disagreement(1.0, 1.0), 0.0, tol, "entropy_disagreement(1,1)");
  {
    const std::vector<double> p{0.7, 0.1, 0.1, 0.1};
    c.require_close(normalized_entropy(p), 0.678389824723519736, tol,
                    "normalized_entropy(0.7,0.1,0.1,0.1)");
    const std::vector<double> u{0.25, 0.25, 0.25, 0.25};
    c.require_close(normalized_entropy(u), 1.0, tol, "normalized_entropy(uniform)");
    const std::vector<double> h{1.0, 0.0, 0.0, 0.0};
    c.require_close(normalized_entropy(h), 0.0, tol, "normalized_entropy(one-hot)");
  }
  c.require_close(loss_entropy(0.5), 0.346573590279972655, tol, "loss_entropy(0.5)");
  c.require_close(loss_entropy(std::exp(-1.0)), 0.367879441171442322, tol, "loss_entropy(1/e)");
  c.require_close(loss_entropy(1.0), 0.0, tol, "loss_entropy(1)");
  c.require_close(multilabel_binary_entropy(0.9), 0.468995593589281221, tol,
                  "multilabel_binary_entropy(0.9)");
  c.require_close(multilabel_binary_entropy(0.5), 1.0, tol, "multilabel_binary_entropy(0.5)");
  c.require_close(multilabel_binary_entropy(0.0), 0.0, tol, "multilabel_binary_entropy(0)");
  {
    const std::vector<double> p{0.6, 0.3, 0.1};
    c.require_close(margin_score(p), 0.7, tol, "margin_score(0.6,0.3,0.1)");
    c.require_close(least_confident_score(p), 0.4, tol, "least_confident(0.6,0.3,0.1)");
    const std::vector<double> even{0.5, 0.5};
    c.require_close(margin_score(even), 1.0, tol, "margin_score(0.5,0.5)");
    const std::vector<double> hot{1.0, 0.0, 0.0};
    c.require_close(margin_score(hot), 0.0, tol, "margin_score(one-hot)");
    c.require_close(least_confident_score(hot), 0.0, tol, "least_confident(one-hot)");
    c.require_close(entropy_score(hot), 0.0, tol, "entropy_score(one-hot)");
    const std::vector<double> u4{0.25, 0.25, 0.25, 0.25};
    c.require_close(least_confident_score(u4), 0.75, tol, "least_confident(uniform-4)");
    const std::vector<double> u3{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    c.require_close(entropy_score(u3), std::log(3.0), tol, "entropy_score(uniform-3)");
    const std::vector<double> q{0.7, 0.3};
    c.require_close(entropy_score(q), 0.610864302054893463, tol, "entropy_score(0.7,0.3)");
  }
  c.require_close(stream_pass_rescale(0.1, 0), 0.1, tol, "pass_rescale(0.1,0)");
  c.require_close(stream_pass_rescale(0.1, 5), 0.15, tol, "pass_rescale(0.1,5)");
  c.require_close(stream_pass_rescale(0.9, 10), 1.0, tol, "pass_rescale(0.9,10) clamps");

  // Fuzz: every score used as a sampling probability stays in [0, 1].
  RngStream rng(20260815);
  int range_failures = 0;
  for (int it = 0; it < 10000; ++it) {
    const std::size_t dim = 2 + rng.uniform_int(5);
    const std::vector<double> p = detail::random_simplex(dim, rng);
    const double pf = rng.uniform01();
    const double pg = rng.uniform01();
    const int pass = static_cast<int>(rng.uniform_int(100));
    const double vals[] = {entropy_disagreement(pf, pg), normalized_entropy(p),
                           loss_entropy(pf),             multilabel_binary_entropy(pf),
                           margin_score(p),              least_confident_score(p),
                           stream_pass_rescale(pf, pass)};
    for (double v : vals)
      if (!(v >= 0.0 && v <= 1.0)) ++range_failures;
  }
  c.require(range_failures == 0,
            detail::fmt("%d fuzzed scores escaped [0,1]", range_failures));

  return {1, "scoring primitives match frozen oracles", c.ok(),
          c.summary("oracle values at 1e-9, 10000-draw range fuzz"), 0.0};
}

// ---------------------------------------------------------------------------
// 2. Importance weighting: the uncapped estimator is unbiased (3-sigma test on
//    100000 draws) and the capped estimator's bias matches its closed form.
// ---------------------------------------------------------------------------
inline CriterionResult criterion_unbiasedness() {
  detail::Checker c;
  const std::size_t draws = 100000;
  RngStream base(700212);

  const std::vector<double> losses{1.0, 1.0, 0.0, 0.0};
  const std::vector<double> half(4, 0.5);
  {
    RngStream rng = base.child(0);
    const auto rep = check_unbiasedness(losses, half, draws, rng);
    c.require_close(rep.true_mean, 0.5, 1e-12, "pool-of-4 true mean");
    c.require(std::abs(rep.z_score) <= 3.0,
              detail::fmt("pool-of-4 |z| = %.3f > 3", std::abs(rep.z_score)));
  }
  {
    // Cap u = 1 turns every weight into 1, so the estimator's mean collapses
    // to (1/T) sum_i p_i * l_i = 0.25 and the bias is exactly -0.25.
    RngStream rng = base.child(1);
    const auto rep = check_unbiasedness(losses, half, draws, rng, 1.0);
    c.require_close(rep.capped_true_mean, 0.25, 1e-9, "capped closed-form mean");
    c.require_close(rep.capped_bias, -0.25, 1e-9, "capped closed-form bias");
    c.require(std::abs(rep.capped_z_score) <= 3.0,
              detail::fmt("capped pool-of-4 |z| = %.3f > 3", std::abs(rep.capped_z_score)));
  }

  double worst_z = 0.0;
  for (int rep_i = 0; rep_i < 20; ++rep_i) {
    RngStream gen = base.child(100 + rep_i);
    const std::size_t n = 3 + gen.uniform_int(10);
    std::vector<double> l(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      l[i] = gen.uniform01();
      p[i] = 0.05 + 0.95 * gen.uniform01();
    }
    const double cap = 1.0 + 3.0 * gen.uniform01();
    RngStream rng = base.child(200 + rep_i);
    const auto rep = check_unbiasedness(l, p, draws, rng, cap);

    double closed_form = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      closed_form += p[i] * std::min(1.0 / p[i], cap) * l[i];
    closed_form /= static_cast<double>(n);

    c.require(std::abs(rep.z_score) <= 3.0,
              detail::fmt("random %d uncapped |z| = %.3f > 3", rep_i, std::abs(rep.z_score)));
    c.require_close(rep.capped_true_mean, closed_form, 1e-9,
                    detail::fmt("random %d capped closed form", rep_i));
    c.require(std::abs(rep.capped_z_score) <= 3.0,
              detail::fmt("random %d capped |z| = %.3f > 3", rep_i, std::abs(rep.capped_z_score)));
    worst_z = std::max(worst_z, std::max(std::abs(rep.z_score), std::abs(rep.capped_z_score)));
  }

  return {2, "importance-weighted estimates are unbiased", c.ok(),
          c.summary(detail::fmt("22 instances x %zu draws, worst |z| = %.2f", draws, worst_z)),
          0.0};
}

// Shared fixture for criteria 3 and 4: 200 independent streaming runs on the
// noisy 1-D thresholds task (500 examples, 21 classifiers, delta = 0.1).
struct VersionSpaceStudy {
  ThresholdsInstance instance;
  std::vector<IwesvResult> runs;
  double theta_S = 0.0;
  int T = 500;
  double delta = 0.1;
  int trials = 200;
};

inline VersionSpaceStudy build_version_space_study() {
  VersionSpaceStudy s{make_thresholds_1d(25, 20, 0.1, 21)};
  IwesvOptions options;
  options.delta = s.delta;
  options.record_exact_mean_p = true;
  const std::size_t n = s.instance.pool.size();
  s.runs.reserve(s.trials);
  for (int trial = 0; trial < s.trials; ++trial) {
    RngStream root = RngStream(901100).child(static_cast<std::uint64_t>(trial));
    RngStream stream_gen = root.child(0);
    std::vector<std::size_t> stream(static_cast<std::size_t>(s.T));
    for (auto& x : stream) x = stream_gen.uniform_int(n);
    RngStream coins = root.child(1);
    s.runs.push_back(run_iwesv(s.instance.table, stream, options, coins));
  }
  const LossTensor tensor = make_zero_one_tensor(s.instance.table, s.instance.pool);
  s.theta_S = disagreement_coefficient(tensor, s.instance.best, DisagreementMode::kS).value;
  return s;
}

// ---------------------------------------------------------------------------
// 3. Version space: the best classifier survives in all but a delta-plus-noise
//    fraction of runs, and every surviving run returns a hypothesis whose
//    excess risk is below twice the final confidence radius.
// ---------------------------------------------------------------------------
inline CriterionResult criterion_version_space(const VersionSpaceStudy& s) {
  detail::Checker c;
  const HypothesisTable& table = s.instance.table;
  const double bound =
      2.0 * slack_standard(s.T, s.T, table.num_hypotheses(), s.delta);

  int eliminated = 0;
  double max_excess = 0.0;
  int excess_violations = 0;
  for (const auto& run : s.runs) {
    if (run.eliminated_at[s.instance.best] != -1) {
      ++eliminated;
      continue;
    }
    const double excess =
        table.pool_risk(run.final_hypothesis) - s.instance.best_risk;
    max_excess = std::max(max_excess, excess);
    if (excess > bound + 1e-12) ++excess_violations;
  }
  const double rate = static_cast<double>(eliminated) / s.trials;
  c.require(rate <= 0.164, detail::fmt("elimination rate %.3f > 0.164", rate));
  c.require(excess_violations == 0,
            detail::fmt("%d surviving runs exceeded the excess-risk bound %.6f",
                        excess_violations, bound));

  return {3, "best hypothesis retained with bounded excess risk", c.ok(),
          c.summary(detail::fmt("eliminated %d/%d, max excess %.4f <= %.4f", eliminated,
                                s.trials, max_excess, bound)),
          0.0};
}

// ---------------------------------------------------------------------------
// 4. Sampling rate: in every clean run the exact per-step query probability is
//    below 4 * theta_S * (best risk + confidence radius), and on the noiseless
//    task the selected fraction strictly decreases as the horizon grows.
// ---------------------------------------------------------------------------
inline CriterionResult criterion_sampling_rate(const VersionSpaceStudy& s) {
  detail::Checker c;

  int clean = 0;
  int bound_failures = 0;
  double worst_ratio = 0.0;
  for (const auto& run : s.runs) {
    const auto rep = check_theorem2(run, s.instance.table, s.instance.best, s.theta_S,
                                    s.delta, s.T);
    if (!rep.clean) continue;
    ++clean;
    if (!rep.holds) ++bound_failures;
    worst_ratio = std::max(worst_ratio, rep.max_ratio);
  }
  c.require(clean >= 1, "no clean runs to check");
  c.require(bound_failures == 0,
            detail::fmt("%d clean runs broke the per-step rate bound", bound_failures));

  // Realizable decay: zero label noise, so the active set shrinks towards the
  // true threshold and queries become rarer with longer horizons.
  const ThresholdsInstance realizable = make_thresholds_1d(25, 20, 0.0, 21);
  const std::size_t n = realizable.pool.size();
  IwesvOptions options;
  options.delta = s.delta;
  options.record_exact_mean_p = false;
  const std::vector<std::pair<int, int>> settings{{100, 400}, {1000, 100}, {10000, 20}};
  std::vector<double> mean_fraction;
  for (const auto& [horizon, trials] : settings) {
    double fraction_sum = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
      RngStream root = RngStream(902000 + static_cast<std::uint64_t>(horizon))
                           .child(static_cast<std::uint64_t>(trial));
      RngStream stream_gen = root.child(0);
      std::vector<std::size_t> stream(static_cast<std::size_t>(horizon));
      for (auto& x : stream) x = stream_gen.uniform_int(n);
      RngStream coins = root.child(1);
      const auto run = run_iwesv(realizable.table, stream, options, coins);
      fraction_sum += static_cast<double>(run.selected.size()) / horizon;
    }
    mean_fraction.push_back(fraction_sum / trials);
  }
  c.require(mean_fraction[0] > mean_fraction[1] && mean_fraction[1] > mean_fraction[2],
            detail::fmt("selected fraction not decreasing: %.4f, %.4f, %.4f", mean_fraction[0],
                        mean_fraction[1], mean_fraction[2]));

  return {4, "query rate bounded and decaying when realizable", c.ok(),
          c.summary(detail::fmt(
              "%d clean runs, worst bound ratio %.3f; fractions %.3f > %.3f > %.3f", clean,
              worst_ratio, mean_fraction[0], mean_fraction[1], mean_fraction[2])),
          0.0};
}

// ---------------------------------------------------------------------------
// 5. Disagreement coefficients: theta_S <= theta_AL * K on 100 random
//    finite-slope instances with clipped cross-entropy losses.
// ---------------------------------------------------------------------------
inline CriterionResult criterion_coefficient_inequality() {
  detail::Checker c;
  RngStream rng(905001);
  int checked = 0;
  int skipped = 0;
  int failures = 0;
  double max_gap = -std::numeric_limits<double>::infinity();
  int attempts = 0;
  while (checked < 100 && attempts < 1000) {
    ++attempts;
    const std::size_t H = 2 + rng.uniform_int(9);
    const std::size_t T = 2 + rng.uniform_int(19);
    const std::size_t labels = 2 + rng.uniform_int(3);
    const LossTensor tensor = make_random_ce_tensor(H, T, labels, rng);
    const std::size_t h_star = rng.uniform_int(H);
    const auto rep = check_theorem3(tensor, h_star);
    if (rep.skipped_infinite_K) {
      ++skipped;
      continue;
    }
    ++checked;
    if (!rep.holds) ++failures;
    if (std::isfinite(rep.K_ell))
      max_gap = std::max(max_gap, rep.theta_S - rep.theta_AL * rep.K_ell);
  }
  c.require(checked == 100, detail::fmt("only %d finite-slope instances checked", checked));
  c.require(failures == 0, detail::fmt("%d instances violated theta_S <= theta_AL * K", failures));

  return {5, "score-based coefficient bounded by label-based one", c.ok(),
          c.summary(detail::fmt("100 instances (%d skipped), max theta_S - theta_AL*K = %.2e",
                                skipped, max_gap)),
          0.0};
}

// ---------------------------------------------------------------------------
// 6. Baseline selectors: k-center greedy within 2x of brute force, kmeans++
//    seeding frequencies match the distance-squared law, top-k uncertainty
//    equals a plain sort.
// ---------------------------------------------------------------------------
inline CriterionResult criterion_baselines() {
  detail::Checker c;
  RngStream rng(906001);

  int radius_failures = 0;
  for (int it = 0; it < 80; ++it) {
    const std::size_t n = 4 + rng.uniform_int(5);
    const std::size_t k = 1 + rng.uniform_int(3);
    std::vector<std::vector<double>> pts(n, std::vector<double>(2));
    std::vector<LabeledExample> ex;
    for (auto& p : pts) {
      p[0] = 10.0 * rng.uniform01();
      p[1] = 10.0 * rng.uniform01();
      ex.push_back({p, 0});
    }
    Pool pool(std::move(ex), 2);
    detail::IdentityExtractor extractor(2);
    RngStream sel = rng.child(1000 + static_cast<std::uint64_t>(it));
    const auto centers = select_coreset_kcenter(pool, extractor, k, {}, sel);
    const double greedy = detail::covering_radius(pts, centers);
    const double optimal = detail::optimal_radius_bruteforce(pts, k);
    if (greedy > 2.0 * optimal + 1e-12) ++radius_failures;
  }
  c.require(radius_failures == 0,
            detail::fmt("%d k-center instances above 2x optimal", radius_failures));

  // kmeans++ next-center law: squared distances {0, 1, 9} with the first point
  // already picked must sample the others with probabilities 0.1 and 0.9.
  {
    const std::vector<double> min_sq{0.0, 1.0, 9.0};
    const std::vector<char> picked{1, 0, 0};
    RngStream draw(906002);
    const int draws = 100000;
    int count1 = 0, count2 = 0;
    for (int i = 0; i < draws; ++i) {
      const std::size_t next = kmeanspp_next(min_sq, picked, draw);
      if (next == 1) ++count1;
      if (next == 2) ++count2;
    }
    const double sigma = std::sqrt(0.1 * 0.9 * draws);  // ~94.9
    c.require(count1 + count2 == draws, "kmeans++ drew a picked index");
    c.require(std::abs(count1 - 0.1 * draws) <= 3.0 * sigma,
              detail::fmt("kmeans++ count %d for p=0.1 outside 3 sigma", count1));
    c.require(std::abs(count2 - 0.9 * draws) <= 3.0 * sigma,
              detail::fmt("kmeans++ count %d for p=0.9 outside 3 sigma", count2));
  }

  // Top-k uncertainty equals sorting by (score desc, index asc).
  {
    RngStream gen(906003);
    const std::size_t n = 40, k = 7;
    std::vector<std::vector<double>> rows;
    std::vector<LabeledExample> ex;
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back(detail::random_simplex(4, gen));
      ex.push_back({{static_cast<double>(i)}, 0});
    }
    // duplicated rows exercise the index tie-break
    rows[5] = rows[3];
    rows[20] = rows[3];
    Pool pool(std::move(ex), 4);
    detail::TableModel model(rows);
    const std::vector<std::pair<UncertaintyScore, const char*>> scores{
        {UncertaintyScore::kMargin, "margin"},
        {UncertaintyScore::kEntropy, "entropy"},
        {UncertaintyScore::kLeastConfident, "least_confident"}};
    for (const auto& [score, name] : scores) {
      const auto got = select_topk_uncertainty(pool, model, k, score);
      std::vector<std::pair<double, std::size_t>> ranked;
      for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        if (score == UncertaintyScore::kMargin) v = margin_score(rows[i]);
        if (score == UncertaintyScore::kEntropy) v = entropy_score(rows[i]);
        if (score == UncertaintyScore::kLeastConfident) v = least_confident_score(rows[i]);
        ranked.push_back({v, i});
      }
      std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      std::vector<std::size_t> want;
      for (std::size_t i = 0; i < k; ++i) want.push_back(ranked[i].second);
      c.require(got == want, detail::fmt("top-k mismatch for %s score", name));
    }
  }

  return {6, "baseline selectors match brute-force oracles", c.ok(),
          c.summary("80 k-center instances, kmeans++ frequencies, 3 top-k sorts"), 0.0};
}

// ---------------------------------------------------------------------------
// 7. Learner: numeric gradient check below 1e-5, integer example weights equal
//    duplicated copies bit-for-bit, and a separable task trains to 1.0.
// ---------------------------------------------------------------------------
inline CriterionResult criterion_learner() {
  detail::Checker c;

  RngStream rng(907001);
  double worst = 0.0;
  for (int it = 0; it < 100; ++it) {
    const std::size_t d = 1 + rng.uniform_int(6);
    const int classes = 2 + static_cast<int>(rng.uniform_int(4));
    const int hidden = (it % 2 == 0) ? 0 : 3 + static_cast<int>(rng.uniform_int(6));
    SoftmaxNet net(d, hidden, classes);
    net.init_xavier(rng);
    LabeledExample ex;
    ex.features.resize(d);
    for (auto& f : ex.features) f = rng.normal();
    ex.label = static_cast<int>(rng.uniform_int(classes));
    const double w = 0.1 + 1.9 * rng.uniform01();
    worst = std::max(worst, gradient_check(net, ex, w));
  }
  c.require(worst < 1e-5, detail::fmt("worst gradient error %.3e >= 1e-5", worst));

  {
    RngStream data_rng(907002);
    std::vector<LabeledExample> ex(4);
    for (auto& e : ex) {
      e.features = {data_rng.normal(), data_rng.normal(), data_rng.normal()};
      e.label = static_cast<int>(data_rng.uniform_int(2));
    }
    Pool pool(std::move(ex), 2);
    int mismatches = 0;
    for (int m = 1; m <= 5; ++m) {
      for (int hidden : {0, 4}) {
        TrainerConfig cfg;
        cfg.hidden_dim = hidden;
        cfg.learning_rate = 0.05;
        cfg.sgd_batch_size = 1000000;  // full batch
        cfg.max_epochs = 40;
        cfg.tolerance = -1.0;
        cfg.grad_mode = GradMode::kSum;
        cfg.shuffle_each_epoch = false;
        SgdTrainer trainer(cfg);
        const std::vector<WeightedExample> weighted{{0, static_cast<double>(m), 1.0, 0}};
        std::vector<WeightedExample> duplicated;
        for (int i = 0; i < m; ++i) duplicated.push_back({0, 1.0, 1.0, 0});
        RngStream r1(555), r2(555);
        const auto net_w = trainer.train_net(weighted, pool, r1);
        const auto net_d = trainer.train_net(duplicated, pool, r2);
        if (net_w->parameters() != net_d->parameters()) ++mismatches;
      }
    }
    c.require(mismatches == 0,
              detail::fmt("%d weight-vs-duplication runs differ bitwise", mismatches));
  }

  double train_accuracy = 0.0;
  {
    const Pool pool = make_blobs(200, 2, 3, 0.25, 90703);
    TrainerConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.sgd_batch_size = 100;
    cfg.max_epochs = 300;
    SgdTrainer trainer(cfg);
    std::vector<WeightedExample> subset;
    for (std::size_t i = 0; i < pool.size(); ++i) subset.push_back({i, 1.0, 1.0, 0});
    RngStream train_rng(907004);
    const auto net = trainer.train_net(subset, pool, train_rng);
    train_accuracy = accuracy(*net, pool);
    c.require(train_accuracy == 1.0,
              detail::fmt("separable accuracy %.4f != 1.0", train_accuracy));
  }

  return {7, "learner gradients, weighting exactness, separable fit", c.ok(),
          c.summary(detail::fmt("worst gradient error %.2e, 10 bitwise matches, accuracy %.2f",
                                worst, train_accuracy)),
          0.0};
}

// ---------------------------------------------------------------------------
// 8. End-to-end curves: on 4-class Gaussian blobs the streaming selectors keep
//    up with random sampling (within one pooled standard error) and every
//    selector's final accuracy beats its seed-set accuracy.
// ---------------------------------------------------------------------------
inline CriterionResult criterion_learning_curves(const std::string& scratch_dir) {
  detail::Checker c;
  namespace fs = std::filesystem;
  fs::create_directories(scratch_dir);
  // Eight feature dimensions but only the first two carry class signal: the
  // noise dimensions keep a 200-example model well short of its asymptote, so
  // the learning curve has genuine slope for the selectors to differ on.
  const std::string csv = scratch_dir + "/acceptance_blobs.csv";
  save_dataset_csv(csv, make_blobs(5000, 8, 4, 1.2, 90801));

  ExperimentConfig base;
  base.dataset_path = csv;
  base.num_classes = 4;
  base.test_fraction = 0.2;
  base.seed_size = 200;
  base.batch_size = 200;
  base.rounds = 8;
  base.trainer.hidden_dim = 0;
  base.trainer.learning_rate = 0.05;
  base.trainer.sgd_batch_size = 100;
  base.trainer.max_epochs = 200;
  base.auto_learning_rate = true;
  base.trials = 5;
  base.workers = 4;
  base.seed = 424242;

  struct Outcome {
    double first = 0.0, final = 0.0, stderr_final = 0.0;
    int survivors = 0;
  };
  auto run_selector = [&](SelectorKind kind) {
    ExperimentConfig cfg = base;
    cfg.selector = kind;
    const ExperimentResult result = run_experiment(cfg);
    Outcome o;
    o.first = result.summary.front().mean;
    o.final = result.summary.back().mean;
    o.stderr_final = result.summary.back().std_error;
    o.survivors = static_cast<int>(result.survivors.size());
    return o;
  };

  const Outcome random_run = run_selector(SelectorKind::kRandom);
  const Outcome dis_run = run_selector(SelectorKind::kIwesDis);
  const Outcome ent_run = run_selector(SelectorKind::kIwesEnt);

  auto check_pair = [&](const Outcome& streaming, const char* name) {
    const double pooled = std::sqrt(streaming.stderr_final * streaming.stderr_final +
                                    random_run.stderr_final * random_run.stderr_final);
    c.require(streaming.final >= random_run.final - pooled - 1e-12,
              detail::fmt("%s final %.4f below random %.4f - pooled stderr %.4f", name,
                          streaming.final, random_run.final, pooled));
  };
  check_pair(dis_run, "disagreement selector");
  check_pair(ent_run, "entropy selector");
  for (const auto& [o, name] : {std::pair<const Outcome&, const char*>{random_run, "random"},
                                {dis_run, "disagreement"},
                                {ent_run, "entropy"}}) {
    c.require(o.final >= o.first, detail::fmt("%s final %.4f below seed-set accuracy %.4f",
                                              name, o.final, o.first));
    c.require(o.survivors >= 3, detail::fmt("%s kept only %d/5 trials", name, o.survivors));
  }

  return {8, "streaming selectors track random-sampling curves", c.ok(),
          c.summary(detail::fmt("final acc random %.4f, dis %.4f, ent %.4f (seed %.4f/%.4f/%.4f)",
                                random_run.final, dis_run.final, ent_run.final, random_run.first,
                                dis_run.first, ent_run.first)),
          0.0};
}

// ---------------------------------------------------------------------------
// 9. Determinism: rerunning an experiment with the same config and seed, at
//    any worker count, reproduces curve and trace files byte for byte.
// ---------------------------------------------------------------------------
inline CriterionResult criterion_determinism(const std::string& scratch_dir) {
  detail::Checker c;
  namespace fs = std::filesystem;
  fs::create_directories(scratch_dir);
  const std::string csv = scratch_dir + "/acceptance_blobs_small.csv";
  save_dataset_csv(csv, make_blobs(600, 2, 3, 0.8, 90902));

  const std::vector<std::string> tracked{"curve.csv", "trace.jsonl", "curve_summary.csv",
                                         "run_summary.json"};
  for (const SelectorKind kind : {SelectorKind::kRandom, SelectorKind::kIwesEnt}) {
    ExperimentConfig cfg;
    cfg.dataset_path = csv;
    cfg.num_classes = 3;
    cfg.test_fraction = 0.25;
    cfg.selector = kind;
    cfg.seed_size = 60;
    cfg.batch_size = 60;
    cfg.rounds = 3;
    cfg.trainer.hidden_dim = 0;
    cfg.trainer.learning_rate = 0.05;
    cfg.trainer.sgd_batch_size = 100;
    cfg.trainer.max_epochs = 60;
    cfg.trials = 3;
    cfg.workers = 1;
    cfg.seed = 777;

    const std::string tag = selector_name(kind);
    const std::string dir_a = scratch_dir + "/det_" + tag + "_a";
    const std::string dir_b = scratch_dir + "/det_" + tag + "_b";
    const std::string dir_c = scratch_dir + "/det_" + tag + "_c";
    write_experiment_outputs(run_experiment(cfg), dir_a);
    write_experiment_outputs(run_experiment(cfg), dir_b);
    cfg.workers = 3;
    write_experiment_outputs(run_experiment(cfg), dir_c);

    for (const auto& file : tracked) {
      const std::string bytes_a = detail::read_file_bytes(dir_a + "/" + file);
      c.require(bytes_a == detail::read_file_bytes(dir_b + "/" + file),
                detail::fmt("%s: %s differs across identical reruns", tag.c_str(), file.c_str()));
      c.require(bytes_a == detail::read_file_bytes(dir_c + "/" + file),
                detail::fmt("%s: %s differs across worker counts", tag.c_str(), file.c_str()));
    }
  }

  return {9, "reruns reproduce curves and traces byte for byte", c.ok(),
          c.summary("2 selectors x 4 files, identical across reruns and worker counts"), 0.0};
}

// ---------------------------------------------------------------------------

inline std::vector<CriterionResult> run_all(const std::string& scratch_dir) {
  using Clock = std::chrono::steady_clock;
  std::vector<CriterionResult> results;
  auto timed = [&](auto&& fn, int number, const char* name) {
    const auto start = Clock::now();
    CriterionResult r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r = {number, name, false, std::string("exception: ") + e.what(), 0.0};
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    results.push_back(std::move(r));
  };

  timed([] { return criterion_scoring(); }, 1, "scoring primitives match frozen oracles");
  timed([] { return criterion_unbiasedness(); }, 2, "importance-weighted estimates are unbiased");

  // Criteria 3 and 4 share the same 200-run streaming study.
  bool study_ok = false;
  VersionSpaceStudy study;
  const auto study_start = Clock::now();
  std::string study_error;
  try {
    study = build_version_space_study();
    study_ok = true;
  } catch (const std::exception& e) {
    study_error = std::string("fixture exception: ") + e.what();
  }
  const double study_seconds = std::chrono::duration<double>(Clock::now() - study_start).count();
  if (study_ok) {
    timed([&] {
      auto r = criterion_version_space(study);
      return r;
    }, 3, "best hypothesis retained with bounded excess risk");
    results.back().seconds += study_seconds;
    timed([&] { return criterion_sampling_rate(study); }, 4,
          "query rate bounded and decaying when realizable");
  } else {
    results.push_back({3, "best hypothesis retained with bounded excess risk", false, study_error,
                       study_seconds});
    results.push_back({4, "query rate bounded and decaying when realizable", false, study_error,
                       0.0});
  }

  timed([] { return criterion_coefficient_inequality(); }, 5,
        "score-based coefficient bounded by label-based one");
  timed([] { return criterion_baselines(); }, 6, "baseline selectors match brute-force oracles");
  timed([] { return criterion_learner(); }, 7,
        "learner gradients, weighting exactness, separable fit");
  timed([&] { return criterion_learning_curves(scratch_dir); }, 8,
        "streaming selectors track random-sampling curves");
  timed([&] { return criterion_determinism(scratch_dir); }, 9,
        "reruns reproduce curves and traces byte for byte");
  return results;
}

// Prints one line per criterion and a final tally; returns the failure count.
inline int run_and_report(std::ostream& out, const std::string& scratch_dir) {
  const auto results = run_all(scratch_dir);
  int failures = 0;
  for (const auto& r : results) {
    out << (r.passed ? "[PASS] " : "[FAIL] ") << r.number << ". " << r.name << " — " << r.detail
        << detail::fmt(" [%.1fs]", r.seconds) << "\n";
    if (!r.passed) ++failures;
  }
  if (failures == 0)
    out << "acceptance: all " << results.size() << " criteria passed\n";
  else
    out << "acceptance: " << failures << " of " << results.size() << " criteria FAILED\n";
  out.flush();
  return failures;
}

}  // namespace iwes::acceptance
