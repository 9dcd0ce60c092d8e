#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "iwes/errors.hpp"
#include "iwes/hypothesis.hpp"
#include "iwes/iwesv.hpp"
#include "iwes/rng.hpp"

namespace iwes {

// Per-label losses on a finite instance: values[h][i][y] = loss of
// hypothesis h on example i if the label were y, plus the realized labels.
// The pool columns are the distribution (uniform), so every expectation
// below is an exact finite average, not an estimate.
struct LossTensor {
  std::vector<std::vector<std::vector<double>>> values;  // [H][T][c]
  std::vector<int> labels;                               // realized label per example

  std::size_t num_hypotheses() const { return values.size(); }
  std::size_t num_examples() const { return values.empty() ? 0 : values[0].size(); }
  std::size_t num_labels() const {
    return num_examples() == 0 ? 0 : values[0][0].size();
  }
  double realized(std::size_t h, std::size_t i) const { return values[h][i][labels[i]]; }

  void validate() const {
    if (values.empty()) throw InvalidInputError("LossTensor: no hypotheses");
    const std::size_t T = values[0].size();
    if (T == 0) throw InvalidInputError("LossTensor: no examples");
    const std::size_t c = values[0][0].size();
    if (c == 0) throw InvalidInputError("LossTensor: no labels");
    for (const auto& hyp : values) {
      if (hyp.size() != T) throw InvalidInputError("LossTensor: ragged example axis");
      for (const auto& ex : hyp) {
        if (ex.size() != c) throw InvalidInputError("LossTensor: ragged label axis");
        for (double v : ex)
          if (!(v >= 0.0 && v <= 1.0)) throw InvalidInputError("LossTensor: loss outside [0,1]");
      }
    }
    if (labels.size() != T) throw InvalidInputError("LossTensor: label count mismatch");
    for (int y : labels)
      if (y < 0 || y >= static_cast<int>(c))
        throw InvalidInputError("LossTensor: realized label out of range");
  }

  HypothesisTable realized_table() const {
    std::vector<std::vector<double>> rows(num_hypotheses());
    for (std::size_t h = 0; h < num_hypotheses(); ++h) {
      rows[h].resize(num_examples());
      for (std::size_t i = 0; i < num_examples(); ++i) rows[h][i] = realized(h, i);
    }
    return HypothesisTable(std::move(rows));
  }
};

// 0-1 per-label losses from a prediction-bearing table and the pool labels.
inline LossTensor make_zero_one_tensor(const HypothesisTable& table, const Pool& pool) {
  if (!table.has_predictions())
    throw InvalidInputError("make_zero_one_tensor: table lacks predictions");
  if (pool.size() != table.num_examples())
    throw InvalidInputError("make_zero_one_tensor: pool size mismatch");
  LossTensor tensor;
  const std::size_t c = static_cast<std::size_t>(pool.num_classes());
  tensor.values.resize(table.num_hypotheses());
  for (std::size_t h = 0; h < table.num_hypotheses(); ++h) {
    tensor.values[h].resize(table.num_examples());
    for (std::size_t i = 0; i < table.num_examples(); ++i) {
      tensor.values[h][i].resize(c);
      for (std::size_t y = 0; y < c; ++y)
        tensor.values[h][i][y] = table.prediction(h, i) == static_cast<int>(y) ? 0.0 : 1.0;
    }
  }
  tensor.labels.resize(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) tensor.labels[i] = pool[i].label;
  tensor.validate();
  return tensor;
}

// E |loss_h - loss_h*| over the pool: the realized-label pseudometric.
inline double rho_S(const HypothesisTable& table, std::size_t h, std::size_t h_star) {
  if (h >= table.num_hypotheses() || h_star >= table.num_hypotheses())
    throw InvalidInputError("rho_S: hypothesis index out of range");
  double sum = 0.0;
  for (std::size_t i = 0; i < table.num_examples(); ++i)
    sum += std::abs(table.loss(h, i) - table.loss(h_star, i));
  return sum / static_cast<double>(table.num_examples());
}

inline double rho_S(const LossTensor& tensor, std::size_t h, std::size_t h_star) {
  double sum = 0.0;
  for (std::size_t i = 0; i < tensor.num_examples(); ++i)
    sum += std::abs(tensor.realized(h, i) - tensor.realized(h_star, i));
  return sum / static_cast<double>(tensor.num_examples());
}

// E sup_y |loss_h(x, y) - loss_h*(x, y)|: the all-label pseudometric.
inline double rho_AL(const LossTensor& tensor, std::size_t h, std::size_t h_star) {
  if (h >= tensor.num_hypotheses() || h_star >= tensor.num_hypotheses())
    throw InvalidInputError("rho_AL: hypothesis index out of range");
  double sum = 0.0;
  for (std::size_t i = 0; i < tensor.num_examples(); ++i) {
    double worst = 0.0;
    for (std::size_t y = 0; y < tensor.num_labels(); ++y)
      worst = std::max(worst, std::abs(tensor.values[h][i][y] - tensor.values[h_star][i][y]));
    sum += worst;
  }
  return sum / static_cast<double>(tensor.num_examples());
}

enum class DisagreementMode { kS, kAL };

struct CoefficientResult {
  double value = 0.0;
  bool degenerate = false;  // every hypothesis sits at distance 0 from h*
  double argmax_radius = 0.0;
  std::vector<double> radii;  // the candidate grid the sup was taken over
};

// sup_{r>0} E[max_{h in ball(h*, r)} disagreement(h, h*, x)] / r, over the
// ball induced by the mode's pseudometric. The numerator is a step function
// jumping only where r crosses some rho(h, h*), and the ratio decays between
// jumps, so the sup over all r > 0 is attained on the finite radius grid
// {rho(h, h*) > 0} (callers may add extra radii; they can only re-confirm).
inline CoefficientResult disagreement_coefficient(const LossTensor& tensor, std::size_t h_star,
                                                  DisagreementMode mode,
                                                  const std::vector<double>& extra_radii = {}) {
  if (h_star >= tensor.num_hypotheses())
    throw InvalidInputError("disagreement_coefficient: h_star out of range");
  const std::size_t H = tensor.num_hypotheses();
  const std::size_t T = tensor.num_examples();

  std::vector<double> rho(H);
  for (std::size_t h = 0; h < H; ++h)
    rho[h] = mode == DisagreementMode::kS ? rho_S(tensor, h, h_star) : rho_AL(tensor, h, h_star);

  CoefficientResult result;
  for (std::size_t h = 0; h < H; ++h)
    if (rho[h] > 0.0) result.radii.push_back(rho[h]);
  for (double r : extra_radii)
    if (r > 0.0) result.radii.push_back(r);
  std::sort(result.radii.begin(), result.radii.end());
  result.radii.erase(std::unique(result.radii.begin(), result.radii.end()), result.radii.end());
  if (result.radii.empty()) {
    result.degenerate = true;
    return result;
  }

  for (double r : result.radii) {
    double numerator = 0.0;
    for (std::size_t i = 0; i < T; ++i) {
      double worst = 0.0;
      for (std::size_t h = 0; h < H; ++h) {
        if (!(rho[h] <= r)) continue;  // closed ball membership
        double d = 0.0;
        if (mode == DisagreementMode::kS) {
          d = std::abs(tensor.realized(h, i) - tensor.realized(h_star, i));
        } else {
          for (std::size_t y = 0; y < tensor.num_labels(); ++y)
            d = std::max(d, std::abs(tensor.values[h][i][y] - tensor.values[h_star][i][y]));
        }
        worst = std::max(worst, d);
      }
      numerator += worst;
    }
    numerator /= static_cast<double>(T);
    const double ratio = numerator / r;
    if (ratio > result.value) {
      result.value = ratio;
      result.argmax_radius = r;
    }
  }
  return result;
}

struct SlopeAsymmetryResult {
  double value = 1.0;
  bool infinite = false;    // some realized pair differs on one label but not another
  bool degenerate = false;  // no pair of hypotheses ever differs
};

// sup over realized prediction pairs of max_y |diff| / min_y |diff|. Pairs
// are hypothesis pairs on a shared example (exactly the pairs the ball-
// inclusion proof needs); identical-profile pairs are skipped.
inline SlopeAsymmetryResult slope_asymmetry(const LossTensor& tensor) {
  SlopeAsymmetryResult result;
  result.degenerate = true;
  const std::size_t H = tensor.num_hypotheses();
  const std::size_t c = tensor.num_labels();
  for (std::size_t i = 0; i < tensor.num_examples(); ++i) {
    for (std::size_t a = 0; a < H; ++a) {
      for (std::size_t b = a + 1; b < H; ++b) {
        double max_d = 0.0;
        double min_d = std::numeric_limits<double>::infinity();
        for (std::size_t y = 0; y < c; ++y) {
          const double d = std::abs(tensor.values[a][i][y] - tensor.values[b][i][y]);
          max_d = std::max(max_d, d);
          min_d = std::min(min_d, d);
        }
        if (max_d == 0.0) continue;  // identical profiles carry no slope information
        result.degenerate = false;
        if (min_d == 0.0) {
          result.infinite = true;
          result.value = std::numeric_limits<double>::infinity();
        } else if (!result.infinite) {
          result.value = std::max(result.value, max_d / min_d);
        }
      }
    }
  }
  return result;
}

struct DisagreementReport {
  CoefficientResult theta_S;
  CoefficientResult theta_AL;
  SlopeAsymmetryResult K_ell;
};

// theta_AL's grid additionally carries the K-scaled rho_S radii so the
// finite evaluation mirrors the ball inclusion B_S(h*, r) within
// B_AL(h*, K r) used to compare the two coefficients.
inline DisagreementReport disagreement_report(const LossTensor& tensor, std::size_t h_star) {
  DisagreementReport report;
  report.K_ell = slope_asymmetry(tensor);
  report.theta_S = disagreement_coefficient(tensor, h_star, DisagreementMode::kS);
  std::vector<double> scaled;
  if (!report.K_ell.infinite && !report.K_ell.degenerate)
    for (double r : report.theta_S.radii) scaled.push_back(r * report.K_ell.value);
  report.theta_AL = disagreement_coefficient(tensor, h_star, DisagreementMode::kAL, scaled);
  return report;
}

struct Theorem3Report {
  double theta_S = 0.0;
  double theta_AL = 0.0;
  double K_ell = 1.0;
  bool skipped_infinite_K = false;
  bool degenerate = false;
  bool holds = true;
};

// theta_S <= theta_AL * K_ell, evaluated exactly on the finite instance.
inline Theorem3Report check_theorem3(const LossTensor& tensor, std::size_t h_star,
                                     double tolerance = 1e-9) {
  const DisagreementReport rep = disagreement_report(tensor, h_star);
  Theorem3Report out;
  out.theta_S = rep.theta_S.value;
  out.theta_AL = rep.theta_AL.value;
  out.degenerate = rep.theta_S.degenerate;
  if (rep.K_ell.infinite) {
    out.skipped_infinite_K = true;  // the bound is vacuous at K = infinity
    out.K_ell = std::numeric_limits<double>::infinity();
    return out;
  }
  out.K_ell = rep.K_ell.value;
  out.holds = out.theta_S <= out.theta_AL * out.K_ell + tolerance;
  return out;
}

struct UnbiasednessReport {
  double true_mean = 0.0;
  double mc_mean = 0.0;
  double std_error = 0.0;
  double z_score = 0.0;
  double capped_true_mean = 0.0;  // closed form (1/T) sum p_i min(1/p_i, u) loss_i
  double capped_mc_mean = 0.0;
  double capped_std_error = 0.0;
  double capped_z_score = 0.0;
  double capped_bias = 0.0;  // capped_true_mean - true_mean
};

// Monte Carlo check that (1/T) sum (Q_i / p_i) loss_i is unbiased for the
// plain mean, alongside the capped estimator's exact expectation. The same
// Q draws feed both estimators.
inline UnbiasednessReport check_unbiasedness(const std::vector<double>& losses,
                                             const std::vector<double>& probabilities,
                                             std::size_t num_draws, RngStream& rng,
                                             double cap = std::numeric_limits<double>::infinity()) {
  if (losses.empty() || losses.size() != probabilities.size())
    throw InvalidInputError("check_unbiasedness: need matching nonempty losses and probabilities");
  if (num_draws < 2) throw InvalidInputError("check_unbiasedness: need at least 2 draws");
  if (!(cap > 0.0)) throw InvalidInputError("check_unbiasedness: cap must be positive");
  for (double p : probabilities)
    if (!(p > 0.0 && p <= 1.0))
      throw InvalidInputError("check_unbiasedness: probabilities must lie in (0,1]");
  for (double l : losses)
    if (!(l >= 0.0 && l <= 1.0))
      throw InvalidInputError("check_unbiasedness: losses must lie in [0,1]");

  const double T = static_cast<double>(losses.size());
  UnbiasednessReport report;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    report.true_mean += losses[i];
    report.capped_true_mean +=
        probabilities[i] * std::min(1.0 / probabilities[i], cap) * losses[i];
  }
  report.true_mean /= T;
  report.capped_true_mean /= T;
  report.capped_bias = report.capped_true_mean - report.true_mean;

  double sum = 0.0, sum_sq = 0.0, capped_sum = 0.0, capped_sum_sq = 0.0;
  for (std::size_t d = 0; d < num_draws; ++d) {
    double est = 0.0;
    double est2 = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
      if (!rng.bernoulli(probabilities[i])) continue;
      est += losses[i] / probabilities[i];
      est2 += losses[i] * std::min(1.0 / probabilities[i], cap);
    }
    est /= T;
    est2 /= T;
    sum += est;
    sum_sq += est * est;
    capped_sum += est2;
    capped_sum_sq += est2 * est2;
  }
  const double n = static_cast<double>(num_draws);
  report.mc_mean = sum / n;
  report.capped_mc_mean = capped_sum / n;
  auto std_error = [n](double total_sq, double mean) {
    const double var = std::max(0.0, (total_sq - n * mean * mean) / (n - 1.0));
    return std::sqrt(var / n);
  };
  auto z_of = [](double diff, double se) {
    return se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  };
  report.std_error = std_error(sum_sq, report.mc_mean);
  report.z_score = z_of(report.mc_mean - report.true_mean, report.std_error);
  report.capped_std_error = std_error(capped_sum_sq, report.capped_mc_mean);
  report.capped_z_score =
      z_of(report.capped_mc_mean - report.capped_true_mean, report.capped_std_error);
  return report;
}

// The localization event the concentration lemma buys: h* survives every
// update and every still-active hypothesis's true excess risk stays within
// twice the slack. Checking it exactly (true risks are pool means) lets the
// theorem checks below assert their inequalities deterministically on clean
// trials. Masks are reconstructed from the elimination times; between
// eliminations the binding check is the segment's last step (smallest slack).
inline bool trial_is_clean(const IwesvResult& run, const HypothesisTable& table,
                           std::size_t h_star, double delta, int T, double tolerance = 1e-12) {
  if (run.eliminated_at[h_star] != -1) return false;
  const std::size_t H = table.num_hypotheses();
  std::vector<double> risk(H);
  for (std::size_t h = 0; h < H; ++h) risk[h] = table.pool_risk(h);

  std::vector<int> boundaries;  // last step of each constant-mask segment
  for (int e : run.eliminated_at)
    if (e != -1 && e - 1 >= 2) boundaries.push_back(e - 1);
  boundaries.push_back(T);
  std::sort(boundaries.begin(), boundaries.end());
  boundaries.erase(std::unique(boundaries.begin(), boundaries.end()), boundaries.end());

  for (int t : boundaries) {
    if (t < 2) continue;
    const double slack = slack_standard(t, T, H, delta);
    for (std::size_t h = 0; h < H; ++h) {
      const bool active_at_t = run.eliminated_at[h] == -1 || run.eliminated_at[h] > t;
      if (!active_at_t) continue;
      if (risk[h] - risk[h_star] > 2.0 * slack + tolerance) return false;
    }
  }
  return true;
}

struct Theorem1Report {
  int total_trials = 0;
  int violations = 0;     // h* eliminated or excess risk above the bound
  int clean_trials = 0;
  double bound = 0.0;     // 2 * slack at the final update
  bool vacuous = false;   // bound exceeds the loss range
  double max_excess = 0.0;
  double violation_rate = 0.0;
  double rate_threshold = 0.0;  // delta + 3 sigma binomial margin
  bool holds = true;
};

// Final-hypothesis excess risk against 2 * slack(T), aggregated over trials.
inline Theorem1Report check_theorem1(const std::vector<IwesvResult>& runs,
                                     const HypothesisTable& table, std::size_t h_star,
                                     double delta, int T, double tolerance = 1e-12) {
  if (runs.empty()) throw InvalidInputError("check_theorem1: no runs");
  Theorem1Report report;
  report.total_trials = static_cast<int>(runs.size());
  report.bound = 2.0 * slack_standard(T, T, table.num_hypotheses(), delta);
  report.vacuous = report.bound >= 1.0;
  const double risk_star = table.pool_risk(h_star);
  for (const auto& run : runs) {
    const bool retained = run.eliminated_at[h_star] == -1;
    const double excess = table.pool_risk(run.final_hypothesis) - risk_star;
    const bool ok = excess <= report.bound + tolerance;
    if (!(retained && ok)) ++report.violations;
    if (trial_is_clean(run, table, h_star, delta, T)) {
      ++report.clean_trials;
      report.max_excess = std::max(report.max_excess, excess);
      if (!ok) report.holds = false;  // the bound must hold in every clean trial
    }
  }
  const double n = static_cast<double>(report.total_trials);
  report.violation_rate = static_cast<double>(report.violations) / n;
  report.rate_threshold = delta + 3.0 * std::sqrt(delta * (1.0 - delta) / n);
  if (report.violation_rate > report.rate_threshold) report.holds = false;
  return report;
}

struct Theorem2Report {
  bool clean = false;
  bool holds = true;       // every step's exact E[p_t | F_{t-1}] below the bound
  int first_violation = -1;
  double sum_exact = 0.0;  // sum of exact conditional expectations
  double sum_bound = 0.0;  // sum over t >= 2 of the pre-O bound
  double max_ratio = 0.0;  // tightest step: exact / bound
  std::size_t selections = 0;
};

// Per-step check of E[p_t | F_{t-1}] <= 4 theta_S (L(h*) + slack(t)), the
// inequality the sample-complexity proof derives before hiding constants.
// Step 1 has unbounded slack and is skipped.
inline Theorem2Report check_theorem2(const IwesvResult& run, const HypothesisTable& table,
                                     std::size_t h_star, double theta_S, double delta, int T,
                                     double tolerance = 1e-9) {
  if (run.exact_mean_p.size() != static_cast<std::size_t>(T))
    throw InvalidInputError("check_theorem2: run lacks exact conditional expectations");
  Theorem2Report report;
  report.clean = trial_is_clean(run, table, h_star, delta, T);
  report.selections = run.selected.size();
  const double risk_star = table.pool_risk(h_star);
  for (int t = 1; t <= T; ++t) {
    report.sum_exact += run.exact_mean_p[t - 1];
    if (t < 2) continue;
    const double bound =
        4.0 * theta_S * (risk_star + slack_standard(t, T, table.num_hypotheses(), delta));
    report.sum_bound += bound;
    if (bound > 0.0)
      report.max_ratio = std::max(report.max_ratio, run.exact_mean_p[t - 1] / bound);
    if (run.exact_mean_p[t - 1] > bound + tolerance) {
      report.holds = false;
      if (report.first_violation < 0) report.first_violation = t;
    }
  }
  return report;
}

}  // namespace iwes
