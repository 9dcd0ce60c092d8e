#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "iwes/hypothesis.hpp"
#include "iwes/iwesv.hpp"
#include "iwes/rng.hpp"
#include "iwes/synthetic.hpp"
#include "iwes/theory.hpp"

namespace {

using iwes::DisagreementMode;
using iwes::HypothesisTable;
using iwes::LossTensor;
using Rows = std::vector<std::vector<double>>;

// Tensor with one loss profile per (hypothesis, example) cell.
LossTensor tensor_from_profiles(std::vector<std::vector<std::vector<double>>> values,
                                std::vector<int> labels) {
  LossTensor tensor;
  tensor.values = std::move(values);
  tensor.labels = std::move(labels);
  tensor.validate();
  return tensor;
}

}  // namespace

TEST_CASE("rho_S averages absolute realized-loss differences") {
  const HypothesisTable table(Rows{{0.5, 0.1}, {0.2, 0.3}});
  CHECK(iwes::rho_S(table, 0, 1) == Catch::Approx(0.25).margin(1e-15));
  CHECK(iwes::rho_S(table, 1, 0) == Catch::Approx(0.25).margin(1e-15));
  CHECK(iwes::rho_S(table, 0, 0) == 0.0);
  CHECK_THROWS_AS(iwes::rho_S(table, 2, 0), iwes::InvalidInputError);
}

TEST_CASE("rho_AL takes the worst label before averaging") {
  // Single example, per-label diffs (0.1, 0.7).
  const auto tensor = tensor_from_profiles({{{0.3, 0.0}}, {{0.4, 0.7}}}, {0});
  CHECK(iwes::rho_AL(tensor, 0, 1) == Catch::Approx(0.7).margin(1e-15));
  CHECK(iwes::rho_S(tensor, 0, 1) == Catch::Approx(0.1).margin(1e-15));
  CHECK_THROWS_AS(iwes::rho_AL(tensor, 0, 2), iwes::InvalidInputError);
}

TEST_CASE("rho_AL dominates rho_S on random instances") {
  iwes::RngStream rng(41);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t H = 2 + rng.uniform_int(5);
    const std::size_t T = 1 + rng.uniform_int(10);
    const std::size_t c = 2 + rng.uniform_int(3);
    const auto tensor = iwes::make_random_ce_tensor(H, T, c, rng);
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t g = 0; g < H; ++g)
        CHECK(iwes::rho_AL(tensor, h, g) >= iwes::rho_S(tensor, h, g) - 1e-15);
  }
}

TEST_CASE("LossTensor validation rejects malformed input") {
  LossTensor ragged;
  ragged.values = {{{0.1, 0.2}}, {{0.1, 0.2}, {0.3, 0.4}}};
  ragged.labels = {0};
  CHECK_THROWS_AS(ragged.validate(), iwes::InvalidInputError);

  LossTensor bad_label;
  bad_label.values = {{{0.1, 0.2}}};
  bad_label.labels = {2};
  CHECK_THROWS_AS(bad_label.validate(), iwes::InvalidInputError);

  LossTensor out_of_range;
  out_of_range.values = {{{0.1, 1.2}}};
  out_of_range.labels = {0};
  CHECK_THROWS_AS(out_of_range.validate(), iwes::InvalidInputError);
}

TEST_CASE("zero-one tensor reproduces the realized table") {
  const auto instance = iwes::make_thresholds_1d(5, 4, 0.25, 6);
  const auto tensor = iwes::make_zero_one_tensor(instance.table, instance.pool);
  REQUIRE(tensor.num_hypotheses() == instance.table.num_hypotheses());
  REQUIRE(tensor.num_examples() == instance.table.num_examples());
  for (std::size_t h = 0; h < tensor.num_hypotheses(); ++h)
    for (std::size_t i = 0; i < tensor.num_examples(); ++i)
      CHECK(tensor.realized(h, i) == instance.table.loss(h, i));
  const auto realized = tensor.realized_table();
  for (std::size_t h = 0; h < tensor.num_hypotheses(); ++h)
    CHECK(realized.pool_risk(h) == instance.table.pool_risk(h));
}

TEST_CASE("disagreement coefficient on the two-hypothesis instance is 1") {
  // h* always right, h always wrong: rho = 1... use losses (0,0) vs (1,0):
  // rho = 0.5, numerator at r = 0.5 is 0.5, so theta_S = 1.
  const auto tensor = tensor_from_profiles(
      {{{0.0, 1.0}, {0.0, 1.0}}, {{1.0, 0.0}, {0.0, 1.0}}}, {0, 0});
  // realized losses: h0 = (0, 0), h1 = (1, 0)
  const auto result = iwes::disagreement_coefficient(tensor, 0, DisagreementMode::kS);
  CHECK_FALSE(result.degenerate);
  CHECK(result.value == Catch::Approx(1.0).margin(1e-15));
  CHECK(result.argmax_radius == Catch::Approx(0.5).margin(1e-15));
  REQUIRE(result.radii.size() == 1);
}

TEST_CASE("disagreement coefficient is at least 1 whenever some hypothesis differs") {
  iwes::RngStream rng(77);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t H = 2 + rng.uniform_int(6);
    const std::size_t T = 2 + rng.uniform_int(12);
    const std::size_t c = 2 + rng.uniform_int(3);
    const auto tensor = iwes::make_random_ce_tensor(H, T, c, rng);
    const std::size_t h_star = rng.uniform_int(H);
    const auto s = iwes::disagreement_coefficient(tensor, h_star, DisagreementMode::kS);
    const auto al = iwes::disagreement_coefficient(tensor, h_star, DisagreementMode::kAL);
    if (!s.degenerate) CHECK(s.value >= 1.0 - 1e-12);
    if (!al.degenerate) CHECK(al.value >= 1.0 - 1e-12);
  }
}

TEST_CASE("disagreement coefficient degenerates to 0 when the class collapses") {
  const auto tensor = tensor_from_profiles(
      {{{0.2, 0.4}, {0.1, 0.3}}, {{0.2, 0.4}, {0.1, 0.3}}}, {0, 1});
  const auto result = iwes::disagreement_coefficient(tensor, 0, DisagreementMode::kS);
  CHECK(result.degenerate);
  CHECK(result.value == 0.0);
  CHECK(result.radii.empty());
}

TEST_CASE("extra candidate radii never raise the supremum") {
  iwes::RngStream rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    const auto tensor = iwes::make_random_ce_tensor(4, 8, 3, rng);
    const auto base = iwes::disagreement_coefficient(tensor, 0, DisagreementMode::kS);
    std::vector<double> extra;
    for (int e = 0; e < 5; ++e) extra.push_back(0.01 + rng.uniform01());
    const auto widened = iwes::disagreement_coefficient(tensor, 0, DisagreementMode::kS, extra);
    CHECK(widened.value <= base.value + 1e-12);
    CHECK(widened.value >= base.value - 1e-12);
  }
}

TEST_CASE("slope asymmetry matches the hand pair and flags infinities") {
  // One example, diffs (0.4, 0.2) -> ratio 2.
  const auto pair = tensor_from_profiles({{{0.5, 0.3}}, {{0.9, 0.5}}}, {0});
  const auto k = iwes::slope_asymmetry(pair);
  CHECK_FALSE(k.infinite);
  CHECK_FALSE(k.degenerate);
  CHECK(k.value == Catch::Approx(2.0).margin(1e-15));

  // 0-1 loss with three labels: differing predictions share a wrong label,
  // so some per-label diff is 0 while another is 1.
  const auto zero_one = tensor_from_profiles({{{0.0, 1.0, 1.0}}, {{1.0, 0.0, 1.0}}}, {0});
  const auto k01 = iwes::slope_asymmetry(zero_one);
  CHECK(k01.infinite);
  CHECK(std::isinf(k01.value));

  // Identical hypotheses: no informative pair.
  const auto same = tensor_from_profiles({{{0.3, 0.6}}, {{0.3, 0.6}}}, {0});
  const auto ksame = iwes::slope_asymmetry(same);
  CHECK(ksame.degenerate);
  CHECK(ksame.value == 1.0);
}

TEST_CASE("slope asymmetry is at least 1 on random instances") {
  iwes::RngStream rng(123);
  for (int rep = 0; rep < 30; ++rep) {
    const auto tensor = iwes::make_random_ce_tensor(2 + rng.uniform_int(5), 1 + rng.uniform_int(8),
                                                    2 + rng.uniform_int(3), rng);
    const auto k = iwes::slope_asymmetry(tensor);
    if (!k.degenerate) CHECK(k.value >= 1.0);
  }
}

TEST_CASE("theta_S is bounded by theta_AL times slope asymmetry") {
  iwes::RngStream rng(2024);
  int checked = 0;
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t H = 2 + rng.uniform_int(9);   // up to 10
    const std::size_t T = 2 + rng.uniform_int(19);  // up to 20
    const std::size_t c = 2 + rng.uniform_int(3);   // up to 4
    const auto tensor = iwes::make_random_ce_tensor(H, T, c, rng);
    const auto report = iwes::check_theorem3(tensor, rng.uniform_int(H));
    if (report.skipped_infinite_K) continue;
    ++checked;
    CHECK(report.holds);
    CHECK(report.theta_S <= report.theta_AL * report.K_ell + 1e-9);
  }
  CHECK(checked >= 35);  // clipped cross-entropy almost surely keeps K finite
}

TEST_CASE("theorem 3 check skips infinite slope asymmetry with the flag set") {
  // Three-label 0-1 loss: differing predictions agree on the third label,
  // so the pair has a zero diff next to a unit diff.
  const auto tensor = tensor_from_profiles(
      {{{0.0, 1.0, 1.0}, {0.0, 1.0, 1.0}}, {{1.0, 0.0, 1.0}, {0.0, 1.0, 1.0}}}, {0, 1});
  const auto report = iwes::check_theorem3(tensor, 0);
  CHECK(report.skipped_infinite_K);
  CHECK(std::isinf(report.K_ell));
  CHECK(report.holds);  // vacuously: nothing was asserted
}

TEST_CASE("K = 1 forces theta_S <= theta_AL directly") {
  // Binary 0-1 loss: profiles are (0,1) or (1,0); any differing pair has
  // per-label diffs (1,1), so K = 1 and the AL ball equals the S ball.
  const auto instance = iwes::make_thresholds_1d(6, 3, 1.0 / 3.0, 5);
  const auto tensor = iwes::make_zero_one_tensor(instance.table, instance.pool);
  const auto k = iwes::slope_asymmetry(tensor);
  REQUIRE_FALSE(k.infinite);
  CHECK(k.value == 1.0);
  const auto report = iwes::check_theorem3(tensor, instance.best);
  CHECK_FALSE(report.skipped_infinite_K);
  CHECK(report.holds);
  CHECK(report.theta_S <= report.theta_AL + 1e-12);
}

TEST_CASE("unbiasedness holds on the pool-of-4 instance") {
  const std::vector<double> losses{1.0, 1.0, 0.0, 0.0};
  const std::vector<double> probs{0.5, 0.5, 0.5, 0.5};
  iwes::RngStream rng(7);
  const auto report = iwes::check_unbiasedness(losses, probs, 100000, rng);
  CHECK(report.true_mean == 0.5);
  CHECK(std::abs(report.z_score) <= 3.0);
  CHECK(std::abs(report.mc_mean - 0.5) <= 3.0 * report.std_error);
}

TEST_CASE("capped estimator expectation matches the closed form") {
  const std::vector<double> losses{1.0, 1.0, 0.0, 0.0};
  const std::vector<double> probs{0.5, 0.5, 0.5, 0.5};
  iwes::RngStream rng(8);
  // Cap u = 1 turns the weight into exactly 1: E = (1/4)(0.5 + 0.5) = 0.25.
  const auto report = iwes::check_unbiasedness(losses, probs, 100000, rng, 1.0);
  CHECK(report.capped_true_mean == Catch::Approx(0.25).margin(1e-9));
  CHECK(report.capped_bias == Catch::Approx(-0.25).margin(1e-9));
  // Capped single-draw variance is (1/16) * 2 * 0.25 = 1/32.
  const double capped_se = std::sqrt((1.0 / 32.0) / 100000.0);
  CHECK(std::abs(report.capped_mc_mean - 0.25) <= 3.0 * capped_se);
}

TEST_CASE("all-ones probabilities make the estimator deterministic") {
  const std::vector<double> losses{0.2, 0.8, 0.5};
  const std::vector<double> probs{1.0, 1.0, 1.0};
  iwes::RngStream rng(9);
  const auto report = iwes::check_unbiasedness(losses, probs, 100, rng);
  CHECK(report.mc_mean == report.true_mean);
  CHECK(report.std_error == 0.0);
  CHECK(report.z_score == 0.0);
}

TEST_CASE("unbiasedness holds across random instances") {
  iwes::RngStream rng(31337);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t T = 3 + rng.uniform_int(10);
    std::vector<double> losses(T), probs(T);
    for (std::size_t i = 0; i < T; ++i) {
      losses[i] = rng.uniform01();
      probs[i] = 0.05 + 0.95 * rng.uniform01();
    }
    auto draws = rng.child(1000 + rep);
    const auto report = iwes::check_unbiasedness(losses, probs, 20000, draws);
    CHECK(std::abs(report.z_score) <= 3.0);
  }
}

TEST_CASE("unbiasedness check validates its inputs") {
  iwes::RngStream rng(1);
  CHECK_THROWS_AS(iwes::check_unbiasedness({}, {}, 10, rng), iwes::InvalidInputError);
  CHECK_THROWS_AS(iwes::check_unbiasedness({0.5}, {0.5, 0.5}, 10, rng), iwes::InvalidInputError);
  CHECK_THROWS_AS(iwes::check_unbiasedness({0.5}, {0.0}, 10, rng), iwes::InvalidInputError);
  CHECK_THROWS_AS(iwes::check_unbiasedness({0.5}, {1.5}, 10, rng), iwes::InvalidInputError);
  CHECK_THROWS_AS(iwes::check_unbiasedness({1.5}, {0.5}, 10, rng), iwes::InvalidInputError);
  CHECK_THROWS_AS(iwes::check_unbiasedness({0.5}, {0.5}, 1, rng), iwes::InvalidInputError);
  CHECK_THROWS_AS(iwes::check_unbiasedness({0.5}, {0.5}, 10, rng, 0.0), iwes::InvalidInputError);
}

namespace {

// Two hypotheses, maximally separated: h0 is always right, h1 always wrong.
HypothesisTable separated_table(std::size_t T) {
  Rows losses(2, std::vector<double>(T));
  for (std::size_t i = 0; i < T; ++i) {
    losses[0][i] = 0.0;
    losses[1][i] = 1.0;
  }
  return HypothesisTable(std::move(losses));
}

std::vector<std::size_t> cyclic_stream(int T, std::size_t cols) {
  std::vector<std::size_t> stream(T);
  for (int t = 0; t < T; ++t) stream[t] = static_cast<std::size_t>(t) % cols;
  return stream;
}

}  // namespace

TEST_CASE("clean-trial reconstruction and theorem 1 on the separated pair") {
  const int T = 400;
  const auto table = separated_table(8);
  iwes::IwesvOptions options;
  options.delta = 0.1;
  options.record_exact_mean_p = true;
  iwes::RngStream rng(5);
  const auto run = iwes::run_iwesv(table, cyclic_stream(T, 8), options, rng);

  REQUIRE(run.eliminated_at[0] == -1);
  REQUIRE(run.eliminated_at[1] > 0);
  CHECK(iwes::trial_is_clean(run, table, 0, options.delta, T));

  const auto report = iwes::check_theorem1({run}, table, 0, options.delta, T);
  CHECK(report.total_trials == 1);
  CHECK(report.violations == 0);
  CHECK(report.clean_trials == 1);
  CHECK(report.holds);
  CHECK(report.max_excess == 0.0);  // IW-ERM lands on the risk minimizer
  CHECK(report.bound ==
        Catch::Approx(2.0 * iwes::slack_standard(T, T, 2, options.delta)).margin(1e-15));
  CHECK(report.vacuous == (report.bound >= 1.0));
}

TEST_CASE("eliminating the best hypothesis is counted as a violation") {
  const int T = 50;
  const auto table = separated_table(4);
  iwes::IwesvOptions options;
  iwes::RngStream rng(6);
  auto run = iwes::run_iwesv(table, cyclic_stream(T, 4), options, rng);
  run.eliminated_at[0] = 5;  // forge an h*-elimination
  CHECK_FALSE(iwes::trial_is_clean(run, table, 0, options.delta, T));
  const auto report = iwes::check_theorem1({run}, table, 0, options.delta, T);
  CHECK(report.violations == 1);
  CHECK(report.clean_trials == 0);
}

TEST_CASE("theorem 2 per-step bound holds on the separated pair") {
  const int T = 400;
  const auto table = separated_table(8);
  iwes::IwesvOptions options;
  options.delta = 0.1;
  options.record_exact_mean_p = true;
  iwes::RngStream rng(11);
  const auto run = iwes::run_iwesv(table, cyclic_stream(T, 8), options, rng);

  // theta_S: single positive radius 1 with numerator 1.
  const auto tensor = tensor_from_profiles(
      {{{0.0, 1.0}}, {{1.0, 0.0}}}, {0});
  const auto theta = iwes::disagreement_coefficient(tensor, 0, DisagreementMode::kS);
  REQUIRE(theta.value == 1.0);

  const auto report = iwes::check_theorem2(run, table, 0, theta.value, options.delta, T);
  CHECK(report.clean);
  CHECK(report.holds);
  CHECK(report.first_violation == -1);
  CHECK(report.selections == run.selected.size());
  // Exact conditional expectations are 1 until elimination, then 0.
  const double expected_sum = static_cast<double>(run.eliminated_at[1] - 1);
  CHECK(report.sum_exact == expected_sum);
  CHECK(report.max_ratio <= 1.0);
  CHECK(report.max_ratio > 0.0);
}

TEST_CASE("theorem 2 check requires recorded conditional expectations") {
  const int T = 20;
  const auto table = separated_table(4);
  iwes::IwesvOptions options;  // record_exact_mean_p defaults to false
  iwes::RngStream rng(12);
  const auto run = iwes::run_iwesv(table, cyclic_stream(T, 4), options, rng);
  CHECK_THROWS_AS(iwes::check_theorem2(run, table, 0, 1.0, options.delta, T),
                  iwes::InvalidInputError);
}

TEST_CASE("blob pools have the requested shape and class balance") {
  const auto pool = iwes::make_blobs(103, 3, 4, 0.5, 42);
  REQUIRE(pool.size() == 103);
  CHECK(pool.num_classes() == 4);
  CHECK(pool.dim() == 3);
  std::vector<int> counts(4, 0);
  for (std::size_t i = 0; i < pool.size(); ++i) ++counts[pool[i].label];
  CHECK(counts == std::vector<int>{26, 26, 26, 25});

  const auto again = iwes::make_blobs(103, 3, 4, 0.5, 42);
  for (std::size_t i = 0; i < pool.size(); ++i)
    CHECK(pool[i].features == again[i].features);
  const auto other = iwes::make_blobs(103, 3, 4, 0.5, 43);
  bool any_differ = false;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool[i].features != other[i].features) any_differ = true;
  CHECK(any_differ);

  CHECK_THROWS_AS(iwes::make_blobs(0, 2, 3, 0.1, 1), iwes::InvalidInputError);
  CHECK_THROWS_AS(iwes::make_blobs(10, 0, 3, 0.1, 1), iwes::InvalidInputError);
  CHECK_THROWS_AS(iwes::make_blobs(10, 2, 1, 0.1, 1), iwes::InvalidInputError);
  CHECK_THROWS_AS(iwes::make_blobs(10, 2, 3, -0.1, 1), iwes::InvalidInputError);
}

TEST_CASE("xor pool is balanced and not linearly separated by construction") {
  const auto pool = iwes::make_xor(202, 0.1, 9);
  REQUIRE(pool.size() == 202);
  CHECK(pool.num_classes() == 2);
  CHECK(pool.dim() == 2);
  int zeros = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& ex = pool[i];
    const int quadrant_label = ex.features[0] * ex.features[1] > 0.0 ? 0 : 1;
    CHECK(ex.label == quadrant_label);  // sigma = 0.1 keeps points near corners
    zeros += ex.label == 0 ? 1 : 0;
  }
  CHECK(zeros == 102);  // remainder quadrants are the class-0 corners
}

TEST_CASE("thresholds instance realizes exact noise and risks") {
  const auto instance = iwes::make_thresholds_1d(25, 20, 0.1, 21);
  REQUIRE(instance.pool.size() == 500);
  REQUIRE(instance.table.num_hypotheses() == 21);
  CHECK(instance.realized_noise == Catch::Approx(0.1).margin(1e-15));
  CHECK(instance.thresholds[instance.best] == 0.5);
  CHECK(instance.best_risk == Catch::Approx(0.1).margin(1e-15));
  // Exact conditional label probabilities: grid >= 0.5 has P(y=1) = 0.9.
  for (std::size_t g = 0; g < instance.grid.size(); ++g) {
    const double expected = instance.grid[g] >= 0.5 ? 0.9 : 0.1;
    CHECK(instance.prob_one[g] == Catch::Approx(expected).margin(1e-15));
  }

  const auto clean = iwes::make_thresholds_1d(25, 20, 0.0, 21);
  CHECK(clean.best_risk == 0.0);
  CHECK(clean.realized_noise == 0.0);
  // Risk of threshold tau against the clean rule [x >= 0.5] is the mass of
  // grid points between tau and 0.5.
  for (std::size_t m = 0; m < clean.table.num_hypotheses(); ++m) {
    int mismatched = 0;
    for (std::size_t g = 0; g < clean.grid.size(); ++g) {
      const int truth = clean.grid[g] >= 0.5 ? 1 : 0;
      const int pred = clean.grid[g] >= clean.thresholds[m] ? 1 : 0;
      mismatched += truth != pred ? 1 : 0;
    }
    CHECK(clean.table.pool_risk(m) ==
          Catch::Approx(static_cast<double>(mismatched) / 25.0).margin(1e-15));
  }

  CHECK_THROWS_AS(iwes::make_thresholds_1d(1, 20, 0.1, 21), iwes::InvalidInputError);
  CHECK_THROWS_AS(iwes::make_thresholds_1d(25, 0, 0.1, 21), iwes::InvalidInputError);
  CHECK_THROWS_AS(iwes::make_thresholds_1d(25, 20, 0.6, 21), iwes::InvalidInputError);
}

TEST_CASE("random clipped cross-entropy tensors are valid and finite-K") {
  iwes::RngStream rng(55);
  const auto tensor = iwes::make_random_ce_tensor(4, 6, 3, rng);
  CHECK(tensor.num_hypotheses() == 4);
  CHECK(tensor.num_examples() == 6);
  CHECK(tensor.num_labels() == 3);
  const auto k = iwes::slope_asymmetry(tensor);
  CHECK_FALSE(k.infinite);
  CHECK_FALSE(k.degenerate);
  CHECK(k.value >= 1.0);
  CHECK_THROWS_AS(iwes::make_random_ce_tensor(0, 6, 3, rng), iwes::InvalidInputError);
  CHECK_THROWS_AS(iwes::make_random_ce_tensor(4, 6, 1, rng), iwes::InvalidInputError);
}
