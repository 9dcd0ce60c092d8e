#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "iwes/errors.hpp"
#include "iwes/rng.hpp"
#include "iwes/scoring.hpp"

using namespace iwes;

namespace {

// Random probability vector by normalizing positive uniforms.
std::vector<double> random_simplex(RngStream& rng, std::size_t c) {
  std::vector<double> p(c);
  double sum = 0.0;
  for (auto& v : p) {
    v = -std::log(1.0 - rng.uniform01());  // Exp(1), Dirichlet(1,...,1) after normalizing
    sum += v;
  }
  for (auto& v : p) v /= sum;
  // exact renormalization pass so the validator's 1e-9 budget is never at risk
  double s2 = 0.0;
  for (double v : p) s2 += v;
  p[0] += 1.0 - s2;
  return p;
}

}  // namespace

TEST_CASE("entropy disagreement matches high-precision references", "[scoring]") {
  CHECK(entropy_disagreement(0.9, 0.5) ==
        Catch::Approx(0.251749126187928984).margin(1e-15));
  CHECK(entropy_disagreement(0.5, 0.9) ==
        Catch::Approx(0.251749126187928984).margin(1e-15));
  CHECK(entropy_disagreement(0.3, 0.3) == 0.0);
  CHECK(entropy_disagreement(1.0, 1.0) == 0.0);
  CHECK(entropy_disagreement(0.0, 1.0) == 0.0);  // both x ln x terms vanish
  const double inv_e = std::exp(-1.0);
  CHECK(entropy_disagreement(inv_e, 1.0) == Catch::Approx(inv_e).margin(1e-15));
}

TEST_CASE("normalized entropy matches high-precision references", "[scoring]") {
  std::vector<double> skew = {0.7, 0.1, 0.1, 0.1};
  CHECK(normalized_entropy(skew) == Catch::Approx(0.678389824723519736).margin(1e-15));
  std::vector<double> uniform4 = {0.25, 0.25, 0.25, 0.25};
  CHECK(normalized_entropy(uniform4) == Catch::Approx(1.0).margin(1e-15));
  std::vector<double> onehot = {0.0, 1.0, 0.0};
  CHECK(normalized_entropy(onehot) == 0.0);
  std::vector<double> half = {0.5, 0.5};
  CHECK(normalized_entropy(half) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("loss entropy matches references and peaks at 1/e", "[scoring]") {
  CHECK(loss_entropy(0.5) == Catch::Approx(0.346573590279972655).margin(1e-15));
  const double inv_e = std::exp(-1.0);
  CHECK(loss_entropy(inv_e) == Catch::Approx(0.367879441171442322).margin(1e-15));
  CHECK(loss_entropy(0.0) == 0.0);
  CHECK(loss_entropy(1.0) == 0.0);
  // 1/e is the global max of -p ln p on [0,1]
  for (double p : {0.01, 0.2, 0.36, 0.38, 0.9, 0.999})
    CHECK(loss_entropy(p) <= loss_entropy(inv_e) + 1e-15);
}

TEST_CASE("multilabel binary entropy matches references", "[scoring]") {
  CHECK(multilabel_binary_entropy(0.9) == Catch::Approx(0.468995593589281221).margin(1e-15));
  CHECK(multilabel_binary_entropy(0.5) == Catch::Approx(1.0).margin(1e-15));
  CHECK(multilabel_binary_entropy(0.0) == 0.0);
  CHECK(multilabel_binary_entropy(1.0) == 0.0);
  CHECK(multilabel_binary_entropy(0.1) ==
        Catch::Approx(multilabel_binary_entropy(0.9)).margin(1e-15));
}

TEST_CASE("uncertainty baselines behave on known vectors", "[scoring]") {
  std::vector<double> p = {0.7, 0.3};
  CHECK(entropy_score(p) == Catch::Approx(0.610864302054893463).margin(1e-15));
  CHECK(margin_score(p) == Catch::Approx(0.6).margin(1e-15));
  CHECK(least_confident_score(p) == Catch::Approx(0.3).margin(1e-15));
  std::vector<double> uniform3 = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(margin_score(uniform3) == Catch::Approx(1.0).margin(1e-12));
  CHECK(least_confident_score(uniform3) == Catch::Approx(2.0 / 3).margin(1e-12));
  std::vector<double> onehot = {1.0, 0.0};
  CHECK(margin_score(onehot) == 0.0);
  CHECK(least_confident_score(onehot) == 0.0);
  CHECK(entropy_score(onehot) == 0.0);
}

TEST_CASE("scores validate their inputs", "[scoring]") {
  CHECK_THROWS_AS(entropy_disagreement(-0.1, 0.5), InvalidInputError);
  CHECK_THROWS_AS(entropy_disagreement(0.5, 1.1), InvalidInputError);
  CHECK_THROWS_AS(loss_entropy(1.5), InvalidInputError);
  CHECK_THROWS_AS(multilabel_binary_entropy(-1e-9), InvalidInputError);
  std::vector<double> not_prob = {0.5, 0.6};
  CHECK_THROWS_AS(normalized_entropy(not_prob), InvalidInputError);
  std::vector<double> single = {1.0};
  CHECK_THROWS_AS(normalized_entropy(single), InvalidInputError);
  CHECK_THROWS_AS(margin_score(single), InvalidInputError);
}

TEST_CASE("fuzz: every score lands in [0,1] on random inputs", "[scoring][fuzz]") {
  RngStream rng(20240817);
  const double inv_e = std::exp(-1.0);
  for (int it = 0; it < 10000; ++it) {
    const double a = rng.uniform01();
    const double b = rng.uniform01();
    const double d = entropy_disagreement(a, b);
    CHECK(d >= 0.0);
    CHECK(d <= inv_e + 1e-15);
    CHECK(d == entropy_disagreement(b, a));
    const double le = loss_entropy(a);
    CHECK(le >= 0.0);
    CHECK(le <= inv_e + 1e-15);
    const double mb = multilabel_binary_entropy(a);
    CHECK(mb >= 0.0);
    CHECK(mb <= 1.0);

    const std::size_t c = 2 + rng.uniform_int(9);
    const auto p = random_simplex(rng, c);
    const double ne = normalized_entropy(p);
    CHECK(ne >= 0.0);
    CHECK(ne <= 1.0);
    const double ms = margin_score(p);
    CHECK(ms >= 0.0);
    CHECK(ms <= 1.0);
    const double lc = least_confident_score(p);
    CHECK(lc >= 0.0);
    CHECK(lc <= 1.0 - 1.0 / static_cast<double>(c) + 1e-12);
    CHECK(entropy_score(p) >= 0.0);
    CHECK(entropy_score(p) <= std::log(static_cast<double>(c)) + 1e-12);
  }
}
