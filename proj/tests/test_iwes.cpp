#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <set>
#include <vector>

#include "iwes/data.hpp"
#include "iwes/errors.hpp"
#include "iwes/iwes.hpp"
#include "iwes/learners.hpp"
#include "iwes/rng.hpp"

using namespace iwes;

namespace {

// Model that outputs the same probability vector everywhere.
class ConstModel final : public TrainedModel {
public:
  explicit ConstModel(std::vector<double> p) : p_(std::move(p)) {}
  std::vector<double> predict_proba(std::span<const double>) const override { return p_; }
  int num_classes() const override { return static_cast<int>(p_.size()); }
  std::vector<double> embed(std::span<const double> x) const override {
    return std::vector<double>(x.begin(), x.end());
  }
  std::size_t embedding_dim() const override { return 0; }

private:
  std::vector<double> p_;
};

// Trainer that ignores the data and returns a fixed-output model.
class ConstTrainer final : public WeightedTrainer {
public:
  explicit ConstTrainer(std::vector<double> p) : p_(std::move(p)) {}
  std::shared_ptr<const TrainedModel> train(const std::vector<WeightedExample>&, const Pool&,
                                            RngStream&) const override {
    return std::make_shared<ConstModel>(p_);
  }

private:
  std::vector<double> p_;
};

Pool filler_pool(std::size_t n, int c) {
  std::vector<LabeledExample> ex(n);
  for (std::size_t i = 0; i < n; ++i) {
    ex[i].features = {static_cast<double>(i)};
    ex[i].label = static_cast<int>(i % c);
  }
  return Pool(std::move(ex), c);
}

// Probability vector (a, (1-a)/2, (1-a)/2) whose normalized entropy equals
// the requested score, found by bisection (entropy falls as a -> 1).
std::vector<double> three_class_probs_with_entropy(double target) {
  double lo = 1.0 / 3.0, hi = 1.0 - 1e-15;
  for (int it = 0; it < 200; ++it) {
    const double a = 0.5 * (lo + hi);
    std::vector<double> p = {a, (1.0 - a) / 2.0, (1.0 - a) / 2.0};
    (normalized_entropy(p) > target ? lo : hi) = a;
  }
  const double a = 0.5 * (lo + hi);
  return {a, (1.0 - a) / 2.0, (1.0 - a) / 2.0};
}

}  // namespace

TEST_CASE("pass rescaling formula", "[iwes]") {
  CHECK(stream_pass_rescale(0.2, 0) == 0.2);
  CHECK(stream_pass_rescale(0.2, 5) == Catch::Approx(0.3).margin(1e-15));
  CHECK(stream_pass_rescale(0.9, 3) == 1.0);
  CHECK(stream_pass_rescale(0.0, 7) == 0.0);
  CHECK_THROWS_AS(stream_pass_rescale(-0.1, 0), InvalidInputError);
  CHECK_THROWS_AS(stream_pass_rescale(1.1, 0), InvalidInputError);
  CHECK_THROWS_AS(stream_pass_rescale(0.5, -1), InvalidInputError);
}

TEST_CASE("variant names round-trip", "[iwes]") {
  for (Variant v : {Variant::kDisagreement, Variant::kEntropy, Variant::kLossEntropy,
                    Variant::kMultilabelEntropy})
    CHECK(parse_variant(variant_name(v)) == v);
  CHECK_THROWS_AS(parse_variant("bogus"), InvalidInputError);
}

TEST_CASE("config validation", "[iwes]") {
  Pool pool = filler_pool(10, 2);
  IwesConfig cfg;
  cfg.seed_size = 2;
  cfg.batch_size = 2;
  cfg.rounds = 2;
  ConstTrainer trainer({0.5, 0.5});

  IwesConfig bad = cfg;
  bad.rounds = 5;  // 2 + 5*2 > 10
  CHECK_THROWS_AS(run_iwes(pool, bad, trainer), InvalidInputError);
  bad = cfg;
  bad.weight_cap = 1.0;
  CHECK_THROWS_AS(run_iwes(pool, bad, trainer), InvalidInputError);
  bad = cfg;
  bad.rounds = -1;
  CHECK_THROWS_AS(run_iwes(pool, bad, trainer), InvalidInputError);
  bad = cfg;
  bad.seed_size = 0;
  CHECK_THROWS_AS(run_iwes(pool, bad, trainer), InvalidInputError);
  bad = cfg;
  bad.probability_floor = 1.5;
  CHECK_THROWS_AS(run_iwes(pool, bad, trainer), InvalidInputError);
  bad = cfg;
  bad.max_passes = 0;
  CHECK_THROWS_AS(run_iwes(pool, bad, trainer), InvalidInputError);
  bad = cfg;
  bad.variant = Variant::kMultilabelEntropy;  // pool has 2 classes: fine
  CHECK_NOTHROW(run_iwes(pool, bad, trainer));
  Pool pool3 = filler_pool(10, 3);
  ConstTrainer trainer3({0.4, 0.3, 0.3});
  CHECK_THROWS_AS(run_iwes(pool3, bad, trainer3), InvalidInputError);
  Pool pool1 = filler_pool(10, 1);
  CHECK_THROWS_AS(run_iwes(pool1, cfg, trainer), InvalidInputError);
}

TEST_CASE("degenerate config: whole pool as seed set, no rounds", "[iwes]") {
  Pool pool = filler_pool(12, 2);
  IwesConfig cfg;
  cfg.seed_size = 12;
  cfg.batch_size = 1;
  cfg.rounds = 0;
  cfg.seed = 77;
  ConstTrainer trainer({0.6, 0.4});
  int models_seen = 0;
  const auto result = run_iwes(pool, cfg, trainer, [&](int r, const TrainedModel&) {
    CHECK(r == 0);
    ++models_seen;
  });
  CHECK(models_seen == 1);
  REQUIRE(result.trace.records.size() == 12);
  std::set<std::size_t> seen;
  for (const auto& rec : result.trace.records) {
    CHECK(rec.round == 0);
    CHECK(rec.weight == 1.0);
    CHECK(rec.p == 1.0);
    seen.insert(rec.pool_index);
  }
  CHECK(seen.size() == 12);  // a permutation of the whole pool
  CHECK(result.trace.round_summaries.empty());
  CHECK(result.final_model != nullptr);
}

TEST_CASE("uniform-probability model accepts the first k streamed with weight 1",
          "[iwes]") {
  Pool pool = filler_pool(50, 4);
  IwesConfig cfg;
  cfg.seed_size = 5;
  cfg.batch_size = 10;
  cfg.rounds = 2;
  cfg.variant = Variant::kEntropy;
  cfg.seed = 3;
  ConstTrainer trainer({0.25, 0.25, 0.25, 0.25});
  const auto result = run_iwes(pool, cfg, trainer);
  REQUIRE(result.trace.records.size() == 5 + 20);
  for (const auto& rec : result.trace.records) {
    if (rec.round == 0) continue;
    CHECK(rec.p == 1.0);
    CHECK(rec.weight == 1.0);
    CHECK(rec.pass == 0);
  }
  for (const auto& s : result.trace.round_summaries) {
    CHECK(s.selected == 10);
    CHECK(s.passes_used == 1);
    CHECK(s.bernoulli_trials == 10);    // every coin accepts at p=1
    CHECK(s.candidates_streamed == 10);  // the first k streamed
  }
}

TEST_CASE("p=0.5 candidates: weight 2 and two Bernoulli trials per acceptance",
          "[iwes][montecarlo]") {
  const auto probs = three_class_probs_with_entropy(0.5);
  REQUIRE(normalized_entropy(probs) == Catch::Approx(0.5).margin(1e-12));
  Pool pool = filler_pool(3000, 3);
  ConstTrainer trainer(probs);
  std::uint64_t total_trials = 0;
  std::uint64_t total_accepted = 0;
  for (int run = 0; run < 400; ++run) {
    IwesConfig cfg;
    cfg.seed_size = 1;
    cfg.batch_size = 25;
    cfg.rounds = 1;
    cfg.variant = Variant::kEntropy;
    cfg.weight_cap = 2.0;
    cfg.seed = 9000 + run;
    const auto result = run_iwes(pool, cfg, trainer);
    for (const auto& rec : result.trace.records) {
      if (rec.round == 0) continue;
      CHECK(std::abs(rec.weight - 2.0) < 1e-9);
      CHECK(std::abs(rec.p - 0.5) < 1e-9);
    }
    total_trials += result.trace.round_summaries[0].bernoulli_trials;
    total_accepted += result.trace.round_summaries[0].selected;
  }
  REQUIRE(total_accepted == 400 * 25);
  // geometric(1/2) trials per acceptance: mean 2, sd sqrt(2); 3 sigma band
  const double mean_trials =
      static_cast<double>(total_trials) / static_cast<double>(total_accepted);
  const double band = 3.0 * std::sqrt(2.0 / static_cast<double>(total_accepted));
  CHECK(std::abs(mean_trials - 2.0) < band);
}

TEST_CASE("identical twin models make every disagreement zero: exhaustion", "[iwes]") {
  Pool pool = filler_pool(20, 2);
  IwesConfig cfg;
  cfg.seed_size = 2;
  cfg.batch_size = 3;
  cfg.rounds = 1;
  cfg.variant = Variant::kDisagreement;
  cfg.max_passes = 3;
  ConstTrainer trainer({0.7, 0.3});  // both twins: p_f = p_g everywhere
  try {
    run_iwes(pool, cfg, trainer);
    FAIL("expected PoolExhaustedError");
  } catch (const PoolExhaustedError& e) {
    CHECK(e.partial_trace.records.size() == 2);  // just the seed set
    REQUIRE(e.partial_trace.round_summaries.size() == 1);
    const auto& s = e.partial_trace.round_summaries[0];
    CHECK(s.passes_used == 3);
    CHECK(s.bernoulli_trials == 0);  // p = 0 never spends a coin
    CHECK(s.candidates_streamed == 3 * 18);
    CHECK(s.selected == 0);
  }
}

TEST_CASE("probability floor rescues zero-score candidates", "[iwes]") {
  Pool pool = filler_pool(30, 2);
  IwesConfig cfg;
  cfg.seed_size = 2;
  cfg.batch_size = 5;
  cfg.rounds = 1;
  cfg.variant = Variant::kEntropy;
  cfg.max_passes = 50;
  cfg.seed = 5;
  ConstTrainer trainer({1.0, 0.0});  // one-hot: entropy score 0 everywhere
  CHECK_THROWS_AS(run_iwes(pool, cfg, trainer), PoolExhaustedError);
  cfg.probability_floor = 0.3;
  const auto result = run_iwes(pool, cfg, trainer);
  for (const auto& rec : result.trace.records) {
    if (rec.round == 0) continue;
    CHECK(rec.p >= 0.3);
    CHECK(rec.weight == Catch::Approx(2.0));  // min(1/0.3, 2)
  }
}

TEST_CASE("weights always invert the coin probability, capped at u", "[iwes]") {
  const auto probs = three_class_probs_with_entropy(0.35);
  Pool pool = filler_pool(500, 3);
  ConstTrainer trainer(probs);
  IwesConfig cfg;
  cfg.seed_size = 10;
  cfg.batch_size = 20;
  cfg.rounds = 3;
  cfg.weight_cap = 2.5;
  cfg.variant = Variant::kEntropy;
  cfg.seed = 21;
  const auto result = run_iwes(pool, cfg, trainer);
  std::set<std::size_t> seen;
  REQUIRE(result.trace.records.size() == 10 + 60);
  REQUIRE(result.trace.selection.size() == result.trace.records.size());
  for (std::size_t i = 0; i < result.trace.records.size(); ++i) {
    const auto& rec = result.trace.records[i];
    CHECK(!seen.count(rec.pool_index));  // selection without replacement
    seen.insert(rec.pool_index);
    CHECK(rec.weight <= cfg.weight_cap);
    CHECK(rec.weight >= 1.0);
    CHECK(rec.p > 0.0);
    CHECK(rec.p <= 1.0);
    CHECK(rec.weight == std::min(1.0 / rec.p, cfg.weight_cap));
    const auto& sel = result.trace.selection[i];
    CHECK(sel.example_index == rec.pool_index);
    CHECK(sel.weight == rec.weight);
    CHECK(sel.round == rec.round);
  }
  // pass rescaling: any record accepted on pass j used p = min(1, base*(1+j/10))
  const double base = normalized_entropy(probs);
  for (const auto& rec : result.trace.records) {
    if (rec.round == 0) continue;
    CHECK(rec.p == Catch::Approx(stream_pass_rescale(base, rec.pass)).margin(1e-12));
  }
}

TEST_CASE("fixed seed reproduces the trace, different seed changes it", "[iwes]") {
  const auto probs = three_class_probs_with_entropy(0.45);
  Pool pool = filler_pool(300, 3);
  ConstTrainer trainer(probs);
  IwesConfig cfg;
  cfg.seed_size = 8;
  cfg.batch_size = 10;
  cfg.rounds = 2;
  cfg.variant = Variant::kEntropy;
  cfg.seed = 2026;
  const auto a = run_iwes(pool, cfg, trainer);
  const auto b = run_iwes(pool, cfg, trainer);
  REQUIRE(a.trace.records.size() == b.trace.records.size());
  bool identical = true;
  for (std::size_t i = 0; i < a.trace.records.size(); ++i) {
    identical = identical && a.trace.records[i].pool_index == b.trace.records[i].pool_index &&
                a.trace.records[i].p == b.trace.records[i].p &&
                a.trace.records[i].weight == b.trace.records[i].weight &&
                a.trace.records[i].round == b.trace.records[i].round &&
                a.trace.records[i].pass == b.trace.records[i].pass;
  }
  CHECK(identical);
  cfg.seed = 2027;
  const auto c = run_iwes(pool, cfg, trainer);
  bool any_diff = c.trace.records.size() != a.trace.records.size();
  for (std::size_t i = 0; !any_diff && i < a.trace.records.size(); ++i)
    any_diff = a.trace.records[i].pool_index != c.trace.records[i].pool_index;
  CHECK(any_diff);
}

TEST_CASE("seed sets are shareable with external selectors", "[iwes]") {
  Pool pool = filler_pool(40, 2);
  IwesConfig cfg;
  cfg.seed_size = 6;
  cfg.batch_size = 2;
  cfg.rounds = 1;
  cfg.seed = 314;
  ConstTrainer trainer({0.5, 0.5});
  const auto result = run_iwes(pool, cfg, trainer);
  const auto shared = draw_seed_set(pool.size(), cfg.seed_size, cfg.seed);
  REQUIRE(shared.size() == 6);
  for (std::size_t i = 0; i < shared.size(); ++i)
    CHECK(result.trace.records[i].pool_index == shared[i]);
}

TEST_CASE("multilabel variant scores the positive-class entropy", "[iwes]") {
  Pool pool = filler_pool(30, 2);
  IwesConfig cfg;
  cfg.seed_size = 2;
  cfg.batch_size = 5;
  cfg.rounds = 1;
  cfg.variant = Variant::kMultilabelEntropy;
  cfg.seed = 6;
  ConstTrainer trainer({0.5, 0.5});  // binary entropy of 0.5 = 1: always accept
  const auto result = run_iwes(pool, cfg, trainer);
  for (const auto& rec : result.trace.records) {
    if (rec.round == 0) continue;
    CHECK(rec.p == 1.0);
    CHECK(rec.weight == 1.0);
  }
}

TEST_CASE("disagreement variant with a real trainer completes end to end", "[iwes]") {
  RngStream data_rng(40);
  std::vector<LabeledExample> ex;
  for (int cls = 0; cls < 2; ++cls)
    for (int i = 0; i < 30; ++i) {
      const double cx = cls == 0 ? -2.0 : 2.0;
      ex.push_back({{cx + data_rng.normal(), cx + data_rng.normal()}, cls});
    }
  Pool pool(std::move(ex), 2);

  TrainerConfig tc;
  tc.learning_rate = 0.1;
  tc.max_epochs = 40;
  SgdTrainer trainer(tc);
  IwesConfig cfg;
  cfg.seed_size = 10;
  cfg.batch_size = 5;
  cfg.rounds = 2;
  cfg.variant = Variant::kDisagreement;
  cfg.seed = 99;
  std::vector<int> rounds_seen;
  const auto result =
      run_iwes(pool, cfg, trainer, [&](int r, const TrainedModel&) { rounds_seen.push_back(r); });
  CHECK(rounds_seen == std::vector<int>{0, 1, 2});
  CHECK(result.trace.records.size() == 10 + 10);
  CHECK(result.trace.round_summaries.size() == 2);
  for (const auto& s : result.trace.round_summaries) {
    CHECK(s.model_pool_accuracy >= 0.0);
    CHECK(s.model_pool_accuracy <= 1.0);
  }
}
