#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "iwes/data.hpp"
#include "iwes/errors.hpp"
#include "iwes/model.hpp"
#include "iwes/rng.hpp"
#include "iwes/scoring.hpp"

namespace iwes {

// Which score drives the acceptance probability.
enum class Variant {
  kDisagreement,      // |pf ln pf - pg ln pg| on the true label (twin models)
  kEntropy,           // normalized prediction entropy (label-free)
  kLossEntropy,       // -pf ln pf on the true label
  kMultilabelEntropy  // binary entropy of the positive-class probability
};

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kDisagreement: return "dis";
    case Variant::kEntropy: return "ent";
    case Variant::kLossEntropy: return "loss";
    case Variant::kMultilabelEntropy: return "multilabel-ent";
  }
  throw InternalError("variant_name: unknown variant");
}

inline Variant parse_variant(const std::string& s) {
  if (s == "dis") return Variant::kDisagreement;
  if (s == "ent") return Variant::kEntropy;
  if (s == "loss") return Variant::kLossEntropy;
  if (s == "multilabel-ent") return Variant::kMultilabelEntropy;
  throw InvalidInputError("unknown variant: " + s);
}

struct IwesConfig {
  std::size_t seed_size = 1;   // k0, drawn uniformly without replacement
  std::size_t batch_size = 1;  // k accepted per round
  int rounds = 1;              // R (0 allowed: seed set only)
  double weight_cap = 2.0;     // u, must exceed 1
  Variant variant = Variant::kEntropy;
  int max_passes = 100;          // passes over the remaining pool per round
  double probability_floor = 0.0;  // optional lower bound on the raw score
  bool reshuffle_each_pass = true;  // false = one shuffle per round
  std::uint64_t seed = 0;

  void validate(const Pool& pool) const {
    if (pool.size() == 0) throw InvalidInputError("run: empty pool");
    if (pool.num_classes() < 2) throw InvalidInputError("run: need at least 2 classes");
    if (seed_size < 1) throw InvalidInputError("run: seed_size must be positive");
    if (batch_size < 1) throw InvalidInputError("run: batch_size must be positive");
    if (rounds < 0) throw InvalidInputError("run: rounds must be nonnegative");
    if (!(weight_cap > 1.0)) throw InvalidInputError("run: weight_cap must exceed 1");
    if (max_passes < 1) throw InvalidInputError("run: max_passes must be positive");
    if (!(probability_floor >= 0.0 && probability_floor <= 1.0))
      throw InvalidInputError("run: probability_floor must lie in [0,1]");
    if (seed_size + static_cast<std::size_t>(rounds) * batch_size > pool.size())
      throw InvalidInputError("run: seed_size + rounds*batch_size exceeds pool size");
    if (variant == Variant::kMultilabelEntropy && pool.num_classes() != 2)
      throw InvalidInputError(
          "run: multilabel-ent reduces each label to a binary task and needs 2 classes");
  }
};

// One accepted example. p is the probability the accepting coin used, i.e.
// after any pass rescaling; seed-set entries carry p = 1 and weight 1.
struct SelectionRecord {
  int round = 0;
  int pass = 0;
  std::size_t pool_index = 0;
  double p = 1.0;
  double weight = 1.0;
};

struct RoundSummary {
  int round = 0;
  int passes_used = 0;           // final pass index reached (0-based count + 1)
  std::uint64_t bernoulli_trials = 0;
  std::uint64_t candidates_streamed = 0;
  std::size_t selected = 0;
  double model_pool_accuracy = 0.0;  // accuracy of the round's scoring model
};

struct SelectionTrace {
  std::vector<SelectionRecord> records;       // seed entries first, round order
  std::vector<RoundSummary> round_summaries;  // rounds 1..R
  std::vector<WeightedExample> selection;     // cumulative weighted subset
};

// A round failed to accept its quota within max_passes (or ran out of active
// candidates). Carries everything selected up to the failure.
class PoolExhaustedError : public std::runtime_error {
public:
  PoolExhaustedError(const std::string& what, SelectionTrace partial)
      : std::runtime_error(what), partial_trace(std::move(partial)) {}
  SelectionTrace partial_trace;
};

struct IwesResult {
  SelectionTrace trace;
  std::shared_ptr<const TrainedModel> final_model;
};

// Multi-pass probability rescaling: pass j multiplies the raw probability by
// 1 + j/10, clipped to 1, so repeatedly skipped examples become likelier.
inline double stream_pass_rescale(double base_p, int pass_index) {
  if (!(base_p >= 0.0 && base_p <= 1.0))
    throw InvalidInputError("stream_pass_rescale: probability outside [0,1]");
  if (pass_index < 0) throw InvalidInputError("stream_pass_rescale: negative pass index");
  return std::min(1.0, base_p * (1.0 + static_cast<double>(pass_index) / 10.0));
}

// Seed set draw, exposed so external selectors can share the identical seed
// set for matched-budget comparisons.
inline std::vector<std::size_t> draw_seed_set(std::size_t pool_size, std::size_t k0,
                                              std::uint64_t seed) {
  RngStream rng = RngStream(seed).child(0);
  return rng.sample_without_replacement(pool_size, k0);
}

namespace detail {

inline double sampling_score(Variant variant, const ProbabilisticClassifier& f,
                             const ProbabilisticClassifier* g, const LabeledExample& ex) {
  const auto pf = f.predict_proba(ex.features);
  switch (variant) {
    case Variant::kDisagreement: {
      const auto pg = g->predict_proba(ex.features);
      return entropy_disagreement(pf[ex.label], pg[ex.label]);
    }
    case Variant::kEntropy:
      return normalized_entropy(pf);
    case Variant::kLossEntropy:
      return loss_entropy(pf[ex.label]);
    case Variant::kMultilabelEntropy:
      return multilabel_binary_entropy(pf[1]);
  }
  throw InternalError("sampling_score: unknown variant");
}

}  // namespace detail

// The batch-streaming selector. Each round trains from fresh random
// initializations on everything selected so far, then streams the shuffled
// remaining pool, accepting candidate x with probability p(x) and storing
// importance weight min(1/p, u). on_model (optional) receives each model
// trained on the selection through round r, including the final one, keyed
// by r (0 = seed set only).
inline IwesResult run_iwes(
    const Pool& input_pool, const IwesConfig& config, const WeightedTrainer& trainer,
    const std::function<void(int, const TrainedModel&)>& on_model = nullptr) {
  config.validate(input_pool);
  Pool pool = input_pool;  // removal happens on a private copy
  RngStream root(config.seed);
  RngStream shuffle_rng = root.child(1);
  RngStream coin_rng = root.child(2);

  SelectionTrace trace;
  const auto seed_idx = draw_seed_set(pool.size(), config.seed_size, config.seed);
  for (std::size_t i : seed_idx) {
    trace.records.push_back({0, 0, i, 1.0, 1.0});
    trace.selection.push_back({i, 1.0, 1.0, 0});
    pool.remove(i);
  }

  const bool twin = config.variant == Variant::kDisagreement;
  std::shared_ptr<const TrainedModel> model;
  for (int r = 1; r <= config.rounds; ++r) {
    RngStream f_rng = root.child(100 + static_cast<std::uint64_t>(r));
    model = trainer.train(trace.selection, input_pool, f_rng);
    if (on_model) on_model(r - 1, *model);
    std::shared_ptr<const TrainedModel> twin_model;
    if (twin) {
      RngStream g_rng = root.child(200 + static_cast<std::uint64_t>(r));
      twin_model = trainer.train(trace.selection, input_pool, g_rng);
    }

    RoundSummary summary;
    summary.round = r;
    summary.model_pool_accuracy = accuracy(*model, input_pool);

    std::size_t accepted = 0;
    std::vector<std::size_t> order;
    for (int pass = 0; accepted < config.batch_size; ++pass) {
      if (pass >= config.max_passes) {
        summary.passes_used = pass;
        summary.selected = accepted;
        trace.round_summaries.push_back(summary);
        throw PoolExhaustedError(
            "round " + std::to_string(r) + " accepted " + std::to_string(accepted) + "/" +
                std::to_string(config.batch_size) + " within max_passes",
            std::move(trace));
      }
      if (config.reshuffle_each_pass || pass == 0) {
        order = pool.active_indices();
        shuffle_rng.shuffle(order);
      }
      if (pool.active_count() == 0) {
        summary.passes_used = pass;
        summary.selected = accepted;
        trace.round_summaries.push_back(summary);
        throw PoolExhaustedError("round " + std::to_string(r) + ": pool exhausted",
                                 std::move(trace));
      }
      summary.passes_used = pass + 1;
      for (std::size_t idx : order) {
        if (pool.is_removed(idx)) continue;  // accepted earlier this round
        ++summary.candidates_streamed;
        const double base_p =
            std::max(detail::sampling_score(config.variant, *model, twin_model.get(), pool[idx]),
                     config.probability_floor);
        const double p = stream_pass_rescale(base_p, pass);
        if (p <= 0.0) continue;  // can never be accepted; no coin spent
        ++summary.bernoulli_trials;
        if (!coin_rng.bernoulli(p)) continue;
        const double weight = std::min(1.0 / p, config.weight_cap);
        trace.records.push_back({r, pass, idx, p, weight});
        trace.selection.push_back({idx, weight, p, r});
        pool.remove(idx);
        if (++accepted == config.batch_size) break;
      }
    }
    summary.selected = accepted;
    trace.round_summaries.push_back(summary);
  }

  RngStream final_rng = root.child(100 + static_cast<std::uint64_t>(config.rounds) + 1);
  auto final_model = trainer.train(trace.selection, input_pool, final_rng);
  if (on_model) on_model(config.rounds, *final_model);
  return IwesResult{std::move(trace), std::move(final_model)};
}

}  // namespace iwes
