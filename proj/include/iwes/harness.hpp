#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "iwes/baselines.hpp"
#include "iwes/data.hpp"
#include "iwes/errors.hpp"
#include "iwes/hypothesis.hpp"
#include "iwes/iwes.hpp"
#include "iwes/iwesv.hpp"
#include "iwes/learners.hpp"
#include "iwes/model.hpp"
#include "iwes/rng.hpp"
#include "iwes/synthetic.hpp"

namespace iwes {

enum class SelectorKind {
  kIwesDis,
  kIwesEnt,
  kIwesLoss,
  kIwesV,
  kRandom,
  kMargin,
  kEntropy,
  kLeastConfident,
  kCoreset,
  kBadge,
};

inline const char* selector_name(SelectorKind kind) {
  switch (kind) {
    case SelectorKind::kIwesDis: return "iwes-dis";
    case SelectorKind::kIwesEnt: return "iwes-ent";
    case SelectorKind::kIwesLoss: return "iwes-loss";
    case SelectorKind::kIwesV: return "iwesv";
    case SelectorKind::kRandom: return "random";
    case SelectorKind::kMargin: return "margin";
    case SelectorKind::kEntropy: return "entropy";
    case SelectorKind::kLeastConfident: return "least-confident";
    case SelectorKind::kCoreset: return "coreset";
    case SelectorKind::kBadge: return "badge";
  }
  throw InternalError("selector_name: unreachable");
}

inline SelectorKind parse_selector_kind(const std::string& name) {
  for (SelectorKind kind :
       {SelectorKind::kIwesDis, SelectorKind::kIwesEnt, SelectorKind::kIwesLoss,
        SelectorKind::kIwesV, SelectorKind::kRandom, SelectorKind::kMargin, SelectorKind::kEntropy,
        SelectorKind::kLeastConfident, SelectorKind::kCoreset, SelectorKind::kBadge})
    if (name == selector_name(kind)) return kind;
  throw InvalidInputError("unknown selector: " + name);
}

inline bool selector_is_iwes(SelectorKind kind) {
  return kind == SelectorKind::kIwesDis || kind == SelectorKind::kIwesEnt ||
         kind == SelectorKind::kIwesLoss;
}

struct IwesvParams {
  double delta = 0.1;
  SlackVariant slack = SlackVariant::kStandard;
  int steps = 500;
  std::size_t num_thresholds = 21;
};

struct ExperimentConfig {
  std::string dataset_path;
  std::string test_dataset_path;  // empty: carve a test split out of the dataset
  int num_classes = 0;            // 0 = infer from labels
  double test_fraction = 0.2;
  SelectorKind selector = SelectorKind::kRandom;
  std::size_t seed_size = 1;
  std::size_t batch_size = 1;
  int rounds = 1;
  // streaming-selector parameters
  double weight_cap = 2.0;
  int max_passes = 100;
  double probability_floor = 0.0;
  std::size_t badge_partitions = 1;
  IwesvParams iwesv;
  TrainerConfig trainer;
  bool auto_learning_rate = false;  // tune on the seed set over the shared grid
  int trials = 1;
  int workers = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (dataset_path.empty()) throw InvalidInputError("config: dataset path is required");
    if (trials < 1) throw InvalidInputError("config: trials must be >= 1");
    if (workers < 1) throw InvalidInputError("config: workers must be >= 1");
    if (rounds < 0) throw InvalidInputError("config: rounds must be >= 0");
    if (num_classes < 0) throw InvalidInputError("config: num_classes must be >= 0");
    if (test_dataset_path.empty() && !(test_fraction > 0.0 && test_fraction < 1.0) &&
        selector != SelectorKind::kIwesV)
      throw InvalidInputError("config: test_fraction must lie in (0,1) without a test dataset");
    if (selector == SelectorKind::kIwesV) {
      if (!(iwesv.delta > 0.0 && iwesv.delta <= 1.0))
        throw InvalidInputError("config: delta must lie in (0,1]");
      if (iwesv.steps < 1) throw InvalidInputError("config: steps must be >= 1");
      if (iwesv.num_thresholds < 2)
        throw InvalidInputError("config: num_thresholds must be >= 2");
      if (rounds < 1) throw InvalidInputError("config: rounds must be >= 1 for iwesv curves");
    } else {
      if (seed_size < 1) throw InvalidInputError("config: seed_size must be >= 1");
      if (rounds > 0 && batch_size < 1)
        throw InvalidInputError("config: batch_size must be >= 1");
      if (!(weight_cap > 1.0)) throw InvalidInputError("config: weight_cap must exceed 1");
      if (max_passes < 1) throw InvalidInputError("config: max_passes must be >= 1");
      if (!(probability_floor >= 0.0 && probability_floor < 1.0))
        throw InvalidInputError("config: probability_floor must lie in [0,1)");
      if (badge_partitions < 1)
        throw InvalidInputError("config: badge partitions must be >= 1");
    }
  }
};

namespace detail {

inline void require_known_keys(const nlohmann::json& obj,
                               const std::vector<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw InvalidInputError("config: " + where + " must be a JSON object");
  for (const auto& item : obj.items())
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      throw InvalidInputError("config: unknown key \"" + item.key() + "\" in " + where);
}

inline GradMode parse_grad_mode(const std::string& name) {
  if (name == "batch-mean") return GradMode::kBatchMean;
  if (name == "sum") return GradMode::kSum;
  throw InvalidInputError("config: grad_mode must be \"batch-mean\" or \"sum\"");
}

inline SlackVariant parse_slack_variant(const std::string& name) {
  if (name == "standard") return SlackVariant::kStandard;
  if (name == "enhanced") return SlackVariant::kEnhanced;
  throw InvalidInputError("config: slack must be \"standard\" or \"enhanced\"");
}

inline std::string format_g17(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace detail

// Strictly-validated JSON config: unknown keys anywhere are rejected, and
// selector parameters are checked against the selector kind up front.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  ExperimentConfig config;
  try {
    detail::require_known_keys(
        j,
        {"dataset", "test_dataset", "num_classes", "test_fraction", "selector", "seed_size",
         "batch_size", "rounds", "trials", "workers", "seed", "selector_params", "trainer"},
        "config");
    if (!j.contains("dataset") || !j.contains("selector"))
      throw InvalidInputError("config: \"dataset\" and \"selector\" are required");
    config.dataset_path = j.at("dataset").get<std::string>();
    config.selector = parse_selector_kind(j.at("selector").get<std::string>());
    if (j.contains("test_dataset")) config.test_dataset_path = j.at("test_dataset").get<std::string>();
    if (j.contains("num_classes")) config.num_classes = j.at("num_classes").get<int>();
    if (j.contains("test_fraction")) config.test_fraction = j.at("test_fraction").get<double>();
    if (j.contains("seed_size")) config.seed_size = j.at("seed_size").get<std::size_t>();
    if (j.contains("batch_size")) config.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("rounds")) config.rounds = j.at("rounds").get<int>();
    if (j.contains("trials")) config.trials = j.at("trials").get<int>();
    if (j.contains("workers")) config.workers = j.at("workers").get<int>();
    if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();

    if (j.contains("selector_params")) {
      const auto& sp = j.at("selector_params");
      if (selector_is_iwes(config.selector)) {
        detail::require_known_keys(sp, {"weight_cap", "max_passes", "probability_floor"},
                                   "selector_params");
        if (sp.contains("weight_cap")) config.weight_cap = sp.at("weight_cap").get<double>();
        if (sp.contains("max_passes")) config.max_passes = sp.at("max_passes").get<int>();
        if (sp.contains("probability_floor"))
          config.probability_floor = sp.at("probability_floor").get<double>();
      } else if (config.selector == SelectorKind::kIwesV) {
        detail::require_known_keys(sp, {"delta", "slack", "steps", "num_thresholds"},
                                   "selector_params");
        if (sp.contains("delta")) config.iwesv.delta = sp.at("delta").get<double>();
        if (sp.contains("slack"))
          config.iwesv.slack = detail::parse_slack_variant(sp.at("slack").get<std::string>());
        if (sp.contains("steps")) config.iwesv.steps = sp.at("steps").get<int>();
        if (sp.contains("num_thresholds"))
          config.iwesv.num_thresholds = sp.at("num_thresholds").get<std::size_t>();
      } else if (config.selector == SelectorKind::kBadge) {
        detail::require_known_keys(sp, {"partitions"}, "selector_params");
        if (sp.contains("partitions"))
          config.badge_partitions = sp.at("partitions").get<std::size_t>();
      } else {
        detail::require_known_keys(sp, {}, "selector_params");
      }
    }

    if (j.contains("trainer")) {
      const auto& tr = j.at("trainer");
      detail::require_known_keys(tr,
                                 {"hidden_dim", "learning_rate", "auto_learning_rate",
                                  "sgd_batch_size", "max_epochs", "tolerance", "grad_mode",
                                  "shuffle_each_epoch"},
                                 "trainer");
      if (tr.contains("hidden_dim")) config.trainer.hidden_dim = tr.at("hidden_dim").get<int>();
      if (tr.contains("learning_rate"))
        config.trainer.learning_rate = tr.at("learning_rate").get<double>();
      if (tr.contains("auto_learning_rate"))
        config.auto_learning_rate = tr.at("auto_learning_rate").get<bool>();
      if (tr.contains("sgd_batch_size"))
        config.trainer.sgd_batch_size = tr.at("sgd_batch_size").get<int>();
      if (tr.contains("max_epochs")) config.trainer.max_epochs = tr.at("max_epochs").get<int>();
      if (tr.contains("tolerance")) config.trainer.tolerance = tr.at("tolerance").get<double>();
      if (tr.contains("grad_mode"))
        config.trainer.grad_mode = detail::parse_grad_mode(tr.at("grad_mode").get<std::string>());
      if (tr.contains("shuffle_each_epoch"))
        config.trainer.shuffle_each_epoch = tr.at("shuffle_each_epoch").get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("config: ") + e.what());
  }
  config.validate();
  return config;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("config: ") + path + ": " + e.what());
  }
  return parse_experiment_config(j);
}

struct CurveRow {
  int trial = 0;
  int round = 0;
  std::size_t selected = 0;
  double accuracy = 0.0;
};

struct TraceRecord {
  int trial = 0;
  int round = 0;
  int pass = 0;
  std::size_t pool_index = 0;
  double p = 1.0;
  double weight = 1.0;
};

struct TimingRow {
  int trial = 0;
  int round = 0;
  double seconds = 0.0;
};

struct TrialOutcome {
  int trial = 0;
  bool dropped = false;
  std::string drop_reason;
  std::vector<CurveRow> curve;
  std::vector<TraceRecord> trace;
  std::vector<TimingRow> timings;
  bool badge_fallback = false;
  double learning_rate_used = 0.0;
};

struct SummaryRow {
  int round = 0;
  std::size_t selected = 0;
  std::vector<double> per_trial;  // surviving trials, ascending trial index
  double mean = 0.0;
  double std_error = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<TrialOutcome> trials;  // every trial, dropped ones included
  std::vector<int> survivors;
  std::vector<SummaryRow> summary;   // over survivors only
  double final_accuracy_mean = 0.0;
  double final_accuracy_std_error = 0.0;
};

namespace detail {

struct SplitData {
  Pool train;
  Pool test;
};

inline Pool subset_pool(const Pool& full, const std::vector<std::size_t>& indices) {
  std::vector<LabeledExample> examples;
  examples.reserve(indices.size());
  for (std::size_t i : indices) examples.push_back(full[i]);
  return Pool(std::move(examples), full.num_classes());
}

inline SplitData load_and_split(const ExperimentConfig& config) {
  Pool full = load_dataset_csv(config.dataset_path, config.num_classes);
  if (config.selector == SelectorKind::kIwesV) {
    // The pool itself is the distribution; risks are exact pool means.
    return {full, full};
  }
  if (!config.test_dataset_path.empty()) {
    Pool test = load_dataset_csv(config.test_dataset_path, full.num_classes());
    if (test.dim() != full.dim())
      throw InvalidInputError("test dataset feature dimension does not match training data");
    return {std::move(full), std::move(test)};
  }
  const std::size_t n = full.size();
  const auto n_test =
      static_cast<std::size_t>(std::llround(config.test_fraction * static_cast<double>(n)));
  if (n_test < 1 || n_test >= n)
    throw InvalidInputError("config: test split leaves no data on one side");
  RngStream split_rng = RngStream(config.seed).child(999);
  auto test_idx = split_rng.sample_without_replacement(n, n_test);
  std::sort(test_idx.begin(), test_idx.end());
  std::vector<char> in_test(n, 0);
  for (std::size_t i : test_idx) in_test[i] = 1;
  std::vector<std::size_t> train_idx;
  train_idx.reserve(n - n_test);
  for (std::size_t i = 0; i < n; ++i)
    if (!in_test[i]) train_idx.push_back(i);
  return {subset_pool(full, train_idx), subset_pool(full, test_idx)};
}

inline Variant iwes_variant(SelectorKind kind) {
  switch (kind) {
    case SelectorKind::kIwesDis: return Variant::kDisagreement;
    case SelectorKind::kIwesEnt: return Variant::kEntropy;
    case SelectorKind::kIwesLoss: return Variant::kLossEntropy;
    default: throw InternalError("iwes_variant: not an iwes selector");
  }
}

// Curve checkpoints for the version-space selector: the importance-weighted
// ERM over the full class after each slice of the stream, scored on the pool.
inline TrialOutcome run_iwesv_trial(const ExperimentConfig& config, const Pool& pool,
                                    const HypothesisTable& table, int trial,
                                    std::uint64_t trial_seed) {
  TrialOutcome outcome;
  outcome.trial = trial;
  const auto start = std::chrono::steady_clock::now();
  RngStream root(trial_seed);
  RngStream stream_rng = root.child(400);
  RngStream coin_rng = root.child(401);
  const int steps = config.iwesv.steps;
  std::vector<std::size_t> stream(static_cast<std::size_t>(steps));
  for (auto& s : stream) s = stream_rng.uniform_int(pool.size());

  IwesvOptions options;
  options.delta = config.iwesv.delta;
  options.slack_variant = config.iwesv.slack;
  const IwesvResult result = run_iwesv(table, stream, options, coin_rng);

  for (const auto& we : result.selected)
    outcome.trace.push_back({trial, we.round, 0, we.example_index, we.sampling_probability,
                             we.weight});

  const std::size_t H = table.num_hypotheses();
  std::vector<double> cum(H, 0.0);
  std::size_t consumed = 0;
  for (int round = 0; round <= config.rounds; ++round) {
    const int t_r = static_cast<int>(std::llround(static_cast<double>(steps) *
                                                  static_cast<double>(round) /
                                                  static_cast<double>(config.rounds)));
    while (consumed < result.selected.size() && result.selected[consumed].round <= t_r) {
      const auto& we = result.selected[consumed];
      for (std::size_t h = 0; h < H; ++h) cum[h] += table.loss(h, we.example_index) * we.weight;
      ++consumed;
    }
    std::size_t best = 0;
    for (std::size_t h = 1; h < H; ++h)
      if (cum[h] < cum[best]) best = h;
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    outcome.curve.push_back({trial, round, consumed, 1.0 - table.pool_risk(best)});
    outcome.timings.push_back({trial, round, seconds});
  }
  return outcome;
}

}  // namespace detail

// One fully independent trial: fresh seed-derived streams, matched seed sets
// across selectors (same seed-set stream regardless of selector), one curve
// row per round, and the divergence drop rule applied at the end.
inline TrialOutcome run_single_trial(const ExperimentConfig& config, const Pool& train_pool,
                                     const Pool& test_pool, int trial, std::uint64_t trial_seed) {
  TrialOutcome outcome;
  outcome.trial = trial;
  RngStream root(trial_seed);

  TrainerConfig trainer_config = config.trainer;
  const auto seed_indices = draw_seed_set(train_pool.size(), config.seed_size, trial_seed);
  std::vector<WeightedExample> selected;
  selected.reserve(config.seed_size + static_cast<std::size_t>(config.rounds) * config.batch_size);
  for (std::size_t idx : seed_indices) selected.push_back({idx, 1.0, 1.0, 0});
  if (config.auto_learning_rate) {
    RngStream tune_rng = root.child(99);
    trainer_config.learning_rate =
        pick_learning_rate(selected, train_pool, trainer_config, tune_rng);
  }
  outcome.learning_rate_used = trainer_config.learning_rate;
  const SgdTrainer trainer(trainer_config);

  auto now = [start = std::chrono::steady_clock::now()] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  double last_mark = 0.0;
  auto record_round = [&](int round, const TrainedModel& model) {
    const double mark = now();
    outcome.curve.push_back({trial, round,
                             config.seed_size + static_cast<std::size_t>(round) * config.batch_size,
                             accuracy(model, test_pool)});
    outcome.timings.push_back({trial, round, mark - last_mark});
    last_mark = mark;
  };

  try {
    if (selector_is_iwes(config.selector)) {
      IwesConfig ic;
      ic.seed_size = config.seed_size;
      ic.batch_size = config.batch_size;
      ic.rounds = config.rounds;
      ic.weight_cap = config.weight_cap;
      ic.variant = detail::iwes_variant(config.selector);
      ic.max_passes = config.max_passes;
      ic.probability_floor = config.probability_floor;
      ic.seed = trial_seed;
      const IwesResult result = run_iwes(train_pool, ic, trainer, record_round);
      for (const auto& rec : result.trace.records)
        outcome.trace.push_back({trial, rec.round, rec.pass, rec.pool_index, rec.p, rec.weight});
    } else {
      Pool pool = train_pool;
      for (const auto& we : selected) {
        outcome.trace.push_back({trial, 0, 0, we.example_index, 1.0, 1.0});
        pool.remove(we.example_index);
      }
      std::shared_ptr<const TrainedModel> model;
      for (int r = 1; r <= config.rounds; ++r) {
        RngStream train_rng = root.child(100 + static_cast<std::uint64_t>(r));
        model = trainer.train(selected, pool, train_rng);
        record_round(r - 1, *model);

        RngStream select_rng = root.child(300 + static_cast<std::uint64_t>(r));
        std::vector<std::size_t> picks;
        switch (config.selector) {
          case SelectorKind::kRandom:
            picks = select_random(pool, config.batch_size, select_rng);
            break;
          case SelectorKind::kMargin:
            picks = select_topk_uncertainty(pool, *model, config.batch_size,
                                            UncertaintyScore::kMargin);
            break;
          case SelectorKind::kEntropy:
            picks = select_topk_uncertainty(pool, *model, config.batch_size,
                                            UncertaintyScore::kEntropy);
            break;
          case SelectorKind::kLeastConfident:
            picks = select_topk_uncertainty(pool, *model, config.batch_size,
                                            UncertaintyScore::kLeastConfident);
            break;
          case SelectorKind::kCoreset: {
            std::vector<std::size_t> already;
            already.reserve(selected.size());
            for (const auto& we : selected) already.push_back(we.example_index);
            picks = select_coreset_kcenter(pool, *model, config.batch_size, already, select_rng);
            break;
          }
          case SelectorKind::kBadge: {
            bool fallback = false;
            picks = select_badge(pool, *model, *model, config.batch_size, select_rng,
                                 config.badge_partitions, &fallback);
            outcome.badge_fallback = outcome.badge_fallback || fallback;
            break;
          }
          default:
            throw InternalError("run_single_trial: unhandled selector");
        }
        for (std::size_t idx : picks) {
          selected.push_back({idx, 1.0, 1.0, r});
          outcome.trace.push_back({trial, r, 0, idx, 1.0, 1.0});
          pool.remove(idx);
        }
      }
      RngStream final_rng = root.child(100 + static_cast<std::uint64_t>(config.rounds) + 1);
      model = trainer.train(selected, pool, final_rng);
      record_round(config.rounds, *model);
    }
  } catch (const DivergenceError& e) {
    outcome.dropped = true;
    outcome.drop_reason = std::string("divergent training: ") + e.what();
    return outcome;
  } catch (const PoolExhaustedError& e) {
    outcome.dropped = true;
    outcome.drop_reason = std::string("selection stalled: ") + e.what();
    return outcome;
  }

  // Drop rule: a trial whose final accuracy lands more than three binomial
  // standard errors below its seed-set accuracy is discarded as a failed run.
  // The standard error uses the add-two adjustment so a perfect seed-set score
  // (plug-in stderr zero) cannot turn a 0.01 dip into a "collapse".
  const double seed_acc = outcome.curve.front().accuracy;
  const double final_acc = outcome.curve.back().accuracy;
  const double n_test = static_cast<double>(test_pool.size());
  const double adjusted = (seed_acc * n_test + 2.0) / (n_test + 4.0);
  const double se = std::sqrt(adjusted * (1.0 - adjusted) / (n_test + 4.0));
  if (final_acc < seed_acc - 3.0 * se) {
    outcome.dropped = true;
    outcome.drop_reason = "final accuracy collapsed below seed-set accuracy";
  }
  return outcome;
}

// Multi-trial experiment: trials execute in parallel up to the worker count,
// each internally sequential, and results merge in trial-index order so the
// worker count never changes the output bytes.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto data = detail::load_and_split(config);

  HypothesisTable table;
  if (config.selector == SelectorKind::kIwesV) {
    if (data.train.size() == 0) throw InvalidInputError("dataset is empty");
    double lo = data.train[0].features[0], hi = lo;
    for (std::size_t i = 1; i < data.train.size(); ++i) {
      lo = std::min(lo, data.train[i].features[0]);
      hi = std::max(hi, data.train[i].features[0]);
    }
    std::vector<double> thresholds(config.iwesv.num_thresholds);
    for (std::size_t m = 0; m < thresholds.size(); ++m)
      thresholds[m] =
          lo + (hi - lo) * static_cast<double>(m) / static_cast<double>(thresholds.size() - 1);
    table = make_threshold_table(data.train, thresholds);
  } else {
    const std::size_t budget =
        config.seed_size + static_cast<std::size_t>(config.rounds) * config.batch_size;
    if (budget > data.train.size())
      throw InvalidInputError("config: selection budget exceeds the training pool");
  }

  ExperimentResult result;
  result.config = config;
  result.trials.resize(static_cast<std::size_t>(config.trials));

  std::atomic<int> next{0};
  std::vector<std::string> failures(static_cast<std::size_t>(config.trials));
  auto worker = [&] {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= config.trials) break;
      const std::uint64_t trial_seed =
          RngStream(config.seed).child(1000 + static_cast<std::uint64_t>(i)).seed();
      try {
        result.trials[i] =
            config.selector == SelectorKind::kIwesV
                ? detail::run_iwesv_trial(config, data.train, table, i, trial_seed)
                : run_single_trial(config, data.train, data.test, i, trial_seed);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  const int workers = std::min(config.workers, config.trials);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (int i = 0; i < config.trials; ++i)
    if (!failures[i].empty())
      throw InternalError("trial " + std::to_string(i) + " failed: " + failures[i]);

  for (int i = 0; i < config.trials; ++i)
    if (!result.trials[i].dropped) result.survivors.push_back(i);
  if (result.survivors.size() < 3)
    throw AggregateError("only " + std::to_string(result.survivors.size()) + " of " +
                         std::to_string(config.trials) +
                         " trials survived; at least 3 are required to aggregate");

  const std::size_t num_rounds = result.trials[result.survivors[0]].curve.size();
  for (int i : result.survivors)
    if (result.trials[i].curve.size() != num_rounds)
      throw InternalError("surviving trials disagree on round count");
  for (std::size_t r = 0; r < num_rounds; ++r) {
    SummaryRow row;
    row.round = result.trials[result.survivors[0]].curve[r].round;
    double mean_selected = 0.0;  // trials can differ for the streaming selector
    for (int i : result.survivors)
      mean_selected += static_cast<double>(result.trials[i].curve[r].selected);
    row.selected = static_cast<std::size_t>(
        std::llround(mean_selected / static_cast<double>(result.survivors.size())));
    for (int i : result.survivors) row.per_trial.push_back(result.trials[i].curve[r].accuracy);
    const double n = static_cast<double>(row.per_trial.size());
    for (double a : row.per_trial) row.mean += a;
    row.mean /= n;
    double ss = 0.0;
    for (double a : row.per_trial) ss += (a - row.mean) * (a - row.mean);
    row.std_error = std::sqrt(ss / (n - 1.0) / n);
    result.summary.push_back(std::move(row));
  }
  result.final_accuracy_mean = result.summary.back().mean;
  result.final_accuracy_std_error = result.summary.back().std_error;
  return result;
}

namespace detail {

// Atomic file write: stage next to the target, then rename into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInputError("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

inline std::string curve_csv(const std::vector<CurveRow>& rows) {
  std::string out = "trial,round,selected,accuracy\n";
  for (const auto& row : rows) {
    out += std::to_string(row.trial);
    out += ',';
    out += std::to_string(row.round);
    out += ',';
    out += std::to_string(row.selected);
    out += ',';
    out += format_g17(row.accuracy);
    out += '\n';
  }
  return out;
}

inline std::string trace_jsonl(const std::vector<TraceRecord>& records) {
  std::string out;
  for (const auto& rec : records) {
    nlohmann::json line{{"trial", rec.trial},   {"round", rec.round},
                        {"pass", rec.pass},     {"pool_index", rec.pool_index},
                        {"p", rec.p},           {"weight", rec.weight}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

}  // namespace detail

// Writes curve.csv / curve_summary.csv / trace.jsonl (all deterministic for a
// fixed config and seed) plus timings.csv and run_summary.json. Per-trial
// files land under trials/ first, each written atomically, then merged.
inline void write_experiment_outputs(const ExperimentResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  fs::create_directories(root / "trials");

  char name[64];
  for (const auto& trial : result.trials) {
    std::snprintf(name, sizeof(name), "trial_%04d", trial.trial);
    detail::write_file_atomic(root / "trials" / (std::string(name) + "_curve.csv"),
                              detail::curve_csv(trial.curve));
    detail::write_file_atomic(root / "trials" / (std::string(name) + "_trace.jsonl"),
                              detail::trace_jsonl(trial.trace));
  }

  std::vector<CurveRow> merged_curve;
  std::vector<TraceRecord> merged_trace;
  std::string timings = "trial,round,seconds\n";
  for (int i : result.survivors) {
    const auto& trial = result.trials[i];
    merged_curve.insert(merged_curve.end(), trial.curve.begin(), trial.curve.end());
    merged_trace.insert(merged_trace.end(), trial.trace.begin(), trial.trace.end());
    for (const auto& timing : trial.timings) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%d,%d,%.6f\n", timing.trial, timing.round, timing.seconds);
      timings += buf;
    }
  }
  detail::write_file_atomic(root / "curve.csv", detail::curve_csv(merged_curve));
  detail::write_file_atomic(root / "trace.jsonl", detail::trace_jsonl(merged_trace));
  detail::write_file_atomic(root / "timings.csv", timings);

  std::string summary = "round,selected";
  for (int i : result.survivors) summary += ",trial" + std::to_string(i);
  summary += ",mean,stderr\n";
  for (const auto& row : result.summary) {
    summary += std::to_string(row.round);
    summary += ',';
    summary += std::to_string(row.selected);
    for (double a : row.per_trial) {
      summary += ',';
      summary += detail::format_g17(a);
    }
    summary += ',';
    summary += detail::format_g17(row.mean);
    summary += ',';
    summary += detail::format_g17(row.std_error);
    summary += '\n';
  }
  detail::write_file_atomic(root / "curve_summary.csv", summary);

  nlohmann::json dropped = nlohmann::json::array();
  nlohmann::json rates = nlohmann::json::array();
  nlohmann::json fallback_trials = nlohmann::json::array();
  for (const auto& trial : result.trials) {
    if (trial.dropped) dropped.push_back({{"trial", trial.trial}, {"reason", trial.drop_reason}});
    rates.push_back(trial.learning_rate_used);
    if (trial.badge_fallback) fallback_trials.push_back(trial.trial);
  }
  const nlohmann::json run_summary{
      {"selector", selector_name(result.config.selector)},
      {"trials", result.config.trials},
      {"seed", result.config.seed},
      {"survivors", result.survivors},
      {"dropped", dropped},
      {"learning_rates", rates},
      {"badge_uniform_fallback_trials", fallback_trials},
      {"final_accuracy_mean", result.final_accuracy_mean},
      {"final_accuracy_stderr", result.final_accuracy_std_error},
  };
  detail::write_file_atomic(root / "run_summary.json", run_summary.dump(2) + "\n");
}

// Synthetic dataset emission for the `synth` subcommand. Returns the list of
// files written. thresholds-1d also emits the hypothesis-class losses and the
// exact generating distribution.
inline std::vector<std::string> make_synthetic(const std::string& kind,
                                               const nlohmann::json& raw_params,
                                               std::uint64_t seed, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path root(out_dir);
  std::vector<std::string> written;
  const nlohmann::json params = raw_params.is_null() ? nlohmann::json::object() : raw_params;
  auto get_or = [&params](const char* key, double fallback) {
    return params.contains(key) ? params.at(key).get<double>() : fallback;
  };
  try {
    if (kind == "blobs") {
      detail::require_known_keys(params, {"n", "d", "c", "noise"}, "synth params");
      const Pool pool = make_blobs(static_cast<std::size_t>(get_or("n", 400)),
                                   static_cast<std::size_t>(get_or("d", 2)),
                                   static_cast<int>(get_or("c", 3)), get_or("noise", 0.5), seed);
      const auto path = (root / "blobs.csv").string();
      save_dataset_csv(path, pool);
      written.push_back(path);
    } else if (kind == "xor") {
      detail::require_known_keys(params, {"n", "noise"}, "synth params");
      const Pool pool =
          make_xor(static_cast<std::size_t>(get_or("n", 400)), get_or("noise", 0.2), seed);
      const auto path = (root / "xor.csv").string();
      save_dataset_csv(path, pool);
      written.push_back(path);
    } else if (kind == "thresholds-1d") {
      detail::require_known_keys(params, {"points", "copies", "noise", "thresholds"},
                                 "synth params");
      const auto instance = make_thresholds_1d(
          static_cast<std::size_t>(get_or("points", 25)),
          static_cast<std::size_t>(get_or("copies", 20)), get_or("noise", 0.1),
          static_cast<std::size_t>(get_or("thresholds", 21)));
      const auto data_path = (root / "thresholds.csv").string();
      save_dataset_csv(data_path, instance.pool);
      written.push_back(data_path);

      std::string hypotheses;
      for (std::size_t h = 0; h < instance.table.num_hypotheses(); ++h) {
        hypotheses += instance.table.name(h);
        for (std::size_t i = 0; i < instance.table.num_examples(); ++i) {
          hypotheses += ',';
          hypotheses += detail::format_g17(instance.table.loss(h, i));
        }
        hypotheses += '\n';
      }
      const auto hyp_path = (root / "hypotheses.csv").string();
      detail::write_file_atomic(hyp_path, hypotheses);
      written.push_back(hyp_path);

      nlohmann::json dist{{"grid", instance.grid},
                          {"prob_one", instance.prob_one},
                          {"thresholds", instance.thresholds},
                          {"best_hypothesis", instance.best},
                          {"best_risk", instance.best_risk},
                          {"realized_noise", instance.realized_noise}};
      const auto dist_path = (root / "distribution.json").string();
      detail::write_file_atomic(dist_path, dist.dump(2) + "\n");
      written.push_back(dist_path);
    } else {
      throw InvalidInputError("synth: unknown kind \"" + kind +
                              "\" (expected blobs, thresholds-1d, or xor)");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("synth params: ") + e.what());
  }
  return written;
}

}  // namespace iwes
