// Command-line front end: run experiments, generate synthetic datasets, run
// the streaming-theory diagnostics, and execute the release acceptance suite.
//
// Exit codes: 0 success, 1 invalid input or usage, 2 runtime failure
// (divergence, aggregation, internal errors), 3 acceptance criteria failed.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "iwes/acceptance.hpp"
#include "iwes/harness.hpp"
#include "iwes/synthetic.hpp"
#include "iwes/theory.hpp"

namespace {

using nlohmann::json;

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw iwes::InvalidInputError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw iwes::InvalidInputError("config is not valid JSON: " + std::string(e.what()));
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw iwes::InternalError("cannot write " + path);
  out << text;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, int workers_override,
            std::int64_t seed_override) {
  iwes::ExperimentConfig config = iwes::load_experiment_config(config_path);
  if (workers_override > 0) config.workers = workers_override;
  if (seed_override >= 0) config.seed = static_cast<std::uint64_t>(seed_override);
  const iwes::ExperimentResult result = iwes::run_experiment(config);
  iwes::write_experiment_outputs(result, out_dir);
  std::cout << "selector " << iwes::selector_name(config.selector) << ": " << result.trials.size()
            << " trials, " << result.survivors.size() << " survived, final accuracy "
            << result.final_accuracy_mean << " +/- " << result.final_accuracy_std_error << "\n";
  std::cout << "outputs written to " << out_dir << "\n";
  return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              std::int64_t seed_override) {
  const json config = load_json_file(config_path);
  if (!config.is_object()) throw iwes::InvalidInputError("synth config must be a JSON object");
  for (const auto& [key, value] : config.items()) {
    (void)value;
    if (key != "kind" && key != "params" && key != "seed")
      throw iwes::InvalidInputError("synth config: unknown key '" + key + "'");
  }
  if (!config.contains("kind")) throw iwes::InvalidInputError("synth config: 'kind' is required");
  const std::string kind = config.at("kind").get<std::string>();
  const json params = config.value("params", json::object());
  std::uint64_t seed = config.value("seed", std::uint64_t{0});
  if (seed_override >= 0) seed = static_cast<std::uint64_t>(seed_override);
  const auto files = iwes::make_synthetic(kind, params, seed, out_dir);
  for (const auto& f : files) std::cout << "wrote " << f << "\n";
  return 0;
}

// Streaming-theory diagnostics: repeated runs on the 1-D thresholds task plus
// estimator and coefficient checks, summarized into a JSON report.
int cmd_theory(const std::string& config_path, const std::string& out_dir) {
  int trials = 200;
  int steps = 500;
  double delta = 0.1;
  double noise = 0.1;
  int grid_points = 25;
  int copies = 20;
  int num_thresholds = 21;
  int unbiasedness_draws = 100000;
  int coefficient_instances = 100;
  std::uint64_t seed = 901100;
  if (!config_path.empty()) {
    const json config = load_json_file(config_path);
    if (!config.is_object()) throw iwes::InvalidInputError("theory config must be a JSON object");
    for (const auto& [key, value] : config.items()) {
      if (key == "trials") trials = value.get<int>();
      else if (key == "steps") steps = value.get<int>();
      else if (key == "delta") delta = value.get<double>();
      else if (key == "noise") noise = value.get<double>();
      else if (key == "grid_points") grid_points = value.get<int>();
      else if (key == "copies") copies = value.get<int>();
      else if (key == "num_thresholds") num_thresholds = value.get<int>();
      else if (key == "unbiasedness_draws") unbiasedness_draws = value.get<int>();
      else if (key == "coefficient_instances") coefficient_instances = value.get<int>();
      else if (key == "seed") seed = value.get<std::uint64_t>();
      else throw iwes::InvalidInputError("theory config: unknown key '" + key + "'");
    }
  }
  if (trials < 1 || steps < 2 || unbiasedness_draws < 2 || coefficient_instances < 0)
    throw iwes::InvalidInputError("theory config: values out of range");

  const iwes::ThresholdsInstance instance = iwes::make_thresholds_1d(
      static_cast<std::size_t>(grid_points), static_cast<std::size_t>(copies), noise,
      static_cast<std::size_t>(num_thresholds));
  iwes::IwesvOptions options;
  options.delta = delta;
  options.record_exact_mean_p = true;
  std::vector<iwes::IwesvResult> runs;
  runs.reserve(static_cast<std::size_t>(trials));
  const std::size_t pool_size = instance.pool.size();
  for (int trial = 0; trial < trials; ++trial) {
    iwes::RngStream root = iwes::RngStream(seed).child(static_cast<std::uint64_t>(trial));
    iwes::RngStream stream_gen = root.child(0);
    std::vector<std::size_t> stream(static_cast<std::size_t>(steps));
    for (auto& x : stream) x = stream_gen.uniform_int(pool_size);
    iwes::RngStream coins = root.child(1);
    runs.push_back(iwes::run_iwesv(instance.table, stream, options, coins));
  }

  const auto t1 = iwes::check_theorem1(runs, instance.table, instance.best, delta, steps);
  const iwes::LossTensor tensor = iwes::make_zero_one_tensor(instance.table, instance.pool);
  const double theta_S =
      iwes::disagreement_coefficient(tensor, instance.best, iwes::DisagreementMode::kS).value;
  int clean = 0, rate_bound_failures = 0;
  double worst_ratio = 0.0;
  double mean_selected_fraction = 0.0;
  for (const auto& run : runs) {
    mean_selected_fraction += static_cast<double>(run.selected.size()) / steps;
    const auto t2 = iwes::check_theorem2(run, instance.table, instance.best, theta_S, delta, steps);
    if (!t2.clean) continue;
    ++clean;
    if (!t2.holds) ++rate_bound_failures;
    worst_ratio = std::max(worst_ratio, t2.max_ratio);
  }
  mean_selected_fraction /= trials;

  iwes::RngStream unbias_rng = iwes::RngStream(seed).child(500000);
  const auto unbias = iwes::check_unbiasedness({1.0, 1.0, 0.0, 0.0}, {0.5, 0.5, 0.5, 0.5},
                                               static_cast<std::size_t>(unbiasedness_draws),
                                               unbias_rng, 1.0);

  iwes::RngStream coeff_rng = iwes::RngStream(seed).child(600000);
  int coeff_checked = 0, coeff_skipped = 0, coeff_violations = 0, attempts = 0;
  while (coeff_checked < coefficient_instances && attempts < 10 * coefficient_instances + 100) {
    ++attempts;
    const std::size_t H = 2 + coeff_rng.uniform_int(9);
    const std::size_t T = 2 + coeff_rng.uniform_int(19);
    const std::size_t labels = 2 + coeff_rng.uniform_int(3);
    const iwes::LossTensor random_tensor = iwes::make_random_ce_tensor(H, T, labels, coeff_rng);
    const auto rep = iwes::check_theorem3(random_tensor, coeff_rng.uniform_int(H));
    if (rep.skipped_infinite_K) {
      ++coeff_skipped;
      continue;
    }
    ++coeff_checked;
    if (!rep.holds) ++coeff_violations;
  }

  json report;
  report["instance"] = {{"examples", instance.pool.size()},
                        {"hypotheses", instance.table.num_hypotheses()},
                        {"best_risk", instance.best_risk},
                        {"best_threshold", instance.thresholds[instance.best]},
                        {"realized_noise", instance.realized_noise}};
  report["retention"] = {{"trials", t1.total_trials},
                         {"violations", t1.violations},
                         {"violation_rate", t1.violation_rate},
                         {"rate_threshold", t1.rate_threshold},
                         {"clean_trials", t1.clean_trials},
                         {"excess_bound", t1.bound},
                         {"max_excess", t1.max_excess},
                         {"bound_vacuous", t1.vacuous},
                         {"holds", t1.holds}};
  report["sampling_rate"] = {{"theta_S", theta_S},
                             {"clean_trials", clean},
                             {"bound_failures", rate_bound_failures},
                             {"worst_bound_ratio", worst_ratio},
                             {"mean_selected_fraction", mean_selected_fraction},
                             {"holds", rate_bound_failures == 0}};
  report["unbiasedness"] = {{"true_mean", unbias.true_mean},
                            {"z_score", unbias.z_score},
                            {"capped_bias", unbias.capped_bias},
                            {"capped_z_score", unbias.capped_z_score},
                            {"holds", std::abs(unbias.z_score) <= 3.0}};
  report["coefficient_inequality"] = {{"instances", coeff_checked},
                                      {"skipped_infinite_slope", coeff_skipped},
                                      {"violations", coeff_violations},
                                      {"holds", coeff_violations == 0}};

  std::filesystem::create_directories(out_dir);
  const std::string path = out_dir + "/theory_report.json";
  write_text_file(path, report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  std::cout << "report written to " << path << "\n";
  const bool all_hold = t1.holds && rate_bound_failures == 0 &&
                        std::abs(unbias.z_score) <= 3.0 && coeff_violations == 0;
  return all_hold ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iwes: importance-weighted subset selection experiments"};
  app.require_subcommand(1);

  std::string run_config, run_out;
  int run_workers = 0;
  std::int64_t run_seed = -1;
  auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("--config", run_config, "experiment config JSON")->required();
  run->add_option("--out", run_out, "output directory")->required();
  run->add_option("--workers", run_workers, "override worker count");
  run->add_option("--seed", run_seed, "override the experiment seed");

  std::string synth_config, synth_out;
  std::int64_t synth_seed = -1;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--config", synth_config, "generator config JSON (kind, params, seed)")
      ->required();
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "override the generator seed");

  std::string theory_config, theory_out = "theory_out";
  auto* theory = app.add_subcommand("theory", "run streaming-theory diagnostics");
  theory->add_option("--config", theory_config, "optional diagnostics config JSON");
  theory->add_option("--out", theory_out, "output directory for theory_report.json");

  std::string verify_out = "acceptance_scratch";
  auto* verify = app.add_subcommand("verify", "run the release acceptance suite");
  verify->add_option("--out", verify_out, "scratch directory for acceptance artifacts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return cmd_run(run_config, run_out, run_workers, run_seed);
    if (synth->parsed()) return cmd_synth(synth_config, synth_out, synth_seed);
    if (theory->parsed()) return cmd_theory(theory_config, theory_out);
    if (verify->parsed())
      return iwes::acceptance::run_and_report(std::cout, verify_out) == 0 ? 0 : 3;
  } catch (const iwes::InvalidInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
