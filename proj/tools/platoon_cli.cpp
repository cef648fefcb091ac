// Command-line front end for the secured platoon simulator.
//
//   synth  --config F --out gains.json          offline gain synthesis
//   run    --config F [--gains G] [--seed N] --out-dir D
//   sweep  --config F --gains G --amplitudes a1,a2,... --reps R [--out F]
//
// Exit codes: 0 success, 2 configuration error, 3 synthesis failure,
// 4 runtime numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "secure_platoon/serialization.hpp"

namespace {

using namespace secure_platoon;

constexpr int kExitConfig = 2;
constexpr int kExitSynthesis = 3;
constexpr int kExitNumeric = 4;

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot open " + path + " for writing");
  out << body;
  if (!out) throw config_error("failed while writing " + path);
}

int run_synth(const std::string& config_path, const std::string& out_path) {
  const LoadedConfig loaded = load_config(config_path);
  const DiscretePlant plant = build_closed_loop(loaded.scenario.params);
  const SubsetCatalog catalog = build_catalog(plant.a, plant.c);
  const Eigen::MatrixXd d = build_coupling_matrix(plant.a);

  std::printf("catalog: %zu detectable subsets over %d sensors\n",
              catalog.subsets.size(), static_cast<int>(plant.c.rows()));
  const GainSet gains =
      synthesize_gains(plant.a, plant.c, catalog, d, loaded.synthesis);
  const GainVerification verification =
      verify_gains(plant.a, d, plant.c, catalog, gains);
  if (!verification.pass)
    throw synthesis_error("synthesized gains failed independent verification",
                          verification.relative_margin);

  save_gains(out_path, catalog, gains, verification);
  std::printf(
      "verified %zu Lyapunov inequalities, relative margin %.4g, wrote %s\n",
      verification.lyapunov_max_eigs.size() + 1, verification.relative_margin,
      out_path.c_str());
  return 0;
}

int run_scenario(const std::string& config_path, const std::string& gains_path,
                 std::int64_t seed, const std::string& out_dir) {
  const LoadedConfig loaded = load_config(config_path);
  ScenarioConfig config = loaded.scenario;
  if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);

  GainSet gains;
  const GainSet* gains_ptr = nullptr;
  if (!gains_path.empty()) {
    const PersistedGains persisted = load_gains(gains_path);
    const DiscretePlant plant = build_closed_loop(config.params);
    const SubsetCatalog catalog = build_catalog(plant.a, plant.c);
    check_gains_match(persisted, catalog,
                      static_cast<int>(plant.a.rows()));
    gains = persisted.gains;
    gains_ptr = &gains;
  }

  const ScenarioResult result = run_condition(config, gains_ptr);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  {
    std::ofstream trace(dir / "trace.csv", std::ios::binary);
    if (!trace) throw config_error("cannot open trace.csv in " + out_dir);
    write_trace_csv(trace, result);
  }
  write_file((dir / "summary.json").string(),
             summary_to_json(result).dump(2) + "\n");

  std::printf("%s %s: %d steps, nc=%d, rms_e=%.4g m, rc=%.4g m/s^2",
              kind_name(config.kind), condition_name(config.condition),
              result.steps, result.safety.nc, result.safety.rms_e,
              result.comfort.rc);
  if (config.condition == Condition::kSecuredWithAttack)
    std::printf(", f1=%.4g", result.reliability.f1);
  std::printf(" (%.2f s)\n", result.wall_seconds);
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& gains_path,
              const std::vector<double>& amplitudes, int reps,
              const std::string& out_path) {
  const LoadedConfig loaded = load_config(config_path);
  if (gains_path.empty())
    throw config_error(
        "sweep runs the secured condition and needs --gains; generate the "
        "file with the synth subcommand");
  if (reps < 1) throw config_error("--reps must be at least 1");
  if (amplitudes.empty()) throw config_error("--amplitudes must be non-empty");

  const PersistedGains persisted = load_gains(gains_path);
  const DiscretePlant plant = build_closed_loop(loaded.scenario.params);
  const SubsetCatalog catalog = build_catalog(plant.a, plant.c);
  check_gains_match(persisted, catalog, static_cast<int>(plant.a.rows()));

  const std::vector<SweepRow> rows =
      run_reliability_sweep(loaded.scenario, persisted.gains, amplitudes,
                            reps);
  if (out_path.empty()) {
    write_sweep_csv(std::cout, rows);
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw config_error("cannot open " + out_path + " for writing");
    write_sweep_csv(out, rows);
    std::printf("wrote %zu amplitude rows x %d reps to %s\n", rows.size(),
                reps, out_path.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Resilient CACC platoon simulator: observer-bank state estimation "
      "with online sensor-reliability classification"};
  app.require_subcommand(1);

  std::string config_path;
  std::string gains_path;
  std::string out_path;
  std::string out_dir;
  std::int64_t seed = -1;
  std::vector<double> amplitudes;
  int reps = 1;

  CLI::App* synth = app.add_subcommand(
      "synth", "Synthesize and verify observer gains for the configured plant");
  synth->add_option("--config", config_path, "scenario configuration file")
      ->required();
  synth->add_option("--out", out_path, "output gains JSON path")->required();

  CLI::App* run = app.add_subcommand(
      "run", "Simulate one condition and write trace.csv plus summary.json");
  run->add_option("--config", config_path, "scenario configuration file")
      ->required();
  run->add_option("--gains", gains_path,
                  "gains JSON (required for the secured condition)");
  run->add_option("--seed", seed, "override the configured master seed");
  run->add_option("--out-dir", out_dir, "output directory")->required();

  CLI::App* sweep = app.add_subcommand(
      "sweep", "Replicated secured runs across attack amplitudes");
  sweep->add_option("--config", config_path, "scenario configuration file")
      ->required();
  sweep->add_option("--gains", gains_path, "gains JSON from synth");
  sweep
      ->add_option("--amplitudes", amplitudes,
                   "comma-separated attack RMS amplitudes")
      ->required()
      ->delimiter(',');
  sweep->add_option("--reps", reps, "replications per amplitude")->required();
  sweep->add_option("--out", out_path, "sweep CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (synth->parsed()) return run_synth(config_path, out_path);
    if (run->parsed())
      return run_scenario(config_path, gains_path, seed, out_dir);
    return run_sweep(config_path, gains_path, amplitudes, reps, out_path);
  } catch (const config_error& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const synthesis_error& e) {
    std::fprintf(stderr,
                 "synthesis failed: %s (best relative margin %.4g)\n",
                 e.what(), e.best_margin());
    return kExitSynthesis;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return kExitNumeric;
  }
}
