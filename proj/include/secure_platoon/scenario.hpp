#pragma once

#include <Eigen/Dense>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "secure_platoon/attacks.hpp"
#include "secure_platoon/gain_synthesis.hpp"
#include "secure_platoon/metrics.hpp"
#include "secure_platoon/observer_bank.hpp"
#include "secure_platoon/platoon.hpp"
#include "secure_platoon/rng.hpp"
#include "secure_platoon/sensor_catalog.hpp"

namespace secure_platoon {

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Simulated operating mode. The secured condition feeds the bank's most
/// reliable estimate to the controller, the insecure ones feed the plain
/// sensor average.
enum class Condition {
  kInsecureNoAttack,
  kInsecureWithAttack,
  kSecuredWithAttack,
};

enum class ScenarioKind { kSteadyState, kBraking, kStepwise };

inline Condition condition_from_name(const std::string& name) {
  if (name == "insecure-no-attack") return Condition::kInsecureNoAttack;
  if (name == "insecure-with-attack") return Condition::kInsecureWithAttack;
  if (name == "secured-with-attack") return Condition::kSecuredWithAttack;
  throw config_error("unknown condition '" + name +
                     "' (expected insecure-no-attack, insecure-with-attack "
                     "or secured-with-attack)");
}

inline const char* condition_name(Condition condition) {
  switch (condition) {
    case Condition::kInsecureNoAttack:
      return "insecure-no-attack";
    case Condition::kInsecureWithAttack:
      return "insecure-with-attack";
    case Condition::kSecuredWithAttack:
      return "secured-with-attack";
  }
  return "unknown";
}

inline ScenarioKind kind_from_name(const std::string& name) {
  if (name == "steady-state") return ScenarioKind::kSteadyState;
  if (name == "braking") return ScenarioKind::kBraking;
  if (name == "stepwise") return ScenarioKind::kStepwise;
  throw config_error("unknown scenario kind '" + name +
                     "' (expected steady-state, braking or stepwise)");
}

inline const char* kind_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kSteadyState:
      return "steady-state";
    case ScenarioKind::kBraking:
      return "braking";
    case ScenarioKind::kStepwise:
      return "stepwise";
  }
  return "unknown";
}

/// Attack RMS per named severity level; a plain number is also accepted.
inline constexpr double kCriticalRms = 300.0;
inline constexpr double kVeryUncomfortableRms = 150.0;
inline constexpr double kUncomfortableRms = 15.0;

inline double severity_rms_from_text(const std::string& text) {
  if (text == "critical") return kCriticalRms;
  if (text == "very-uncomfortable") return kVeryUncomfortableRms;
  if (text == "uncomfortable") return kUncomfortableRms;
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !(value >= 0.0)) {
    throw config_error("severity must be critical, very-uncomfortable, "
                       "uncomfortable or a non-negative number, got '" +
                       text + "'");
  }
  return value;
}

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::kSteadyState;
  Condition condition = Condition::kSecuredWithAttack;
  double severity_rms = kVeryUncomfortableRms;
  double duration_s = 1800.0;
  std::uint64_t seed = 1;
  int vehicles = 2;  // lead included; vehicle 2 is the attacked follower
  CaccParams params;
  double a_beta = 1000.0;
  double beta_init = 0.5;
  double estimate_spread = 0.5;  // initial observer estimate offset amplitude
  std::string config_hash;       // content hash when loaded from a file
};

inline void validate(const ScenarioConfig& config) {
  if (!(config.duration_s > 0.0)) throw config_error("duration_s must be positive");
  if (config.vehicles < 2) throw config_error("vehicles must be at least 2");
  if (!(config.params.ts > 0.0)) throw config_error("plant ts must be positive");
  if (!(config.params.h > 0.0)) throw config_error("plant headway must be positive");
  if (!(config.params.tau > 0.0)) throw config_error("plant engine lag must be positive");
  if (!(config.a_beta > 0.0)) throw config_error("a_beta must be positive");
  if (!(config.beta_init > 0.0 && config.beta_init < 1.0))
    throw config_error("beta_init must lie in (0, 1)");
  if (config.estimate_spread < 0.0)
    throw config_error("estimate_spread must be non-negative");
}

// ---------------------------------------------------------------------------
// Config file parsing: INI-style sections of key = value lines, # or ;
// comments. Keys are reported with their section prefix, e.g. scenario.kind.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

inline double parse_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size())
    throw config_error(key + " must be a number, got '" + text + "'");
  return value;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  std::uint64_t value = 0;
  try {
    value = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size())
    throw config_error(key + " must be a non-negative integer, got '" + text + "'");
  return value;
}

inline int parse_int(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  long value = 0;
  try {
    value = std::stol(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size())
    throw config_error(key + " must be an integer, got '" + text + "'");
  return static_cast<int>(value);
}

inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

}  // namespace detail

inline std::map<std::string, std::string> parse_ini(std::istream& in) {
  std::map<std::string, std::string> entries;
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw config_error("line " + std::to_string(line_no) +
                           ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("line " + std::to_string(line_no) +
                         ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw config_error("line " + std::to_string(line_no) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (entries.count(full))
      throw config_error("duplicate key " + full);
    entries[full] = value;
  }
  return entries;
}

/// Builds the scenario configuration from parsed entries; every key must be
/// recognized so typos fail loudly instead of silently keeping a default.
inline ScenarioConfig config_from_entries(
    const std::map<std::string, std::string>& entries) {
  ScenarioConfig config;
  std::string severity_text;
  for (const auto& [key, value] : entries) {
    if (key == "scenario.kind") {
      config.kind = kind_from_name(value);
    } else if (key == "scenario.condition") {
      config.condition = condition_from_name(value);
    } else if (key == "scenario.severity") {
      severity_text = value;
    } else if (key == "scenario.duration_s") {
      config.duration_s = detail::parse_double(key, value);
    } else if (key == "scenario.seed") {
      config.seed = detail::parse_u64(key, value);
    } else if (key == "scenario.vehicles") {
      config.vehicles = detail::parse_int(key, value);
    } else if (key == "plant.ts") {
      config.params.ts = detail::parse_double(key, value);
    } else if (key == "plant.headway_s") {
      config.params.h = detail::parse_double(key, value);
    } else if (key == "plant.engine_lag_s") {
      config.params.tau = detail::parse_double(key, value);
    } else if (key == "plant.kp") {
      config.params.kp = detail::parse_double(key, value);
    } else if (key == "plant.kd") {
      config.params.kd = detail::parse_double(key, value);
    } else if (key == "plant.kdd") {
      config.params.kdd = detail::parse_double(key, value);
    } else if (key == "plant.standstill_m") {
      config.params.standstill = detail::parse_double(key, value);
    } else if (key == "plant.noise_bound") {
      config.params.noise_bound_gamma = detail::parse_double(key, value);
    } else if (key == "bank.a_beta") {
      config.a_beta = detail::parse_double(key, value);
    } else if (key == "bank.beta_init") {
      config.beta_init = detail::parse_double(key, value);
    } else if (key == "bank.estimate_spread") {
      config.estimate_spread = detail::parse_double(key, value);
    } else if (key.rfind("synthesis.", 0) == 0) {
      // Handled by synthesis_options_from_entries.
    } else {
      throw config_error("unknown config key " + key);
    }
  }
  if (!severity_text.empty())
    config.severity_rms = severity_rms_from_text(severity_text);
  validate(config);
  return config;
}

inline SynthesisOptions synthesis_options_from_entries(
    const std::map<std::string, std::string>& entries) {
  SynthesisOptions options;
  for (const auto& [key, value] : entries) {
    if (key == "synthesis.epsilon") {
      options.epsilon = detail::parse_double(key, value);
    } else if (key == "synthesis.max_iterations") {
      options.max_iterations = detail::parse_int(key, value);
    } else if (key == "synthesis.restarts") {
      options.restarts = detail::parse_int(key, value);
    } else if (key == "synthesis.seed") {
      options.seed = detail::parse_u64(key, value);
    }
  }
  return options;
}

struct LoadedConfig {
  ScenarioConfig scenario;
  SynthesisOptions synthesis;
};

inline LoadedConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  std::istringstream stream(text);
  const auto entries = parse_ini(stream);
  LoadedConfig loaded;
  loaded.scenario = config_from_entries(entries);
  loaded.synthesis = synthesis_options_from_entries(entries);
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(detail::fnv1a(text)));
  loaded.scenario.config_hash = hash;
  return loaded;
}

// ---------------------------------------------------------------------------
// Scenario timelines. Steps are derived from the published schedule in
// seconds, so a non-default ts shifts the windows consistently.
// ---------------------------------------------------------------------------

namespace detail {

inline int step_at(double seconds, double ts) {
  return static_cast<int>(std::lround(seconds / ts));
}

}  // namespace detail

/// Attack and noise schedule of the named scenario at the given severity.
/// Steady-state and braking share the three white-noise campaigns; the
/// stepwise scenario plays the two constant-offset campaigns. Severity zero
/// schedules no attack at all.
inline AttackTimeline scenario_timeline(ScenarioKind kind, double severity_rms,
                                        const CaccParams& params) {
  const double ts = params.ts;
  AttackTimeline timeline;
  timeline.ts = ts;
  timeline.noise_bound = params.noise_bound_gamma;
  const auto at = [ts](double seconds) { return detail::step_at(seconds, ts); };

  if (kind == ScenarioKind::kStepwise) {
    timeline.noise_windows = {{at(300.0), at(900.0)}};
    if (severity_rms > 0.0) {
      timeline.specs = {
          {{5, 6}, at(60.0), at(540.0), AttackKind::kStep, false, severity_rms},
          {{7, 8}, at(660.0), at(1140.0), AttackKind::kStep, true, severity_rms},
      };
    }
    return timeline;
  }

  timeline.noise_windows = {{at(300.0), at(900.0)}, {at(1500.0), at(1800.0)}};
  if (severity_rms > 0.0) {
    timeline.specs = {
        {{0, 1}, at(60.0), at(540.0), AttackKind::kWhite, false, severity_rms},
        {{5, 6}, at(660.0), at(1140.0), AttackKind::kWhite, false, severity_rms},
        {{7, 8}, at(1260.0), at(1740.0), AttackKind::kWhite, true, severity_rms},
    };
  }
  return timeline;
}

/// Lead command profile: pure decaying pulse except in the braking scenario,
/// which adds three brake-hold-recover cycles.
inline LeadProfile scenario_lead_profile(ScenarioKind kind,
                                         const CaccParams& params) {
  LeadProfile profile;
  if (kind == ScenarioKind::kBraking) {
    profile.brake_steps = {detail::step_at(300.0, params.ts),
                           detail::step_at(900.0, params.ts),
                           detail::step_at(1500.0, params.ts)};
    profile.hold_steps = detail::step_at(100.0, params.ts);
  }
  return profile;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Per-step trace of the attacked follower. Column semantics: state, command
/// and disturbances are the values at step k; x_bar is the estimate the
/// controller consumed at k (one step behind for the secured condition);
/// selected, beta and eta are the bank's values after ingesting y(k), so the
/// reliability bookkeeping is causal in the measurement.
struct VehicleTrace {
  std::vector<double> e, v, a, dv, a_lead, u, d;
  std::vector<std::array<double, 9>> y, delta, gamma;
  std::vector<std::array<double, 5>> x_bar;
  std::vector<int> selected;
  std::vector<Eigen::VectorXd> beta, eta;
  std::vector<std::uint32_t> attacked;
  std::vector<std::uint8_t> grace;
};

struct ScenarioResult {
  ScenarioConfig config;
  int steps = 0;  // trace rows = steps + 1
  int n_observers = 0;
  VehicleTrace follower;                            // vehicle 2
  std::vector<std::vector<double>> follower_accel;  // per follower, vehicle 2 first
  SafetyReport safety;
  ComfortReport comfort;
  ReliabilityReport reliability;  // secured condition only
  std::vector<int> latencies;     // per attack onset, secured condition only
  int edges = 0;
  double wall_seconds = 0.0;
};

/// Stream id for deriving per-vehicle disturbance seeds from the master seed.
namespace rng {
inline std::uint64_t vehicle_seed(std::uint64_t master, int vehicle) {
  return keyed(master, 0x766568u, static_cast<std::uint64_t>(vehicle));
}
}  // namespace rng

inline ScenarioResult run_condition(const ScenarioConfig& config,
                                    const GainSet* gains, bool keep_trace = true) {
  validate(config);
  const auto t_begin = std::chrono::steady_clock::now();
  const bool secured = config.condition == Condition::kSecuredWithAttack;
  if (secured && gains == nullptr) {
    throw config_error(
        "secured-with-attack needs synthesized observer gains; generate them "
        "with the synth subcommand and pass --gains");
  }

  const CaccParams& params = config.params;
  const DiscretePlant plant = build_closed_loop(params);
  const SubsetCatalog catalog = build_catalog(plant.a, plant.c);
  const int n_obs = static_cast<int>(catalog.subsets.size());
  const int steps = detail::step_at(config.duration_s, params.ts);
  const int rows = steps + 1;
  const int followers = config.vehicles - 1;

  AttackTimeline attacked_tl =
      scenario_timeline(config.kind, config.severity_rms, params);
  if (config.condition == Condition::kInsecureNoAttack) attacked_tl.specs.clear();
  // Vehicles behind the attacked one run clean sensors: they exist to show
  // how the disturbance propagates down the chain, and fresh measurement
  // noise at every position would bury that signal at the tail.
  AttackTimeline quiet_tl = attacked_tl;
  quiet_tl.specs.clear();
  quiet_tl.noise_windows.clear();

  const LeadProfile lead_profile = scenario_lead_profile(config.kind, params);
  const LeadModel lead = make_lead_model(params);
  Eigen::Vector2d lead_state(29.5, 0.0);  // [v, a] of vehicle 1

  // Vehicle 2 starts 0.1 m inside its desired gap and closing at 0.5 m/s;
  // the lead's opening pulse then cancels most of that transient. The rest
  // of the chain starts at the consistent equilibrium (all speeds equal,
  // zero spacing error).
  std::vector<Eigen::VectorXd> x(followers);
  x[0] = (Eigen::VectorXd(5) << -0.1, 30.0, 0.0, -0.5, 0.0).finished();
  for (int f = 1; f < followers; ++f)
    x[f] = (Eigen::VectorXd(5) << 0.0, 30.0, 0.0, 0.0, 0.0).finished();
  std::vector<double> u(followers, 0.0);

  std::vector<std::uint64_t> seeds(followers);
  for (int f = 0; f < followers; ++f)
    seeds[f] = rng::vehicle_seed(config.seed, f + 2);

  ObserverBank bank;
  std::vector<BankState> bank_states;
  if (secured) {
    const ReferenceModel ref =
        make_reference_model(ReferenceParams{2.0, 3.0}, params.ts);
    bank = make_observer_bank(plant, catalog, *gains, ref, config.a_beta,
                              config.beta_init);
    for (int f = 0; f < followers; ++f) {
      std::vector<Eigen::VectorXd> x_hat0;
      for (int j = 0; j < n_obs; ++j) {
        Eigen::VectorXd x0 = x[f];
        for (int i = 0; i < 5; ++i) {
          x0(i) += config.estimate_spread *
                   rng::uniform_pm1(seeds[f], rng::observer_init_stream(j),
                                    static_cast<std::uint64_t>(i));
        }
        x_hat0.push_back(x0);
      }
      bank_states.push_back(make_bank_state(bank, x_hat0));
    }
  }

  ScenarioResult result;
  result.config = config;
  result.steps = steps;
  result.n_observers = n_obs;
  VehicleTrace& trace = result.follower;
  trace.selected.reserve(rows);
  trace.attacked.reserve(rows);
  trace.grace.reserve(rows);
  if (keep_trace) {
    for (std::vector<double>* column :
         {&trace.e, &trace.v, &trace.a, &trace.dv, &trace.a_lead, &trace.u,
          &trace.d}) {
      column->reserve(rows);
    }
    result.follower_accel.assign(followers, {});
    for (auto& accel : result.follower_accel) accel.reserve(rows);
  }

  // Online safety accumulation keeps sweep runs trace-free.
  double e_square_sum = 0.0;
  bool below_zero = false;
  int collisions = 0;

  Eigen::VectorXd y_f(9);
  Eigen::Vector2d input;
  std::vector<double> u_snapshot(followers);
  double u_lead_prev = 0.0;

  for (int k = 0; k <= steps; ++k) {
    const double u_lead =
        lead_command(lead_profile, k, lead_state(0), u_lead_prev, plant.ts);
    u_lead_prev = u_lead;
    for (int f = 0; f < followers; ++f) u_snapshot[f] = u[f];

    for (int f = 0; f < followers; ++f) {
      const AttackTimeline& tl = f == 0 ? attacked_tl : quiet_tl;
      const StepDisturbance dist = apply_timeline(tl, k, seeds[f], 9);
      y_f.noalias() = plant.c * x[f];
      y_f += dist.gamma + dist.delta;

      const double u_preceding = f == 0 ? u_lead : u_snapshot[f - 1];
      Eigen::VectorXd estimate;
      if (secured) {
        estimate = bank_states[f].x_bar;
      } else {
        estimate = sensor_average_fallback(y_f);
      }
      const double setpoint =
          controller_setpoint(params, estimate, u[f], u_preceding);

      if (secured) {
        input << u_preceding, u[f];
        step_bank(bank, bank_states[f], y_f, input);
      }

      if (f == 0) {
        std::uint32_t mask = 0;
        for (int sensor : dist.attacked) mask |= std::uint32_t{1} << sensor;
        trace.attacked.push_back(mask);
        trace.grace.push_back(dist.in_grace ? 1 : 0);
        trace.selected.push_back(secured ? bank_states[0].selected : 0);

        const double d = spacing_distance(params, x[0]);
        e_square_sum += x[0](0) * x[0](0);
        if (d < 0.0) {
          if (!below_zero) ++collisions;
          below_zero = true;
        } else {
          below_zero = false;
        }

        if (keep_trace) {
          trace.e.push_back(x[0](0));
          trace.v.push_back(x[0](1));
          trace.a.push_back(x[0](2));
          trace.dv.push_back(x[0](3));
          trace.a_lead.push_back(x[0](4));
          trace.u.push_back(u[0]);
          trace.d.push_back(d);
          std::array<double, 9> row_y{}, row_delta{}, row_gamma{};
          for (int i = 0; i < 9; ++i) {
            row_y[static_cast<std::size_t>(i)] = y_f(i);
            row_delta[static_cast<std::size_t>(i)] = dist.delta(i);
            row_gamma[static_cast<std::size_t>(i)] = dist.gamma(i);
          }
          trace.y.push_back(row_y);
          trace.delta.push_back(row_delta);
          trace.gamma.push_back(row_gamma);
          std::array<double, 5> row_xbar{};
          for (int i = 0; i < 5; ++i)
            row_xbar[static_cast<std::size_t>(i)] = estimate(i);
          trace.x_bar.push_back(row_xbar);
          if (secured) {
            trace.beta.push_back(bank_states[0].beta);
            trace.eta.push_back(bank_states[0].eta);
          } else {
            trace.beta.push_back(Eigen::VectorXd::Zero(n_obs));
            trace.eta.push_back(Eigen::VectorXd::Zero(n_obs));
          }
        }
      }
      if (keep_trace) result.follower_accel[f].push_back(x[f](2));

      // Advance plant and command filter; the plant consumes the commands of
      // step k, the new command applies from k + 1 on.
      input << u_preceding, u_snapshot[f];
      x[f] = plant.a * x[f] + plant.b * input;
      u[f] = step_controller(params, u_snapshot[f], setpoint);
    }
    lead_state = lead.a * lead_state + lead.b * u_lead;
  }

  result.safety.nc = collisions;
  result.safety.rms_e = std::sqrt(e_square_sum / static_cast<double>(rows));
  if (keep_trace) {
    result.comfort = comfort_summary(trace.a, params.ts);
  }
  if (secured) {
    result.reliability = reliability_summary(trace.selected, trace.attacked,
                                             trace.grace, catalog);
    result.latencies =
        detection_latencies(trace.selected, trace.attacked, catalog);
    result.edges = attack_edges(trace.attacked);
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin)
          .count();
  return result;
}

// ---------------------------------------------------------------------------
// Reliability sweep
// ---------------------------------------------------------------------------

struct SweepRow {
  double amplitude = 0.0;
  double mean_fp = 0.0;
  double mean_f1 = 0.0;
};

/// Secured runs of the base scenario at each attack amplitude, replicated
/// with per-rep seeds derived from the master seed.
inline std::vector<SweepRow> run_reliability_sweep(
    const ScenarioConfig& base, const GainSet& gains,
    std::span<const double> amplitudes, int reps) {
  require(reps >= 1, "run_reliability_sweep: reps must be at least 1");
  std::vector<SweepRow> rows;
  rows.reserve(amplitudes.size());
  for (double amplitude : amplitudes) {
    if (amplitude < 0.0)
      throw config_error("sweep amplitudes must be non-negative");
    SweepRow row;
    row.amplitude = amplitude;
    for (int rep = 0; rep < reps; ++rep) {
      ScenarioConfig config = base;
      config.condition = Condition::kSecuredWithAttack;
      config.severity_rms = amplitude;
      config.seed = rng::replication_seed(base.seed, static_cast<std::uint64_t>(rep));
      const ScenarioResult result =
          run_condition(config, &gains, /*keep_trace=*/false);
      row.mean_fp += static_cast<double>(result.reliability.fp);
      row.mean_f1 += result.reliability.f1;
    }
    row.mean_fp /= static_cast<double>(reps);
    row.mean_f1 /= static_cast<double>(reps);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace secure_platoon
