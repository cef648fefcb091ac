#pragma once

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "secure_platoon/gain_synthesis.hpp"
#include "secure_platoon/scenario.hpp"
#include "secure_platoon/sensor_catalog.hpp"

namespace secure_platoon {

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows,
                                        const std::string& what) {
  if (!rows.is_array() || rows.empty() || !rows.front().is_array())
    throw config_error(what + ": expected a nested array matrix");
  const auto n_rows = static_cast<Eigen::Index>(rows.size());
  const auto n_cols = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd m(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n_cols)
      throw config_error(what + ": ragged matrix rows");
    for (Eigen::Index c = 0; c < n_cols; ++c)
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

// Shortest round-trip formatting; %.17g guarantees the exact double value is
// recoverable, which keeps traces byte-deterministic.
inline void append_double(std::string& out, double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  out += buffer;
}

}  // namespace detail

inline constexpr const char* kGainsFormatName = "secure-platoon-gains";
inline constexpr int kGainsFormatVersion = 1;

struct PersistedGains {
  SubsetCatalog catalog;
  GainSet gains;
  GainVerification verification;
};

/// Gains file: catalog (1-based sensor ids), shared Lyapunov matrix, one
/// gain matrix per subset, and the verification report of the synthesis.
inline nlohmann::json gains_to_json(const SubsetCatalog& catalog,
                                    const GainSet& gains,
                                    const GainVerification& verification) {
  nlohmann::json doc;
  doc["format"] = kGainsFormatName;
  doc["version"] = kGainsFormatVersion;
  doc["sensor_count"] = catalog.sensor_count;
  doc["q_tolerable"] = catalog.q_tolerable;
  nlohmann::json subsets = nlohmann::json::array();
  for (const std::vector<int>& subset : catalog.subsets) {
    nlohmann::json ids = nlohmann::json::array();
    for (int sensor : subset) ids.push_back(sensor + 1);
    subsets.push_back(std::move(ids));
  }
  doc["subsets"] = std::move(subsets);
  doc["p"] = detail::matrix_to_json(gains.p);
  nlohmann::json l = nlohmann::json::array();
  for (const Eigen::MatrixXd& gain : gains.l)
    l.push_back(detail::matrix_to_json(gain));
  doc["gains"] = std::move(l);
  doc["margin"] = gains.margin;
  doc["verification"] = {
      {"pass", verification.pass},
      {"p_min_eig", verification.p_min_eig},
      {"p_norm", verification.p_norm},
      {"relative_margin", verification.relative_margin},
      {"lyapunov_max_eigs", verification.lyapunov_max_eigs},
  };
  return doc;
}

inline PersistedGains gains_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format", "") != kGainsFormatName)
    throw config_error("gains file: unrecognized format");
  if (doc.value("version", 0) != kGainsFormatVersion)
    throw config_error("gains file: unsupported version");
  PersistedGains loaded;
  try {
    loaded.catalog.sensor_count = doc.at("sensor_count").get<int>();
    loaded.catalog.q_tolerable = doc.at("q_tolerable").get<int>();
    for (const auto& ids : doc.at("subsets")) {
      std::vector<int> subset;
      for (const auto& id : ids) {
        const int sensor = id.get<int>() - 1;
        if (sensor < 0 || sensor >= loaded.catalog.sensor_count)
          throw config_error("gains file: sensor id out of range");
        subset.push_back(sensor);
      }
      loaded.catalog.max_cardinality =
          std::max(loaded.catalog.max_cardinality, static_cast<int>(subset.size()));
      loaded.catalog.subsets.push_back(std::move(subset));
    }
    loaded.gains.p = detail::matrix_from_json(doc.at("p"), "gains file p");
    for (const auto& gain : doc.at("gains"))
      loaded.gains.l.push_back(detail::matrix_from_json(gain, "gains file l"));
    loaded.gains.margin = doc.at("margin").get<double>();
    const auto& verification = doc.at("verification");
    loaded.verification.pass = verification.at("pass").get<bool>();
    loaded.verification.p_min_eig = verification.at("p_min_eig").get<double>();
    loaded.verification.p_norm = verification.at("p_norm").get<double>();
    loaded.verification.relative_margin =
        verification.at("relative_margin").get<double>();
    loaded.verification.lyapunov_max_eigs =
        verification.at("lyapunov_max_eigs").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& error) {
    throw config_error(std::string("gains file: ") + error.what());
  }
  if (loaded.gains.l.size() != loaded.catalog.subsets.size())
    throw config_error("gains file: one gain per subset required");
  return loaded;
}

inline void save_gains(const std::string& path, const SubsetCatalog& catalog,
                       const GainSet& gains,
                       const GainVerification& verification) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write gains file " + path);
  out << gains_to_json(catalog, gains, verification).dump(2) << "\n";
}

inline PersistedGains load_gains(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw config_error("cannot open gains file " + path +
                       "; generate it with the synth subcommand");
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& error) {
    throw config_error("gains file " + path + ": " + error.what());
  }
  return gains_from_json(doc);
}

/// The loaded gains must describe exactly the catalog of the current plant;
/// anything else means they were synthesized for a different configuration.
inline void check_gains_match(const PersistedGains& loaded,
                              const SubsetCatalog& catalog, int state_dim) {
  if (loaded.catalog.sensor_count != catalog.sensor_count ||
      loaded.catalog.subsets != catalog.subsets) {
    throw config_error(
        "gains file does not match the plant's sensor catalog; re-run the "
        "synth subcommand for this config");
  }
  if (loaded.gains.p.rows() != state_dim || loaded.gains.p.cols() != state_dim)
    throw config_error("gains file: Lyapunov matrix dimension mismatch");
  for (const Eigen::MatrixXd& gain : loaded.gains.l) {
    if (gain.rows() != state_dim)
      throw config_error("gains file: gain row dimension mismatch");
  }
}

// ---------------------------------------------------------------------------
// Trace and summary emission
// ---------------------------------------------------------------------------

inline void write_trace_csv(std::ostream& out, const ScenarioResult& result) {
  const VehicleTrace& trace = result.follower;
  require(!trace.e.empty(), "write_trace_csv: run kept no trace");
  const int n_obs = result.n_observers;

  std::string line = "k,t,e,v,a,dv,a_lead,u,d";
  for (int i = 1; i <= 9; ++i) line += ",y" + std::to_string(i);
  for (int i = 1; i <= 9; ++i) line += ",delta" + std::to_string(i);
  for (int i = 1; i <= 9; ++i) line += ",gamma" + std::to_string(i);
  for (int i = 1; i <= 5; ++i) line += ",xbar" + std::to_string(i);
  line += ",selected_j";
  for (int j = 1; j <= n_obs; ++j) line += ",beta" + std::to_string(j);
  for (int j = 1; j <= n_obs; ++j) line += ",eta" + std::to_string(j);
  out << line << "\n";

  const double ts = result.config.params.ts;
  for (std::size_t k = 0; k < trace.e.size(); ++k) {
    line.clear();
    line += std::to_string(k);
    line += ',';
    detail::append_double(line, static_cast<double>(k) * ts);
    for (double value : {trace.e[k], trace.v[k], trace.a[k], trace.dv[k],
                         trace.a_lead[k], trace.u[k], trace.d[k]}) {
      line += ',';
      detail::append_double(line, value);
    }
    for (double value : trace.y[k]) {
      line += ',';
      detail::append_double(line, value);
    }
    for (double value : trace.delta[k]) {
      line += ',';
      detail::append_double(line, value);
    }
    for (double value : trace.gamma[k]) {
      line += ',';
      detail::append_double(line, value);
    }
    for (double value : trace.x_bar[k]) {
      line += ',';
      detail::append_double(line, value);
    }
    line += ',';
    // selected_j is reported with the file's 1-based subset numbering.
    line += std::to_string(trace.selected[k] + 1);
    for (Eigen::Index j = 0; j < n_obs; ++j) {
      line += ',';
      detail::append_double(line, trace.beta[k](j));
    }
    for (Eigen::Index j = 0; j < n_obs; ++j) {
      line += ',';
      detail::append_double(line, trace.eta[k](j));
    }
    out << line << "\n";
  }
}

inline nlohmann::json summary_to_json(const ScenarioResult& result) {
  nlohmann::json doc;
  doc["condition"] = condition_name(result.config.condition);
  doc["scenario"] = kind_name(result.config.kind);
  doc["severity_rms"] = result.config.severity_rms;
  doc["duration_s"] = result.config.duration_s;
  doc["vehicles"] = result.config.vehicles;
  doc["seed"] = result.config.seed;
  doc["config_hash"] = result.config.config_hash;
  doc["steps"] = result.steps;
  doc["wall_seconds"] = result.wall_seconds;
  doc["safety"] = {{"nc", result.safety.nc}, {"rms_e", result.safety.rms_e}};
  doc["comfort"] = {{"rc", result.comfort.rc},
                    {"msdv_x", result.comfort.msdv_x},
                    {"short_series", result.comfort.short_series}};
  if (result.config.condition == Condition::kSecuredWithAttack) {
    doc["reliability"] = {{"tp", result.reliability.tp},
                          {"fp", result.reliability.fp},
                          {"skipped", result.reliability.skipped},
                          {"f1", result.reliability.f1},
                          {"attack_edges", result.edges},
                          {"detection_latencies", result.latencies}};
  }
  return doc;
}

inline void write_sweep_csv(std::ostream& out,
                            const std::vector<SweepRow>& rows) {
  out << "amplitude,mean_fp,mean_f1\n";
  std::string line;
  for (const SweepRow& row : rows) {
    line.clear();
    detail::append_double(line, row.amplitude);
    line += ',';
    detail::append_double(line, row.mean_fp);
    line += ',';
    detail::append_double(line, row.mean_f1);
    out << line << "\n";
  }
}

}  // namespace secure_platoon
