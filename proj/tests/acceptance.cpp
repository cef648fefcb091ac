// End-to-end acceptance gate. Reproduces the headline closed-loop numbers
// (safety, comfort, detector reliability, string stability) and runs the
// randomized property suites, printing exactly one PASS/FAIL line per
// criterion. Exits nonzero if any criterion fails.
//
// Usage: acceptance_gate --configs <directory with the shipped .cfg files>

#include <algorithm>
#include <chrono>
#include <complex>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "secure_platoon/scenario.hpp"
#include "test_support.hpp"

namespace {

using namespace secure_platoon;

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

struct Gate {
  bool all_pass = true;
  void report(int id, const char* label, bool pass,
              const std::string& evidence) {
    all_pass = all_pass && pass;
    std::printf("%s %2d  %s: %s\n", pass ? "PASS" : "FAIL", id, label,
                evidence.c_str());
    std::fflush(stdout);
  }
};

// Shared platoon problem: one synthesis feeds every scenario criterion.
struct PlatoonFixture {
  LoadedConfig steady;
  LoadedConfig braking;
  LoadedConfig stepwise;
  LoadedConfig platoon10;
  DiscretePlant plant;
  SubsetCatalog catalog;
  Eigen::MatrixXd d;
  GainSet gains;
  GainVerification ver;
};

PlatoonFixture load_fixture(const std::string& configs_dir) {
  PlatoonFixture f;
  f.steady = load_config(configs_dir + "/steady_state.cfg");
  f.braking = load_config(configs_dir + "/braking.cfg");
  f.stepwise = load_config(configs_dir + "/stepwise.cfg");
  f.platoon10 = load_config(configs_dir + "/platoon10.cfg");
  f.plant = build_closed_loop(f.steady.scenario.params);
  f.catalog = build_catalog(f.plant.a, f.plant.c);
  f.d = build_coupling_matrix(f.plant.a);
  f.gains = synthesize_gains(f.plant.a, f.plant.c, f.catalog, f.d,
                             f.steady.synthesis);
  f.ver = verify_gains(f.plant.a, f.d, f.plant.c, f.catalog, f.gains);
  return f;
}

ScenarioConfig variant(const LoadedConfig& base, Condition condition,
                       double severity, std::uint64_t seed) {
  ScenarioConfig config = base.scenario;
  config.condition = condition;
  config.severity_rms = severity;
  config.seed = seed;
  return config;
}

// ---------------------------------------------------------------------------
// Criteria 1-10: closed-loop reproduction on the platoon scenarios.

void criterion_1_gains(Gate& gate, const PlatoonFixture& f) {
  const double bound = -1e-8 * f.ver.p_norm;
  double worst = -1e300;
  for (double eig : f.ver.lyapunov_max_eigs) worst = std::max(worst, eig);
  const bool pass = f.ver.lyapunov_max_eigs.size() == 18 && worst < bound &&
                    f.ver.p_min_eig > 0.0;
  gate.report(1, "gain synthesis feasibility", pass,
              fmt("%zu/19 inequalities (worst eig %.3g vs bound %.3g, "
                  "min eig P %.3g, relative margin %.3g)",
                  f.ver.lyapunov_max_eigs.size() + 1, worst, bound,
                  f.ver.p_min_eig, f.ver.relative_margin));
}

ScenarioResult run_c1_steady(const PlatoonFixture& f) {
  return run_condition(
      variant(f.steady, Condition::kInsecureNoAttack, 0.0, 1), nullptr);
}

void criterion_2_baseline(Gate& gate, const ScenarioResult& c1) {
  const double lo = 0.028 * 0.85, hi = 0.028 * 1.15;
  const bool pass = c1.safety.nc == 0 && c1.safety.rms_e >= lo &&
                    c1.safety.rms_e <= hi;
  gate.report(2, "no-attack baseline", pass,
              fmt("nc=%d rms_e=%.4f m (target 0.028 +/- 15%% -> [%.4f, %.4f])",
                  c1.safety.nc, c1.safety.rms_e, lo, hi));
}

void criterion_3_insecure_critical(Gate& gate, const PlatoonFixture& f) {
  int collided = 0, rms_over = 0;
  double rms_min = 1e300, rms_max = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const ScenarioResult r = run_condition(
        variant(f.steady, Condition::kInsecureWithAttack, kCriticalRms, seed),
        nullptr, false);
    if (r.safety.nc >= 1) ++collided;
    if (r.safety.rms_e > 1.0) ++rms_over;
    rms_min = std::min(rms_min, r.safety.rms_e);
    rms_max = std::max(rms_max, r.safety.rms_e);
  }
  const bool pass = collided >= 8 && rms_over >= 8;
  gate.report(3, "insecure under critical attack", pass,
              fmt("collisions in %d/10 seeds (need >= 8), rms_e > 1 m in "
                  "%d/10, rms_e range [%.3g, %.3g]",
                  collided, rms_over, rms_min, rms_max));
}

void criterion_4_secured_all(Gate& gate, const PlatoonFixture& f) {
  int ok = 0, total = 0;
  double worst_rms = 0.0;
  int worst_nc = 0;
  for (double severity : {kCriticalRms, kVeryUncomfortableRms,
                          kUncomfortableRms}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const ScenarioResult r = run_condition(
          variant(f.steady, Condition::kSecuredWithAttack, severity, seed),
          &f.gains, false);
      ++total;
      if (r.safety.nc == 0 && r.safety.rms_e <= 0.05) ++ok;
      worst_rms = std::max(worst_rms, r.safety.rms_e);
      worst_nc = std::max(worst_nc, r.safety.nc);
    }
  }
  gate.report(4, "secured under all severities", ok == total,
              fmt("%d/%d runs with nc=0 and rms_e <= 0.05 m (worst nc=%d, "
                  "worst rms_e=%.4f)",
                  ok, total, worst_nc, worst_rms));
}

void criterion_5_comfort(Gate& gate, const PlatoonFixture& f,
                         const ScenarioResult& c1) {
  bool ratios_ok = true;
  double worst_rc_ratio = 0.0, worst_ms_ratio = 0.0;
  for (double severity : {kCriticalRms, kVeryUncomfortableRms,
                          kUncomfortableRms}) {
    const ScenarioResult c4 = run_condition(
        variant(f.steady, Condition::kSecuredWithAttack, severity, 1),
        &f.gains);
    const double rc_ratio = c4.comfort.rc / c1.comfort.rc;
    const double ms_ratio = c4.comfort.msdv_x / c1.comfort.msdv_x;
    worst_rc_ratio = std::max(worst_rc_ratio, rc_ratio);
    worst_ms_ratio = std::max(worst_ms_ratio, ms_ratio);
    ratios_ok = ratios_ok && rc_ratio <= 10.0 && ms_ratio <= 10.0;
  }
  const ScenarioResult c2 = run_condition(
      variant(f.steady, Condition::kInsecureWithAttack, kVeryUncomfortableRms,
              1),
      nullptr);
  const bool band_ok = c2.comfort.rc >= 1.25 && c2.comfort.rc <= 2.5;
  gate.report(5, "comfort preservation", ratios_ok && band_ok,
              fmt("secured/baseline worst ratios rc=%.3f msdv=%.3f (<= 10), "
                  "insecure very-uncomfortable rc=%.3f m/s^2 (band "
                  "[1.25, 2.5])",
                  worst_rc_ratio, worst_ms_ratio, c2.comfort.rc));
}

void criterion_6_detection(Gate& gate, const PlatoonFixture& f) {
  int latency_max = -1;
  bool latency_ok = true;
  double fp_per_edge_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const ScenarioResult r = run_condition(
        variant(f.steady, Condition::kSecuredWithAttack,
                kVeryUncomfortableRms, seed),
        &f.gains, false);
    const int first = r.latencies.empty() ? -1 : r.latencies.front();
    latency_ok = latency_ok && first >= 0 && first <= 5;
    latency_max = std::max(latency_max, first);
    fp_per_edge_sum +=
        static_cast<double>(r.reliability.fp) / std::max(1, r.edges);
  }
  const double mean_fp_per_edge = fp_per_edge_sum / 20.0;
  const bool pass = latency_ok && mean_fp_per_edge <= 5.0;
  gate.report(6, "detection latency", pass,
              fmt("first-onset latency <= 5 steps in 20/20 seeds (max %d), "
                  "mean fp per attack edge %.3f (<= 5)",
                  latency_max, mean_fp_per_edge));
}

void criterion_7_sweep(Gate& gate, const PlatoonFixture& f) {
  const std::vector<double> amplitudes = {0.0001, 0.001, 0.01, 1.0, 150.0,
                                          300.0};
  const std::vector<SweepRow> rows =
      run_reliability_sweep(f.steady.scenario, f.gains, amplitudes, 100);
  bool high_ok = true;
  double min_high = 1.0;
  for (const SweepRow& row : rows) {
    if (row.amplitude >= 0.01) {
      high_ok = high_ok && row.mean_f1 >= 0.99;
      min_high = std::min(min_high, row.mean_f1);
    }
  }
  const double f1_tiny = rows[0].mean_f1;  // amplitude 1e-4, below the noise
  const bool degrade_ok = f1_tiny < 0.99 && f1_tiny < min_high;
  gate.report(7, "reliability sweep", high_ok && degrade_ok,
              fmt("mean F1 >= 0.99 for amplitudes >= 0.01 (min %.4f over 100 "
                  "reps); degraded to %.3f at amplitude 1e-4 (%.3f at 1e-3)",
                  min_high, f1_tiny, rows[1].mean_f1));
}

void criterion_8_braking(Gate& gate, const PlatoonFixture& f) {
  bool secured_ok = true;
  double worst_rms = 0.0;
  int worst_nc = 0;
  for (double severity : {kCriticalRms, kVeryUncomfortableRms,
                          kUncomfortableRms}) {
    const ScenarioResult r = run_condition(
        variant(f.braking, Condition::kSecuredWithAttack, severity, 1),
        &f.gains, false);
    secured_ok = secured_ok && r.safety.nc == 0 && r.safety.rms_e <= 0.06;
    worst_rms = std::max(worst_rms, r.safety.rms_e);
    worst_nc = std::max(worst_nc, r.safety.nc);
  }
  const ScenarioResult c2 = run_condition(
      variant(f.braking, Condition::kInsecureWithAttack, kCriticalRms, 1),
      nullptr, false);
  const bool pass = secured_ok && c2.safety.nc >= 1;
  gate.report(8, "braking scenario", pass,
              fmt("secured worst nc=%d rms_e=%.4f m (<= 0.06) across "
                  "severities; insecure critical nc=%d (>= 1)",
                  worst_nc, worst_rms, c2.safety.nc));
}

void criterion_9_string_stability(Gate& gate, const PlatoonFixture& f) {
  const ScenarioResult secured = run_condition(
      variant(f.platoon10, Condition::kSecuredWithAttack,
              kVeryUncomfortableRms, 1),
      &f.gains);
  const ScenarioResult baseline = run_condition(
      variant(f.platoon10, Condition::kInsecureNoAttack, 0.0, 1), nullptr);

  const double ts = f.platoon10.scenario.params.ts;
  auto weighted_spectrum = [&](const std::vector<double>& accel) {
    const std::vector<double> w =
        weight_acceleration(accel, ts, Weighting::kRideComfort);
    return amplitude_spectrum(w, ts);
  };

  // Near-silent bins are compared against an absolute floor so the 2x ratio
  // is only enforced where the baseline carries measurable energy. The floor
  // sits four orders of magnitude below the insecure attack peak.
  const double floor = 1e-5;
  double peak2 = 0.0, peak10 = 0.0, worst_ratio = 0.0;
  bool bins_ok = true;
  const std::size_t followers = secured.follower_accel.size();
  for (std::size_t v = 0; v < followers; ++v) {
    const Spectrum sec = weighted_spectrum(secured.follower_accel[v]);
    const Spectrum base = weighted_spectrum(baseline.follower_accel[v]);
    const double peak =
        *std::max_element(sec.amplitude.begin(), sec.amplitude.end());
    if (v == 0) peak2 = peak;
    if (v + 1 == followers) peak10 = peak;
    for (std::size_t i = 0; i < sec.amplitude.size(); ++i) {
      const double allowed = 2.0 * base.amplitude[i] + floor;
      worst_ratio = std::max(worst_ratio, sec.amplitude[i] / allowed);
      bins_ok = bins_ok && sec.amplitude[i] <= allowed;
    }
  }
  const bool pass = followers == 9 && peak10 <= peak2 && bins_ok;
  gate.report(9, "10-vehicle string stability", pass,
              fmt("vehicle-10 spectrum peak %.3g <= vehicle-2 peak %.3g; "
                  "secured/baseline bins within 2x + 1e-5 for all 9 "
                  "followers (worst fraction %.3f)",
                  peak10, peak2, worst_ratio));
}

void criterion_10_stepwise(Gate& gate, const PlatoonFixture& f) {
  const ScenarioResult envelope = run_condition(
      variant(f.stepwise, Condition::kSecuredWithAttack, 0.0, 1), &f.gains);
  bool pass = true;
  double worst = -1e300;
  for (double severity : {kCriticalRms, kVeryUncomfortableRms,
                          kUncomfortableRms}) {
    const ScenarioResult r = run_condition(
        variant(f.stepwise, Condition::kSecuredWithAttack, severity, 1),
        &f.gains);
    for (std::size_t k = 0; k < r.follower.e.size(); ++k) {
      const double excess =
          std::abs(r.follower.e[k]) - std::abs(envelope.follower.e[k]);
      worst = std::max(worst, excess);
      pass = pass && excess <= 0.05;
    }
  }
  gate.report(10, "stepwise attacks", pass,
              fmt("|e2| exceeds the no-attack envelope by at most %.4f m "
                  "(allowed 0.05) across step and gated-step severities",
                  worst));
}

// ---------------------------------------------------------------------------
// Criteria 11-14: property suites on randomized systems plus the platoon.

struct BankCase {
  DiscretePlant plant;
  SubsetCatalog catalog;
  Eigen::MatrixXd d;
  GainSet gains;
  GainVerification ver;
  Eigen::VectorXd x0;
};

// Draws a detectable (often marginally stable) system and synthesizes its
// bank. Rejects draws whose verified loops contract slower than spectral
// radius 0.99 so convergence is observable within the test horizon; the
// rejection is static gain conditioning, independent of the simulated checks.
bool draw_bank_case(std::mt19937_64& rng, bool marginal, BankCase& out) {
  std::uniform_int_distribution<int> n_dist(2, 4);
  std::uniform_real_distribution<double> radius(0.3, 0.92);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int n = n_dist(rng);
  Eigen::MatrixXd a;
  if (marginal) {
    a = Eigen::MatrixXd::Zero(n, n);
    a(0, 0) = 1.0;
    if (n > 1)
      a.bottomRightCorner(n - 1, n - 1) =
          test_support::random_schur(rng, n - 1, radius(rng));
  } else {
    a = test_support::random_schur(rng, n, radius(rng));
  }
  std::uniform_int_distribution<int> p_dist(std::max(2, n - 1), 5);
  const int p = p_dist(rng);
  Eigen::MatrixXd c = test_support::random_matrix(rng, p, n);
  if (marginal) {
    int seeing = 0;
    for (int i = 0; i < p; ++i) {
      if (unit(rng) < 0.4 && i >= 2)
        c(i, 0) = 0.0;
      else
        ++seeing;
    }
    if (seeing < 2) return false;
  }

  SubsetCatalog catalog;
  try {
    catalog = build_catalog(a, c);
  } catch (const std::invalid_argument&) {
    return false;
  }
  if (catalog.subsets.size() < 2) return false;

  const Eigen::MatrixXd d = build_coupling_matrix(a);
  GainSet gains;
  try {
    gains = synthesize_gains(a, c, catalog, d);
  } catch (const synthesis_error&) {
    return false;
  }
  const GainVerification ver = verify_gains(a, d, c, catalog, gains);
  if (!ver.pass) return false;

  double rho = 0.0;
  for (std::size_t j = 0; j < catalog.subsets.size(); ++j) {
    const Eigen::MatrixXd c_j = select_rows(c, catalog.subsets[j]);
    for (double beta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const Eigen::MatrixXd f = a - (1.0 - beta) * d - gains.l[j] * c_j;
      rho = std::max(rho, f.eigenvalues().cwiseAbs().maxCoeff());
    }
  }
  if (rho > 0.99) return false;

  out.plant = DiscretePlant{};
  out.plant.a = a;
  out.plant.b = Eigen::MatrixXd::Zero(n, 1);
  out.plant.c = c;
  out.plant.noise_bound_gamma = 1e-3;
  out.plant.ts = 0.1;
  out.catalog = catalog;
  out.d = d;
  out.gains = gains;
  out.ver = ver;
  out.x0 = test_support::random_matrix(rng, n, 1);
  return true;
}

// One bank invariant pass: clean convergence, attacked-subset dominance,
// beta range, beta = 1 decoupling. Returns a failure description or empty.
std::string check_bank_invariants(std::mt19937_64& rng, const BankCase& bc) {
  const int n = static_cast<int>(bc.plant.a.rows());
  const int p = static_cast<int>(bc.plant.c.rows());
  const std::size_t n_obs = bc.catalog.subsets.size();
  const ObserverBank bank = make_observer_bank(
      bc.plant, bc.catalog, bc.gains,
      make_reference_model(ReferenceParams{2.0, 3.0}, bc.plant.ts));
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(bc.plant.b.cols());

  // No-attack convergence with the beta range asserted along the way.
  Eigen::VectorXd x = bc.x0;
  std::vector<Eigen::VectorXd> init;
  double init_err = 0.0;
  for (std::size_t j = 0; j < n_obs; ++j) {
    const Eigen::VectorXd offset = test_support::random_matrix(rng, n, 1) * 2.0;
    init_err = std::max(init_err, offset.norm());
    init.push_back(x + offset);
  }
  BankState state = make_bank_state(bank, init);
  for (int k = 0; k < 2000; ++k) {
    step_bank(bank, state, bc.plant.c * x, u);
    x = bc.plant.a * x;
    if (state.beta.minCoeff() <= 0.0 || state.beta.maxCoeff() >= 1.0)
      return fmt("beta left (0,1) at step %d", k);
  }
  double err = 0.0;
  for (const auto& x_hat : state.x_hat)
    err = std::max(err, (x_hat - x).norm());
  if (err > 1e-6 * init_err)
    return fmt("clean run converged only to %.3g of the initial error",
               err / init_err);

  // Dominance under a single attacked sensor from the first subset.
  AttackTimeline tl;
  tl.ts = bc.plant.ts;
  AttackSpec spec;
  spec.targets = {bc.catalog.subsets[0][0]};
  spec.start = 100;
  spec.stop = 700;
  spec.kind = AttackKind::kWhite;
  spec.rms = 2.0;
  tl.specs.push_back(spec);
  tl.noise_windows.push_back({0, 700});
  tl.noise_bound = 1e-3;

  std::vector<std::size_t> attacked, clean;
  for (std::size_t j = 0; j < n_obs; ++j)
    (subset_clean(bc.catalog.subsets[j], spec.targets) ? clean : attacked)
        .push_back(j);
  if (clean.empty() || attacked.empty())
    return "catalog cannot split into attacked and clean subsets";

  x = bc.x0;
  init.clear();
  for (std::size_t j = 0; j < n_obs; ++j)
    init.push_back(x + test_support::random_matrix(rng, n, 1));
  state = make_bank_state(bank, init);
  int assessed = 0, clean_selected = 0;
  for (int k = 0; k < 700; ++k) {
    const StepDisturbance dist = apply_timeline(tl, k, 99, p);
    step_bank(bank, state, bc.plant.c * x + dist.gamma + dist.delta, u);
    x = bc.plant.a * x;
    if (k < 150) continue;  // five-second settling window after onset
    ++assessed;
    double worst_clean = 1.0, best_attacked = 0.0;
    for (std::size_t j : clean)
      worst_clean =
          std::min(worst_clean, state.beta(static_cast<Eigen::Index>(j)));
    for (std::size_t j : attacked)
      best_attacked =
          std::max(best_attacked, state.beta(static_cast<Eigen::Index>(j)));
    if (best_attacked >= worst_clean)
      return fmt("attacked beta %.3f outranked clean beta %.3f at step %d",
                 best_attacked, worst_clean, k);
    if (subset_clean(bc.catalog.subsets[static_cast<std::size_t>(
                         state.selected)],
                     spec.targets))
      ++clean_selected;
  }
  if (clean_selected < (99 * assessed) / 100)
    return fmt("clean subset selected at only %d/%d assessed steps",
               clean_selected, assessed);

  // Forcing beta = 1 must reproduce the decoupled observer update exactly.
  init.clear();
  for (std::size_t j = 0; j < n_obs; ++j)
    init.push_back(bc.x0 + test_support::random_matrix(rng, n, 1));
  state = make_bank_state(bank, init);
  state.beta.setConstant(1.0);
  const Eigen::VectorXd y = test_support::random_matrix(rng, p, 1);
  std::vector<Eigen::VectorXd> expected;
  for (std::size_t j = 0; j < n_obs; ++j) {
    const Eigen::MatrixXd c_j = select_rows(bc.plant.c, bc.catalog.subsets[j]);
    Eigen::VectorXd y_j(bc.catalog.subsets[j].size());
    for (std::size_t i = 0; i < bc.catalog.subsets[j].size(); ++i)
      y_j(static_cast<Eigen::Index>(i)) = y(bc.catalog.subsets[j][i]);
    expected.push_back(bc.plant.a * init[j] + bc.plant.b * u +
                       bc.gains.l[j] * (y_j - c_j * init[j]));
  }
  step_bank(bank, state, y, u);
  for (std::size_t j = 0; j < n_obs; ++j)
    if ((state.x_hat[j] - expected[j]).norm() > 1e-12)
      return fmt("beta=1 step deviated from the decoupled update by %.3g",
                 (state.x_hat[j] - expected[j]).norm());

  // Scaling every indicator must preserve the ranking of the classifier.
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd eta =
        test_support::random_matrix(rng, static_cast<int>(n_obs), 1, 0.0, 2.0);
    int best_ref = -1;
    for (double scale : {1e-6, 1.0, 1e6}) {
      const Reliability rel = classify_reliability(scale * eta, 1e-3, 1000.0);
      int best = 0;
      for (int j = 1; j < static_cast<int>(n_obs); ++j)
        if (rel.beta(j) > rel.beta(best)) best = j;
      if (best_ref < 0) best_ref = best;
      if (best != best_ref)
        return fmt("argmax moved from %d to %d under indicator scaling",
                   best_ref, best);
    }
    const Reliability ra = classify_reliability(eta, 0.0, 1000.0);
    const Reliability rb = classify_reliability(1e3 * eta, 0.0, 1000.0);
    if ((ra.beta_eta - rb.beta_eta).cwiseAbs().maxCoeff() > 1e-12)
      return "unregularized classifier ratios moved under scaling";
  }
  return "";
}

// Random bank corpus shared by criteria 11 and 14; the platoon case is
// appended last so both criteria cover it too.
std::vector<BankCase> build_bank_corpus(const PlatoonFixture& f,
                                        int& attempts) {
  std::mt19937_64 rng(20260815);
  std::vector<BankCase> corpus;
  attempts = 0;
  while (corpus.size() < 100 && attempts < 400) {
    ++attempts;
    BankCase bc;
    if (draw_bank_case(rng, attempts % 2 == 0, bc)) corpus.push_back(bc);
  }

  BankCase platoon;
  platoon.plant = f.plant;
  platoon.catalog = f.catalog;
  platoon.d = f.d;
  platoon.gains = f.gains;
  platoon.ver = f.ver;
  platoon.x0 = (Eigen::VectorXd(5) << -0.1, 30, 0, -0.5, 0).finished();
  corpus.push_back(platoon);
  return corpus;
}

void criterion_11_bank_suite(Gate& gate, const std::vector<BankCase>& corpus,
                             int attempts) {
  std::mt19937_64 rng(97531);
  int suite_pass = 0;
  std::string first_failure;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::string failure = check_bank_invariants(rng, corpus[i]);
    if (failure.empty())
      ++suite_pass;
    else if (first_failure.empty())
      first_failure = i + 1 == corpus.size()
                          ? fmt("platoon: %s", failure.c_str())
                          : fmt("system %zu: %s", i, failure.c_str());
  }
  const bool pass = corpus.size() == 101 &&
                    suite_pass == static_cast<int>(corpus.size());
  gate.report(11, "observer bank invariant suite", pass,
              pass ? fmt("convergence, dominance, beta range, decoupling, "
                         "scale invariance on 100 random systems + platoon "
                         "(%d draw attempts)",
                         attempts)
                   : fmt("%d/%zu suites passed; first failure: %s",
                         suite_pass, corpus.size(),
                         first_failure.empty() ? "corpus short"
                                               : first_failure.c_str()));
}

// Lyapunov decrease of every synthesized gain set across the reliability
// interpolation, platoon included.
void criterion_14_interpolation(Gate& gate,
                                const std::vector<BankCase>& corpus) {
  double worst_rel = -1e300;
  int checked = 0;
  for (const BankCase& bc : corpus) {
    for (std::size_t j = 0; j < bc.catalog.subsets.size(); ++j) {
      const Eigen::MatrixXd c_j =
          select_rows(bc.plant.c, bc.catalog.subsets[j]);
      for (double beta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const Eigen::MatrixXd loop =
            bc.plant.a - (1.0 - beta) * bc.d - bc.gains.l[j] * c_j;
        const Eigen::MatrixXd q =
            loop.transpose() * bc.gains.p * loop - bc.gains.p;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
        worst_rel = std::max(
            worst_rel, es.eigenvalues().maxCoeff() / bc.ver.p_norm);
        ++checked;
      }
    }
  }
  const bool pass = worst_rel < -1e-8;
  gate.report(14, "Lyapunov decrease across reliability interpolation", pass,
              fmt("%d loop checks over %zu gain sets at beta in "
                  "{0, 0.25, 0.5, 0.75, 1}; worst relative max eig %.3g "
                  "(< -1e-8)",
                  checked, corpus.size(), worst_rel));
}

// Independent detectability oracle for criterion 12, reasoning from
// eigenvector geometry: a subset fails exactly when some eigenvector for an
// eigenvalue on or outside the unit circle is invisible to its rows.
bool oracle_detectable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c) {
  const Eigen::Index n = a.rows();
  const Eigen::VectorXcd eigs = a.eigenvalues();
  std::vector<std::complex<double>> reps;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lambda = eigs(i);
    if (std::abs(lambda) < 1.0 - 1e-6) continue;
    bool seen = false;
    for (const auto& r : reps)
      if (std::abs(r - lambda) < 1e-6) seen = true;
    if (!seen) reps.push_back(std::abs(lambda - 1.0) < 1e-6 ? 1.0 : lambda);
  }
  for (const auto& lambda : reps) {
    const Eigen::MatrixXcd shifted =
        a.cast<std::complex<double>>() -
        lambda * Eigen::MatrixXcd::Identity(n, n);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted, Eigen::ComputeFullV);
    const Eigen::VectorXd sv = svd.singularValues();
    Eigen::Index kernel_dim = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
      if (sv(k) <= 1e-6 * sv(0)) ++kernel_dim;
    if (kernel_dim == 0) continue;
    const Eigen::MatrixXcd kernel = svd.matrixV().rightCols(kernel_dim);
    const Eigen::MatrixXcd cv = c.cast<std::complex<double>>() * kernel;
    Eigen::JacobiSVD<Eigen::MatrixXcd> cv_svd(cv);
    const Eigen::VectorXd cv_sv = cv_svd.singularValues();
    Eigen::Index rank = 0;
    for (Eigen::Index k = 0; k < cv_sv.size(); ++k)
      if (cv_sv(k) > 1e-9 * (cv_sv(0) + 1e-300)) ++rank;
    if (rank < kernel_dim) return false;
  }
  return true;
}

std::vector<std::vector<int>> oracle_catalog(const Eigen::MatrixXd& a,
                                             const Eigen::MatrixXd& c) {
  const int p = static_cast<int>(c.rows());
  std::vector<std::vector<int>> kept;
  for (int card = 1; card <= p; ++card) {
    std::vector<std::vector<int>> level;
    for (unsigned mask = 1; mask < (1u << p); ++mask) {
      std::vector<int> combo;
      for (int i = 0; i < p; ++i)
        if (mask & (1u << i)) combo.push_back(i);
      if (static_cast<int>(combo.size()) == card) level.push_back(combo);
    }
    std::sort(level.begin(), level.end());
    for (const auto& combo : level) {
      bool has_kept_subset = false;
      for (const auto& k : kept)
        if (std::includes(combo.begin(), combo.end(), k.begin(), k.end()))
          has_kept_subset = true;
      if (!has_kept_subset && oracle_detectable(a, select_rows(c, combo)))
        kept.push_back(combo);
    }
  }
  return kept;
}

void criterion_12_catalog(Gate& gate, const PlatoonFixture& f) {
  std::mt19937_64 rng(515151);
  std::uniform_int_distribution<int> n_dist(1, 4);
  std::uniform_int_distribution<int> p_dist(1, 6);
  std::uniform_real_distribution<double> radius(0.3, 1.4);

  int agreed = 0, nonempty = 0;
  std::string mismatch;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = n_dist(rng);
    const int p = p_dist(rng);
    const Eigen::MatrixXd a = test_support::random_schur(rng, n, radius(rng));
    const Eigen::MatrixXd c = test_support::random_matrix(rng, p, n);
    const std::vector<std::vector<int>> reference = oracle_catalog(a, c);
    if (reference.empty()) {
      try {
        build_catalog(a, c);
        if (mismatch.empty())
          mismatch = fmt("trial %d: accepted an undetectable system", trial);
      } catch (const std::invalid_argument&) {
        ++agreed;
      }
      continue;
    }
    ++nonempty;
    if (build_catalog(a, c).subsets == reference) {
      ++agreed;
    } else if (mismatch.empty()) {
      mismatch = fmt("trial %d (n=%d, p=%d) disagrees with brute force",
                     trial, n, p);
    }
  }

  const std::vector<std::vector<int>> published = {
      {0, 1}, {0, 6}, {0, 8}, {1, 5}, {1, 7},
      {5, 6}, {5, 8}, {6, 7}, {7, 8}};
  const bool platoon_ok = f.catalog.subsets == published;
  const bool pass = agreed == 100 && nonempty >= 50 && platoon_ok;
  gate.report(12, "subset catalog brute-force equivalence", pass,
              pass ? fmt("100/100 random systems agree (%d with nonempty "
                         "catalogs); platoon catalog equals the nine "
                         "distance-velocity pairs",
                         nonempty)
                   : fmt("%d/100 agreed, platoon match %d%s%s", agreed,
                         platoon_ok ? 1 : 0, mismatch.empty() ? "" : "; ",
                         mismatch.c_str()));
}

void criterion_13_discretization(Gate& gate) {
  std::mt19937_64 rng(20260816);
  std::uniform_int_distribution<int> n_dist(1, 6);
  std::uniform_int_distribution<int> m_dist(1, 3);
  std::uniform_real_distribution<double> ts_dist(0.01, 0.5);

  int ok = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = n_dist(rng);
    const int m = m_dist(rng);
    ContinuousLti sys;
    sys.a = test_support::random_hurwitz(rng, n);
    sys.b = test_support::random_matrix(rng, n, m);
    const double ts = ts_dist(rng);
    const Eigen::VectorXd x0 = test_support::random_matrix(rng, n, 1);
    const Eigen::VectorXd u = test_support::random_matrix(rng, m, 1);

    const DiscreteLti d = discretize_zoh(sys, ts);
    const Eigen::VectorXd x_zoh = d.a * x0 + d.b * u;
    const Eigen::VectorXd x_rk4 =
        test_support::rk4_constant_input(sys.a, sys.b, x0, u, ts, 2000);
    const double rel = (x_zoh - x_rk4).norm() / (1.0 + x_rk4.norm());
    worst = std::max(worst, rel);
    if (rel <= 1e-6) ++ok;
  }
  gate.report(13, "exact discretization vs RK4 oracle", ok == 100,
              fmt("%d/100 random stable systems within 1e-6 relative "
                  "(worst %.3g)",
                  ok, worst));
}

}  // namespace

int main(int argc, char** argv) {
  std::string configs_dir = "configs";
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--configs") configs_dir = argv[i + 1];

  const auto t0 = std::chrono::steady_clock::now();
  Gate gate;
  try {
    const PlatoonFixture f = load_fixture(configs_dir);
    const ScenarioResult c1 = run_c1_steady(f);

    criterion_1_gains(gate, f);
    criterion_2_baseline(gate, c1);
    criterion_3_insecure_critical(gate, f);
    criterion_4_secured_all(gate, f);
    criterion_5_comfort(gate, f, c1);
    criterion_6_detection(gate, f);
    criterion_7_sweep(gate, f);
    criterion_8_braking(gate, f);
    criterion_9_string_stability(gate, f);
    criterion_10_stepwise(gate, f);
    int attempts = 0;
    const std::vector<BankCase> corpus = build_bank_corpus(f, attempts);
    criterion_11_bank_suite(gate, corpus, attempts);
    criterion_12_catalog(gate, f);
    criterion_13_discretization(gate);
    criterion_14_interpolation(gate, corpus);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance gate aborted: %s\n", e.what());
    return 1;
  }

  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  std::printf("%s (%.1f s)\n",
              gate.all_pass ? "all criteria passed" : "CRITERIA FAILED",
              secs);
  return gate.all_pass ? 0 : 1;
}
