#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "secure_platoon/lti.hpp"
#include "secure_platoon/rng.hpp"

namespace secure_platoon {

// Stream ids keep measurement noise and attack injection decorrelated under
// a shared scenario seed.
namespace rng {
inline std::uint64_t gamma_stream(int sensor) { return 0x100u + static_cast<std::uint64_t>(sensor); }
inline std::uint64_t delta_stream(int sensor) { return 0x200u + static_cast<std::uint64_t>(sensor); }
}  // namespace rng

enum class AttackKind { kWhite, kStep };

/// One injection campaign: additive signal on the target sensors over the
/// step window [start, stop). A gated campaign follows a one-second on-off
/// square wave; it still counts as scheduled while the gate is off.
struct AttackSpec {
  std::vector<int> targets;
  int start = 0;
  int stop = 0;
  AttackKind kind = AttackKind::kWhite;
  bool gated = false;
  double rms = 0.0;
};

struct StepInterval {
  int start = 0;
  int stop = 0;  // half-open [start, stop)
  bool contains(int k) const { return k >= start && k < stop; }
};

struct AttackTimeline {
  std::vector<AttackSpec> specs;
  std::vector<StepInterval> noise_windows;
  double noise_bound = 0.0;  // |gamma_i| bound inside noise windows
  double ts = 0.1;
};

/// Gate of the on-off attacks: active during odd wall-clock seconds.
inline bool onoff_gate_active(int k, double ts) {
  return static_cast<long long>(std::floor(k * ts)) % 2 != 0;
}

inline bool attack_scheduled(const AttackSpec& spec, int k) {
  return k >= spec.start && k < spec.stop;
}

inline bool attack_effective(const AttackSpec& spec, int k, double ts) {
  return attack_scheduled(spec, k) && (!spec.gated || onoff_gate_active(k, ts));
}

/// Attack value injected on one target sensor at step k. White draws are
/// uniform on [-sqrt(3) rms, sqrt(3) rms] so their RMS equals spec.rms;
/// step attacks hold the constant rms.
inline double sample_attack(const AttackSpec& spec, int sensor, int k,
                            std::uint64_t seed, double ts) {
  if (!attack_effective(spec, k, ts)) return 0.0;
  if (spec.kind == AttackKind::kStep) return spec.rms;
  return std::sqrt(3.0) * spec.rms *
         rng::uniform_pm1(seed, rng::delta_stream(sensor), static_cast<std::uint64_t>(k));
}

/// Disturbances of one step: measurement noise, attack injection, the
/// scheduled attacked-sensor set, and whether the step falls in the grace
/// window after an attack edge.
struct StepDisturbance {
  Eigen::VectorXd gamma;
  Eigen::VectorXd delta;
  std::vector<int> attacked;  // scheduled targets, sorted, gate ignored
  bool noise_active = false;
  bool in_grace = false;
};

namespace detail {

inline bool noise_on(const AttackTimeline& tl, int k) {
  if (k < 0) return false;
  for (const auto& w : tl.noise_windows)
    if (w.contains(k)) return true;
  return false;
}

// Signature of scheduled and effective activity used for edge detection.
inline std::uint64_t activity_signature(const AttackTimeline& tl, int k) {
  if (k < 0) return 0;
  std::uint64_t sig = 0;
  for (size_t i = 0; i < tl.specs.size(); ++i) {
    if (attack_scheduled(tl.specs[i], k)) sig |= 1ULL << (2 * i);
    if (attack_effective(tl.specs[i], k, tl.ts)) sig |= 1ULL << (2 * i + 1);
  }
  return sig;
}

}  // namespace detail

/// True within two steps after any attack schedule or gate edge. Detection
/// needs a couple of steps to react, so reliability bookkeeping excuses
/// these steps instead of counting them as misclassification.
inline bool in_transition_grace(const AttackTimeline& tl, int k) {
  const std::uint64_t now = detail::activity_signature(tl, k);
  const std::uint64_t prev = detail::activity_signature(tl, k - 1);
  const std::uint64_t prev2 = detail::activity_signature(tl, k - 2);
  return now != prev || prev != prev2;
}

inline StepDisturbance apply_timeline(const AttackTimeline& tl, int k,
                                      std::uint64_t seed, int sensor_count) {
  require(sensor_count > 0, "apply_timeline: sensor_count must be positive");
  StepDisturbance out;
  out.gamma = Eigen::VectorXd::Zero(sensor_count);
  out.delta = Eigen::VectorXd::Zero(sensor_count);

  out.noise_active = detail::noise_on(tl, k);
  if (out.noise_active && tl.noise_bound > 0.0) {
    for (int i = 0; i < sensor_count; ++i)
      out.gamma(i) = tl.noise_bound *
                     rng::uniform_pm1(seed, rng::gamma_stream(i), static_cast<std::uint64_t>(k));
  }

  for (const auto& spec : tl.specs) {
    if (!attack_scheduled(spec, k)) continue;
    for (int sensor : spec.targets) {
      require(sensor >= 0 && sensor < sensor_count,
              "apply_timeline: attack target out of range");
      out.delta(sensor) += sample_attack(spec, sensor, k, seed, tl.ts);
      out.attacked.push_back(sensor);
    }
  }
  std::sort(out.attacked.begin(), out.attacked.end());
  out.attacked.erase(std::unique(out.attacked.begin(), out.attacked.end()),
                     out.attacked.end());

  out.in_grace = in_transition_grace(tl, k);
  return out;
}

}  // namespace secure_platoon
