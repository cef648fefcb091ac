#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "secure_platoon/lti.hpp"

namespace secure_platoon {

/// Constant-time-headway CACC follower parameters. The spacing target is
/// standstill + h v, so the tracked error state is e = d - standstill - h v.
struct CaccParams {
  double ts = 0.1;   // sample period, seconds
  double h = 0.5;    // time headway, seconds
  double tau = 0.1;  // driveline lag, seconds
  double kp = 0.2;
  double kd = 0.7;
  double kdd = 0.5;
  double standstill = 1.0;  // gap at zero speed, meters
  double noise_bound_w = 0.0;
  double noise_bound_gamma = 1e-3;
};

/// Follower error dynamics sampled at ts. State [e, v, a, dv, a_lead];
/// inputs [preceding-vehicle command, own command]. Nine sensors: three
/// spacing-error, three velocity (redundant triples), plus acceleration,
/// closing speed, and preceding-vehicle acceleration.
inline DiscretePlant build_closed_loop(const CaccParams& p) {
  require(p.ts > 0.0 && p.h > 0.0 && p.tau > 0.0,
          "build_closed_loop: ts, h, tau must be positive");
  ContinuousLti sys;
  sys.a = (Eigen::MatrixXd(5, 5) <<
           0, 0, -p.h, 1, 0,
           0, 0, 1, 0, 0,
           0, 0, -1 / p.tau, 0, 0,
           0, 0, -1, 0, 1,
           0, 0, 0, 0, -1 / p.tau).finished();
  sys.b = Eigen::MatrixXd::Zero(5, 2);
  sys.b(4, 0) = 1 / p.tau;
  sys.b(2, 1) = 1 / p.tau;
  const DiscreteLti d = discretize_zoh(sys, p.ts);

  DiscretePlant plant;
  plant.a = d.a;
  plant.b = d.b;
  plant.c = Eigen::MatrixXd::Zero(9, 5);
  plant.c(0, 0) = 1;  // spacing error (converted from distance reading)
  plant.c(1, 1) = 1;  // velocity
  plant.c(2, 2) = 1;  // acceleration
  plant.c(3, 3) = 1;  // closing speed
  plant.c(4, 4) = 1;  // preceding-vehicle acceleration
  plant.c(5, 0) = 1;
  plant.c(6, 1) = 1;
  plant.c(7, 0) = 1;
  plant.c(8, 1) = 1;
  plant.noise_bound_w = p.noise_bound_w;
  plant.noise_bound_gamma = p.noise_bound_gamma;
  plant.ts = p.ts;
  return plant;
}

/// Distance to the preceding vehicle implied by the error state.
inline double spacing_distance(const CaccParams& p, const Eigen::VectorXd& x) {
  return x(0) + p.standstill + p.h * x(1);
}

/// Desired-acceleration setpoint from the state estimate, the current own
/// command, and the received preceding-vehicle command (feedforward).
inline double controller_setpoint(const CaccParams& p,
                                  const Eigen::VectorXd& estimate,
                                  double u_own, double u_preceding) {
  require(estimate.size() == 5, "controller_setpoint: estimate must have 5 states");
  return p.kp * estimate(0) + p.kd * (estimate(3) - p.h * estimate(2)) +
         p.kdd * (estimate(4) + (p.h / p.tau - 1.0) * estimate(2) -
                  (p.h / p.tau) * u_own) +
         u_preceding;
}

/// First-order command filter with time constant h.
inline double step_controller(const CaccParams& p, double u_own,
                              double setpoint) {
  const double alpha = std::exp(-p.ts / p.h);
  return alpha * u_own + (1.0 - alpha) * setpoint;
}

/// Estimate used without the secured bank: redundant sensor triples are
/// averaged, singleton sensors pass through.
inline Eigen::VectorXd sensor_average_fallback(const Eigen::VectorXd& y) {
  require(y.size() == 9, "sensor_average_fallback: nine sensors expected");
  Eigen::VectorXd est(5);
  est(0) = (y(0) + y(5) + y(7)) / 3.0;
  est(1) = (y(1) + y(6) + y(8)) / 3.0;
  est(2) = y(2);
  est(3) = y(3);
  est(4) = y(4);
  return est;
}

/// Lead-vehicle command profile. The pulse mode plays the decaying
/// acceleration command; the braking mode keeps the pulse until the first
/// event, then runs a saturated proportional speed tracker through
/// brake / hold / recover cycles. The command is rate limited: the sampled
/// feedforward cancellation leaves a spacing-error residue proportional to
/// the per-step command change, so an unlimited step at a brake edge would
/// punch a transient into the whole chain that no controller can remove.
struct LeadProfile {
  double pulse_amplitude = 2.0;
  double pulse_rate = 0.01;      // exponential decay per step
  std::vector<int> brake_steps;  // cycle start steps, ascending; empty = pulse only
  int hold_steps = 1000;
  double brake_speed = 30.0;
  double recover_speed = 50.4;
  double tracking_gain = 0.1;  // 1/s
  double max_command = 6.0;    // m/s^2
  double max_rate = 0.2;       // m/s^3
};

inline double lead_command(const LeadProfile& prof, int k, double v_lead,
                           double previous, double ts) {
  if (prof.brake_steps.empty() || k < prof.brake_steps.front())
    return prof.pulse_amplitude * std::exp(-prof.pulse_rate * k);

  double v_ref = prof.recover_speed;
  for (int start : prof.brake_steps)
    if (k >= start && k < start + prof.hold_steps) v_ref = prof.brake_speed;
  const double want = std::clamp(prof.tracking_gain * (v_ref - v_lead),
                                 -prof.max_command, prof.max_command);
  const double step = prof.max_rate * ts;
  return std::clamp(want, previous - step, previous + step);
}

/// Standalone lead kinematics [v, a] driven by the command; exact
/// discretization of dv = a, da = (u - a) / tau.
struct LeadModel {
  Eigen::Matrix2d a;
  Eigen::Vector2d b;
};

inline LeadModel make_lead_model(const CaccParams& p) {
  ContinuousLti sys;
  sys.a = (Eigen::MatrixXd(2, 2) << 0.0, 1.0, 0.0, -1.0 / p.tau).finished();
  sys.b = (Eigen::MatrixXd(2, 1) << 0.0, 1.0 / p.tau).finished();
  const DiscreteLti d = discretize_zoh(sys, p.ts);
  return LeadModel{d.a, d.b};
}

}  // namespace secure_platoon
