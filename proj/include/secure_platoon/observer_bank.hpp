#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "secure_platoon/gain_synthesis.hpp"
#include "secure_platoon/lti.hpp"
#include "secure_platoon/sensor_catalog.hpp"

namespace secure_platoon {

/// Second-order low-pass that turns a residual norm into the smoothed
/// indicator eta (first state component). Unit DC gain: a constant residual
/// norm r settles eta at exactly r.
struct ReferenceModel {
  Eigen::Matrix2d a;
  Eigen::Vector2d b;
};

/// Critically damped pole pair (lambda1, lambda2) mapped to the
/// position-velocity form dx = [[0, 1], [-k_r, -c_r]] x + [0, k_r] u.
/// Both poles must be strictly negative and distinct.
struct ReferenceParams {
  double k_r = 0.0;
  double c_r = 0.0;
};

inline ReferenceParams design_reference_params(double lambda1, double lambda2) {
  require(lambda1 < 0.0 && lambda2 < 0.0,
          "design_reference_params: poles must be strictly negative");
  require(lambda1 != lambda2, "design_reference_params: poles must be distinct");
  return ReferenceParams{lambda1 * lambda2, -(lambda1 + lambda2)};
}

inline ReferenceModel make_reference_model(const ReferenceParams& params,
                                           double ts) {
  ContinuousLti sys;
  sys.a = (Eigen::MatrixXd(2, 2) << 0.0, 1.0, -params.k_r, -params.c_r).finished();
  sys.b = (Eigen::MatrixXd(2, 1) << 0.0, params.k_r).finished();
  const DiscreteLti d = discretize_zoh(sys, ts);
  return ReferenceModel{d.a, d.b};
}

/// Maps per-observer indicators to reliability ratios. beta_eta compares
/// each regularized indicator against the group total; beta squashes the
/// distance from the balanced point 1 - 1/N into (0, 1). When the total is
/// numerically zero every observer sits exactly at the balanced point.
struct Reliability {
  Eigen::VectorXd beta_eta;
  Eigen::VectorXd beta;
};

inline Reliability classify_reliability(const Eigen::VectorXd& eta,
                                        double bound_regularizer,
                                        double a_beta) {
  const auto n = eta.size();
  require(n > 0, "classify_reliability: eta must be non-empty");
  Reliability out;
  out.beta_eta.resize(n);
  out.beta.resize(n);

  const double balanced = 1.0 - 1.0 / static_cast<double>(n);
  const double den = eta.sum() + static_cast<double>(n) * bound_regularizer;
  if (den < 1e-15) {
    out.beta_eta.setConstant(balanced);
  } else {
    for (Eigen::Index j = 0; j < n; ++j)
      out.beta_eta(j) = 1.0 - (eta(j) + bound_regularizer) / den;
  }
  for (Eigen::Index j = 0; j < n; ++j)
    out.beta(j) =
        std::atan((out.beta_eta(j) - balanced) * a_beta) / M_PI + 0.5;
  return out;
}

/// Immutable description of the observer bank: one observer per catalog
/// subset, all sharing the coupling matrix d and feeding the selected
/// estimate back to the stragglers.
struct ObserverBank {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  Eigen::MatrixXd c;
  Eigen::MatrixXd d;
  std::vector<Eigen::MatrixXd> c_j;
  std::vector<Eigen::MatrixXd> l;
  ReferenceModel ref;
  SubsetCatalog catalog;
  double a_beta = 1000.0;
  double beta_init = 0.5;
  double bound_regularizer = 0.0;  // noise_bound_w + noise_bound_gamma
};

inline ObserverBank make_observer_bank(const DiscretePlant& plant,
                                       const SubsetCatalog& catalog,
                                       const GainSet& gains,
                                       const ReferenceModel& ref,
                                       double a_beta = 1000.0,
                                       double beta_init = 0.5) {
  require(gains.l.size() == catalog.subsets.size(),
          "make_observer_bank: one gain per catalog subset required");
  ObserverBank bank;
  bank.a = plant.a;
  bank.b = plant.b;
  bank.c = plant.c;
  bank.d = build_coupling_matrix(plant.a);
  bank.l = gains.l;
  bank.ref = ref;
  bank.catalog = catalog;
  bank.a_beta = a_beta;
  bank.beta_init = beta_init;
  bank.bound_regularizer = plant.noise_bound_w + plant.noise_bound_gamma;
  for (const auto& subset : catalog.subsets)
    bank.c_j.push_back(select_rows(plant.c, subset));
  for (size_t j = 0; j < bank.l.size(); ++j)
    require(bank.l[j].rows() == plant.a.rows() &&
                bank.l[j].cols() == bank.c_j[j].rows(),
            "make_observer_bank: gain dimensions must match subset rows");
  return bank;
}

struct BankState {
  std::vector<Eigen::VectorXd> x_hat;
  std::vector<Eigen::Vector2d> x_ref;
  Eigen::VectorXd eta;       // first reference state per observer
  Eigen::VectorXd beta_eta;
  Eigen::VectorXd beta;
  int selected = 0;
  Eigen::VectorXd x_bar;

  // Step scratch, sized once at init so the hot loop never allocates.
  std::vector<Eigen::VectorXd> residual;
  Eigen::VectorXd next_state;
  Eigen::VectorXd coupling;
};

inline BankState make_bank_state(const ObserverBank& bank,
                                 const std::vector<Eigen::VectorXd>& x_hat0) {
  const auto n_obs = bank.catalog.subsets.size();
  require(x_hat0.size() == n_obs,
          "make_bank_state: one initial estimate per observer required");
  BankState state;
  state.x_hat = x_hat0;
  for (const auto& x : state.x_hat)
    require(x.size() == bank.a.rows(), "make_bank_state: estimate size mismatch");

  state.x_ref.assign(n_obs, Eigen::Vector2d::Zero());
  state.eta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_obs));
  state.beta_eta = Eigen::VectorXd::Constant(
      static_cast<Eigen::Index>(n_obs), 1.0 - 1.0 / static_cast<double>(n_obs));
  state.beta = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_obs),
                                         bank.beta_init);
  state.selected = 0;
  state.x_bar = state.x_hat[0];

  for (const auto& c_j : bank.c_j)
    state.residual.push_back(Eigen::VectorXd::Zero(c_j.rows()));
  state.next_state = Eigen::VectorXd::Zero(bank.a.rows());
  state.coupling = Eigen::VectorXd::Zero(bank.a.rows());
  return state;
}

/// One bank update. Order is load-bearing:
///   1. residuals from the current estimates,
///   2. observer states advance using the previous selection and previous
///      reliability ratios,
///   3. reference models ingest the residual norms,
///   4-5. reliability ratios recompute from the new indicators,
///   6. the highest ratio (lowest index on ties) becomes the selection.
inline void step_bank(const ObserverBank& bank, BankState& state,
                      const Eigen::VectorXd& y, const Eigen::VectorXd& u) {
  require(y.size() == bank.c.rows(), "step_bank: measurement size mismatch");
  require(u.size() == bank.b.cols(), "step_bank: input size mismatch");
  const auto n_obs = state.x_hat.size();

  for (size_t j = 0; j < n_obs; ++j) {
    auto& r = state.residual[j];
    const auto& subset = bank.catalog.subsets[j];
    for (size_t i = 0; i < subset.size(); ++i) r(static_cast<Eigen::Index>(i)) = y(subset[i]);
    r.noalias() -= bank.c_j[j] * state.x_hat[j];
  }

  for (size_t j = 0; j < n_obs; ++j) {
    state.next_state.noalias() = bank.a * state.x_hat[j];
    state.next_state.noalias() += bank.b * u;
    state.next_state.noalias() += bank.l[j] * state.residual[j];
    state.coupling = state.x_bar - state.x_hat[j];
    state.next_state.noalias() +=
        (1.0 - state.beta(static_cast<Eigen::Index>(j))) * (bank.d * state.coupling);
    state.x_hat[j] = state.next_state;
  }

  for (size_t j = 0; j < n_obs; ++j) {
    auto& xr = state.x_ref[j];
    xr = bank.ref.a * xr + bank.ref.b * state.residual[j].norm();
    state.eta(static_cast<Eigen::Index>(j)) = xr(0);
  }

  const Reliability rel =
      classify_reliability(state.eta, bank.bound_regularizer, bank.a_beta);
  state.beta_eta = rel.beta_eta;
  state.beta = rel.beta;

  int best = 0;
  for (Eigen::Index j = 1; j < state.beta.size(); ++j)
    if (state.beta(j) > state.beta(best)) best = static_cast<int>(j);
  state.selected = best;
  state.x_bar = state.x_hat[static_cast<size_t>(best)];
}

}  // namespace secure_platoon
