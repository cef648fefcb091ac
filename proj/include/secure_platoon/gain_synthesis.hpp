#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "secure_platoon/lti.hpp"
#include "secure_platoon/rng.hpp"
#include "secure_platoon/sensor_catalog.hpp"

namespace secure_platoon {

/// Diagonal coupling matrix with a one on every state that carries a
/// marginally stable (eigenvalue one) mode. Each such eigenvalue is
/// associated with the state holding the dominant component of its
/// eigenvector; ties resolve to the lowest state index. Repeated
/// eigenvalues may map to the same state, in which case the entry is
/// simply set once.
inline Eigen::MatrixXd build_coupling_matrix(const Eigen::MatrixXd& a,
                                             double tol = 1e-6) {
  const auto n = a.rows();
  require(a.cols() == n, "build_coupling_matrix: a must be square");
  const Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  require(es.info() == Eigen::Success, "build_coupling_matrix: eigensolver failed");

  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(es.eigenvalues()(i) - 1.0) > tol) continue;
    const Eigen::VectorXcd v = es.eigenvectors().col(i);
    Eigen::Index dominant = 0;
    double best = -1.0;
    for (Eigen::Index z = 0; z < n; ++z) {
      if (std::abs(v(z)) > best) {
        best = std::abs(v(z));
        dominant = z;
      }
    }
    d(dominant, dominant) = 1.0;
  }
  return d;
}

/// Common Lyapunov certificate and per-subset observer gains.
struct GainSet {
  Eigen::MatrixXd p;               // shared Lyapunov matrix, positive definite
  std::vector<Eigen::MatrixXd> l;  // n x card(J_j) gain per catalog subset
  double margin = 0.0;             // verified relative margin, see verify_gains
};

class synthesis_error : public std::runtime_error {
 public:
  synthesis_error(const std::string& what, double best_margin)
      : std::runtime_error(what), best_margin_(best_margin) {}
  double best_margin() const { return best_margin_; }

 private:
  double best_margin_;
};

struct SynthesisOptions {
  double epsilon = 1e-6;      // required relative margin of the verified result
  int max_iterations = 3000;  // subgradient iterations per margin level
  int restarts = 4;
  std::uint64_t seed = 1;
  // Interior-margin schedule: feasibility is re-solved at increasing margins
  // and the deepest feasible point is kept, which buys contraction rate for
  // the observers beyond bare feasibility.
  std::vector<double> margin_schedule = {1e-6, 1e-3, 0.01, 0.03,
                                         0.06, 0.12, 0.2,  0.3};
};

/// Linearized stability certificate block for one closed loop f = a - l c.
/// Negative definiteness of [[-p, p f - z^T c], [(p f - z^T c)^T, -p]] is
/// equivalent (by Schur complement, p positive definite) to the quadratic
/// contraction f^T p f - p < 0 with l = p^{-1} z^T.
inline Eigen::MatrixXd schur_stability_block(const Eigen::MatrixXd& p,
                                             const Eigen::MatrixXd& f,
                                             const Eigen::MatrixXd& z,
                                             const Eigen::MatrixXd& c) {
  const auto n = p.rows();
  const Eigen::MatrixXd g = p * f - z.transpose() * c;
  Eigen::MatrixXd m(2 * n, 2 * n);
  m.topLeftCorner(n, n) = -p;
  m.topRightCorner(n, n) = g;
  m.bottomLeftCorner(n, n) = g.transpose();
  m.bottomRightCorner(n, n) = -p;
  return m;
}

/// Error dynamics of observer j stacked with the selected observer:
/// the j-th error is driven by the selected error through the coupling
/// (1 - beta) d, the selected error evolves autonomously.
inline Eigen::MatrixXd assemble_stacked_error(
    const Eigen::MatrixXd& a, const Eigen::MatrixXd& d,
    const Eigen::MatrixXd& l_j, const Eigen::MatrixXd& c_j,
    const Eigen::MatrixXd& l_sel, const Eigen::MatrixXd& c_sel, double beta) {
  const auto n = a.rows();
  require(beta >= 0.0 && beta <= 1.0, "assemble_stacked_error: beta outside [0, 1]");
  Eigen::MatrixXd stacked = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  stacked.topLeftCorner(n, n) = a - (1.0 - beta) * d - l_j * c_j;
  stacked.topRightCorner(n, n) = (1.0 - beta) * d;
  stacked.bottomRightCorner(n, n) = a - l_sel * c_sel;
  return stacked;
}

/// Per-inequality audit of a gain set. Entry 2j is the plain loop
/// a - l_j c_j, entry 2j + 1 the coupled loop a - d - l_j c_j; each value is
/// the maximum eigenvalue of f^T p f - p, all of which must be negative.
struct GainVerification {
  std::vector<double> lyapunov_max_eigs;
  double p_min_eig = 0.0;
  double p_norm = 0.0;           // spectral norm of p
  double relative_margin = 0.0;  // min over inequalities of -eig / p_norm
  bool pass = false;
};

inline GainVerification verify_gains(const Eigen::MatrixXd& a,
                                     const Eigen::MatrixXd& d,
                                     const Eigen::MatrixXd& c,
                                     const SubsetCatalog& catalog,
                                     const GainSet& gains,
                                     double epsilon = 1e-6) {
  GainVerification report;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pes(gains.p);
  report.p_min_eig = pes.eigenvalues().minCoeff();
  report.p_norm = pes.eigenvalues().cwiseAbs().maxCoeff();

  double worst = -std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < catalog.subsets.size(); ++j) {
    const Eigen::MatrixXd c_j = select_rows(c, catalog.subsets[j]);
    for (const Eigen::MatrixXd& base : {a, Eigen::MatrixXd(a - d)}) {
      const Eigen::MatrixXd f = base - gains.l[j] * c_j;
      const Eigen::MatrixXd lhs = f.transpose() * gains.p * f - gains.p;
      const double max_eig =
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(lhs).eigenvalues().maxCoeff();
      report.lyapunov_max_eigs.push_back(max_eig);
      worst = std::max(worst, max_eig);
    }
  }
  report.relative_margin = -worst / report.p_norm;
  report.pass = report.p_min_eig > 0.0 &&
                worst < -epsilon * report.p_norm;
  return report;
}

namespace detail {

// Fixed-point iteration of the one-step-predictor Riccati recursion; for a
// detectable pair it converges to a gain making a - l c Schur stable.
inline Eigen::MatrixXd riccati_observer_gain(const Eigen::MatrixXd& a,
                                             const Eigen::MatrixXd& c,
                                             int iterations = 400) {
  const auto n = a.rows();
  const auto m = c.rows();
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, m);
  for (int it = 0; it < iterations; ++it) {
    const Eigen::MatrixXd cs = c * s;
    const Eigen::MatrixXd innovation =
        cs * c.transpose() + Eigen::MatrixXd::Identity(m, m);
    l = a * s * c.transpose() * innovation.inverse();
    s = a * s * a.transpose() - l * cs * a.transpose() +
        Eigen::MatrixXd::Identity(n, n);
  }
  return l;
}

// Least-squares fit of one Lyapunov matrix to all closed loops: minimizes
// the residual of f^T p f - p = -I over symmetric p, tolerating loops the
// initial gains fail to stabilize.
inline Eigen::MatrixXd common_lyapunov_fit(const std::vector<Eigen::MatrixXd>& loops) {
  const auto n = loops.front().rows();
  const auto n2 = n * n;
  Eigen::MatrixXd lhs(static_cast<Eigen::Index>(loops.size()) * n2, n2);
  Eigen::VectorXd rhs(lhs.rows());
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  Eigen::Map<Eigen::VectorXd> vec_eye(eye.data(), n2);

  for (size_t q = 0; q < loops.size(); ++q) {
    const Eigen::MatrixXd ft = loops[q].transpose();
    // vec(f^T p f) = (f^T kron f^T) vec(p) in column-major layout.
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        lhs.block(static_cast<Eigen::Index>(q) * n2 + i * n, j * n, n, n) =
            ft(j, i) * ft;
    lhs.middleRows(static_cast<Eigen::Index>(q) * n2, n2) -=
        Eigen::MatrixXd::Identity(n2, n2);
    rhs.segment(static_cast<Eigen::Index>(q) * n2, n2) = -vec_eye;
  }

  const Eigen::VectorXd sol = lhs.colPivHouseholderQr().solve(rhs);
  Eigen::MatrixXd p(n, n);
  for (Eigen::Index j = 0; j < n; ++j) p.col(j) = sol.segment(j * n, n);
  p = 0.5 * (p + p.transpose()).eval();

  // Shift onto the p >= I floor used by the solver.
  const double min_eig =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p).eigenvalues().minCoeff();
  if (min_eig < 1.0) p += (1.0 + 1e-3 - min_eig) * Eigen::MatrixXd::Identity(n, n);
  return p;
}

struct SynthesisState {
  Eigen::MatrixXd p;
  std::vector<Eigen::MatrixXd> z;  // card(J_j) x n per subset
};

// One evaluation of the hinge objective at relative margin rho together
// with its subgradient. The objective is zero exactly when every stability
// block clears -rho lambda_max(p) and p clears the identity floor.
struct HingeEval {
  double phi = 0.0;
  Eigen::MatrixXd grad_p;
  std::vector<Eigen::MatrixXd> grad_z;
};

inline HingeEval eval_hinges(const Eigen::MatrixXd& a, const Eigen::MatrixXd& d,
                             const std::vector<Eigen::MatrixXd>& c_js,
                             const SynthesisState& state, double rho) {
  const auto n = a.rows();
  HingeEval out;
  out.grad_p = Eigen::MatrixXd::Zero(n, n);
  out.grad_z.reserve(c_js.size());
  for (const auto& z : state.z) out.grad_z.push_back(Eigen::MatrixXd::Zero(z.rows(), z.cols()));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pes(state.p);
  const double p_max = pes.eigenvalues().maxCoeff();
  const double p_min = pes.eigenvalues().minCoeff();
  const Eigen::VectorXd u_max = pes.eigenvectors().col(n - 1);
  const Eigen::VectorXd u_min = pes.eigenvectors().col(0);

  const double floor_violation = 1.0 - p_min;
  if (floor_violation > 0.0) {
    out.phi += floor_violation;
    out.grad_p -= u_min * u_min.transpose();
  }

  const Eigen::MatrixXd a_coupled = a - d;
  for (size_t j = 0; j < c_js.size(); ++j) {
    for (int coupled = 0; coupled < 2; ++coupled) {
      const Eigen::MatrixXd& f = coupled ? a_coupled : a;
      const Eigen::MatrixXd block =
          schur_stability_block(state.p, f, state.z[j], c_js[j]);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block);
      const double violation =
          es.eigenvalues().maxCoeff() + rho * p_max + 1e-12;
      if (violation <= 0.0) continue;

      out.phi += violation;
      const Eigen::VectorXd v = es.eigenvectors().col(2 * n - 1);
      const Eigen::VectorXd v1 = v.head(n);
      const Eigen::VectorXd v2 = v.tail(n);
      const Eigen::VectorXd w = f * v2;
      out.grad_p += -v1 * v1.transpose() - v2 * v2.transpose() +
                    v1 * w.transpose() + w * v1.transpose() +
                    rho * u_max * u_max.transpose();
      out.grad_z[j] += -2.0 * (c_js[j] * v2) * v1.transpose();
    }
  }
  return out;
}

// Polyak-step subgradient descent toward hinge objective zero. Returns true
// on reaching exact feasibility at margin rho; state holds the last iterate.
inline bool solve_feasibility(const Eigen::MatrixXd& a, const Eigen::MatrixXd& d,
                              const std::vector<Eigen::MatrixXd>& c_js,
                              SynthesisState& state, double rho,
                              int max_iterations) {
  for (int it = 0; it < max_iterations; ++it) {
    const HingeEval eval = eval_hinges(a, d, c_js, state, rho);
    if (eval.phi <= 0.0) return true;

    double grad_sq = eval.grad_p.squaredNorm();
    for (const auto& g : eval.grad_z) grad_sq += g.squaredNorm();
    if (!(grad_sq > 0.0) || !std::isfinite(grad_sq) || !std::isfinite(eval.phi))
      return false;

    const double step = eval.phi / grad_sq;
    state.p -= step * eval.grad_p;
    state.p = 0.5 * (state.p + state.p.transpose()).eval();
    for (size_t j = 0; j < state.z.size(); ++j) state.z[j] -= step * eval.grad_z[j];
  }
  return false;
}

}  // namespace detail

/// Finds per-subset observer gains sharing one Lyapunov matrix that
/// certifies both the plain loops a - l_j c_j and the coupled loops
/// a - d - l_j c_j. Initialized from Riccati gains plus a least-squares
/// Lyapunov fit, then driven by subgradient descent through an increasing
/// margin schedule; deterministic restarts perturb the initial gains.
/// Throws synthesis_error (carrying the best margin reached) if no iterate
/// verifies at the requested epsilon.
inline GainSet synthesize_gains(const Eigen::MatrixXd& a,
                                const Eigen::MatrixXd& c,
                                const SubsetCatalog& catalog,
                                const Eigen::MatrixXd& d,
                                const SynthesisOptions& opts = {}) {
  const auto n = a.rows();
  require(a.cols() == n, "synthesize_gains: a must be square");
  require(c.cols() == n, "synthesize_gains: c column count must match a");
  require(!catalog.subsets.empty(), "synthesize_gains: catalog is empty");
  require(opts.epsilon > 0.0, "synthesize_gains: epsilon must be positive");

  std::vector<Eigen::MatrixXd> c_js;
  for (const auto& subset : catalog.subsets) c_js.push_back(select_rows(c, subset));

  double best_failed_margin = -std::numeric_limits<double>::infinity();

  for (int restart = 0; restart <= opts.restarts; ++restart) {
    // Initial gains: Riccati observers, perturbed multiplicatively on
    // restarts; initial p: least-squares common Lyapunov fit to the loops.
    std::vector<Eigen::MatrixXd> l0;
    std::vector<Eigen::MatrixXd> loops;
    for (size_t j = 0; j < c_js.size(); ++j) {
      Eigen::MatrixXd l = detail::riccati_observer_gain(a, c_js[j]);
      if (restart > 0) {
        const double scale =
            1.0 + 0.5 * rng::uniform_pm1(opts.seed, 0x777, 16 * restart + static_cast<int>(j));
        l *= scale;
      }
      l0.push_back(l);
      loops.push_back(a - l * c_js[j]);
      loops.push_back(a - d - l * c_js[j]);
    }

    detail::SynthesisState state;
    state.p = detail::common_lyapunov_fit(loops);
    for (size_t j = 0; j < c_js.size(); ++j)
      state.z.push_back(l0[j].transpose() * state.p);

    detail::SynthesisState deepest;
    bool any_feasible = false;
    for (double rho : opts.margin_schedule) {
      if (!detail::solve_feasibility(a, d, c_js, state, rho, opts.max_iterations))
        break;
      deepest = state;
      any_feasible = true;
    }
    if (!any_feasible) continue;

    GainSet candidate;
    candidate.p = deepest.p;
    const Eigen::LLT<Eigen::MatrixXd> llt(deepest.p);
    if (llt.info() != Eigen::Success) continue;
    for (size_t j = 0; j < c_js.size(); ++j)
      candidate.l.push_back(llt.solve(deepest.z[j].transpose()));

    const GainVerification check =
        verify_gains(a, d, c, catalog, candidate, opts.epsilon);
    candidate.margin = check.relative_margin;
    if (check.pass) return candidate;
    best_failed_margin = std::max(best_failed_margin, check.relative_margin);
  }

  throw synthesis_error(
      "synthesize_gains: no common Lyapunov certificate found at requested margin",
      best_failed_margin);
}

}  // namespace secure_platoon
