#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <stdexcept>
#include <utility>

namespace secure_platoon {

inline void require(bool condition, const char* what) {
  if (!condition) throw std::invalid_argument(what);
}

/// Continuous-time pair dx/dt = a x + b u.
struct ContinuousLti {
  Eigen::MatrixXd a;  // n x n
  Eigen::MatrixXd b;  // n x m
};

/// Discrete-time pair x(k+1) = a x(k) + b u(k).
struct DiscreteLti {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
};

/// Sampled plant with measurement map y = c x + gamma + delta and
/// componentwise disturbance bounds |w_i| <= noise_bound_w,
/// |gamma_i| <= noise_bound_gamma.
struct DiscretePlant {
  Eigen::MatrixXd a;  // n x n
  Eigen::MatrixXd b;  // n x m
  Eigen::MatrixXd c;  // p x n
  double noise_bound_w = 0.0;
  double noise_bound_gamma = 0.0;
  double ts = 0.0;  // sample period, seconds
};

/// Exact zero-order-hold discretization.
///
/// Computes exp([[a, b], [0, 0]] ts) in one matrix exponential; the top
/// blocks of the result are the discrete a and b. Exact for piecewise
/// constant inputs, no series truncation beyond the exponential itself.
inline DiscreteLti discretize_zoh(const ContinuousLti& sys, double ts) {
  const auto n = sys.a.rows();
  const auto m = sys.b.cols();
  require(sys.a.cols() == n, "discretize_zoh: a must be square");
  require(sys.b.rows() == n, "discretize_zoh: a and b row counts differ");
  require(ts > 0.0, "discretize_zoh: ts must be positive");

  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = sys.a;
  aug.topRightCorner(n, m) = sys.b;
  const Eigen::MatrixXd phi = (aug * ts).exp();
  return DiscreteLti{phi.topLeftCorner(n, n), phi.topRightCorner(n, m)};
}

/// One step of x(k+1) = a x(k) + b u(k) + w(k).
inline Eigen::VectorXd step_plant(const DiscretePlant& plant,
                                  const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& w) {
  require(x.size() == plant.a.rows(), "step_plant: state size mismatch");
  require(u.size() == plant.b.cols(), "step_plant: input size mismatch");
  require(w.size() == x.size(), "step_plant: disturbance size mismatch");
  return plant.a * x + plant.b * u + w;
}

inline Eigen::VectorXd step_plant(const DiscretePlant& plant,
                                  const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u) {
  return step_plant(plant, x, u, Eigen::VectorXd::Zero(x.size()));
}

inline double spectral_radius(const Eigen::MatrixXd& a) {
  require(a.rows() == a.cols(), "spectral_radius: matrix must be square");
  return a.eigenvalues().cwiseAbs().maxCoeff();
}

inline bool is_schur_stable(const Eigen::MatrixXd& a) {
  return spectral_radius(a) < 1.0;
}

}  // namespace secure_platoon
