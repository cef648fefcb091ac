#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <complex>
#include <vector>

#include "secure_platoon/lti.hpp"

namespace secure_platoon {

/// Minimal family of detectable sensor subsets. Subsets hold 0-based sensor
/// indices in ascending order; the family is ordered by (cardinality,
/// lexicographic) and forms an antichain: no member contains another.
struct SubsetCatalog {
  std::vector<std::vector<int>> subsets;
  int sensor_count = 0;
  int max_cardinality = 0;
  // Largest number of simultaneously attacked sensors the family can be
  // asked to tolerate while staying below half the sensor count. The
  // operational guarantee of a concrete deployment is max_cardinality
  // attacked subsets of that size; both numbers are reported.
  int q_tolerable = 0;
};

inline Eigen::MatrixXd select_rows(const Eigen::MatrixXd& c,
                                   const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), c.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = c.row(rows[i]);
  return out;
}

/// Discrete-time PBH detectability test: for every eigenvalue of a on or
/// outside the unit circle, the stacked matrix [lambda I - a; c] must have
/// full column rank. Rank is counted from singular values above a relative
/// threshold; the unit-circle test carries a small slack so eigenvalue
/// clusters split by roundoff (defective marginal modes) stay included.
inline bool is_detectable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c,
                          double rank_tol = 1e-9) {
  const auto n = a.rows();
  require(a.cols() == n, "is_detectable: a must be square");
  require(c.cols() == n, "is_detectable: c column count must match a");
  constexpr double kMarginalSlack = 1e-6;

  const Eigen::VectorXcd eigs = a.eigenvalues();
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lambda = eigs(i);
    if (std::abs(lambda) < 1.0 - kMarginalSlack) continue;

    Eigen::MatrixXcd stacked(n + c.rows(), n);
    stacked.topRows(n) =
        lambda * Eigen::MatrixXcd::Identity(n, n) - a.cast<std::complex<double>>();
    stacked.bottomRows(c.rows()) = c.cast<std::complex<double>>();

    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stacked);
    const Eigen::VectorXd sv = svd.singularValues();
    const double thresh = rank_tol * sv(0);
    Eigen::Index rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
      if (sv(k) > thresh) ++rank;
    if (rank < n) return false;
  }
  return true;
}

namespace detail {

// Emits non-empty subsets of {0..p-1} ascending by (cardinality, lex) and
// stops early once the visitor returns false.
template <typename Visitor>
void for_each_subset(int p, Visitor&& visit) {
  for (int card = 1; card <= p; ++card) {
    std::vector<int> combo(card);
    for (int i = 0; i < card; ++i) combo[i] = i;
    while (true) {
      if (!visit(combo)) return;
      int i = card - 1;
      while (i >= 0 && combo[i] == p - card + i) --i;
      if (i < 0) break;
      ++combo[i];
      for (int j = i + 1; j < card; ++j) combo[j] = combo[j - 1] + 1;
    }
  }
}

inline bool contains_subset(const std::vector<int>& sorted_super,
                            const std::vector<int>& sorted_sub) {
  return std::includes(sorted_super.begin(), sorted_super.end(),
                       sorted_sub.begin(), sorted_sub.end());
}

}  // namespace detail

/// Builds the minimal family of detectable sensor subsets for (a, c):
/// every detectable subset that does not contain an already-kept smaller
/// detectable subset. Enumeration order makes the family an antichain and
/// reproducible byte for byte.
inline SubsetCatalog build_catalog(const Eigen::MatrixXd& a,
                                   const Eigen::MatrixXd& c,
                                   double rank_tol = 1e-9) {
  require(c.cols() == a.rows(), "build_catalog: c column count must match a");
  const int p = static_cast<int>(c.rows());
  require(p >= 1, "build_catalog: need at least one sensor");

  SubsetCatalog catalog;
  catalog.sensor_count = p;
  detail::for_each_subset(p, [&](const std::vector<int>& combo) {
    for (const auto& kept : catalog.subsets)
      if (detail::contains_subset(combo, kept)) return true;
    if (is_detectable(a, select_rows(c, combo), rank_tol))
      catalog.subsets.push_back(combo);
    return true;
  });

  require(!catalog.subsets.empty(), "build_catalog: no detectable sensor subset");
  for (const auto& s : catalog.subsets)
    catalog.max_cardinality =
        std::max(catalog.max_cardinality, static_cast<int>(s.size()));
  catalog.q_tolerable = (p - 1) / 2;
  return catalog;
}

/// True when the subset shares no sensor with the attacked set.
inline bool subset_clean(const std::vector<int>& subset,
                         const std::vector<int>& attacked_sorted) {
  for (int s : subset)
    if (std::binary_search(attacked_sorted.begin(), attacked_sorted.end(), s))
      return false;
  return true;
}

}  // namespace secure_platoon
