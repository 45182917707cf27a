#ifndef HETVR_ADVERSARIAL_HPP
#define HETVR_ADVERSARIAL_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "hetvr/problems.hpp"

namespace hetvr {

/// y = A x for the leading d x d minor of the infinite tridiagonal chain
/// matrix (2 on the diagonal, -1 off it). The last row is (..., -1, 2).
void tridiag_apply(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out);
Vector tridiag_apply(const Eigen::Ref<const Vector>& x);

/// (sqrt(k) - 1) / (sqrt(k) + 1).
double chain_ratio(double kappa);

/// Target for |grad F(x*)| when the block length is picked automatically.
inline constexpr double kOptimalityResidual = 1e-9;

/// Smallest d >= 1 with q^(2d) < tol.
Index truncation_dimension(double q, double tol = 1e-16);

/// g(x) = ((L - mu)/8)(x'Ax - 2 gamma x_1) + (mu/2)|x|^2 on R^d.
class ChainQuadratic {
 public:
  ChainQuadratic(Index d, double smoothness, double strong_convexity, double gamma = 1.0);

  Index dimension() const { return d_; }
  double kappa() const { return l_ / mu_; }
  double q() const { return q_; }
  double gamma() const { return gamma_; }

  double value(const Eigen::Ref<const Vector>& x) const;
  void gradient(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) const;
  /// gamma (q, q^2, ..., q^d).
  Vector optimum() const;

 private:
  Index d_;
  double l_;
  double mu_;
  double gamma_;
  double q_;
};

/// Separable finite-sum lower-bound family. Component i acts on the i-th
/// coordinate block of length d:
///   g_i(x) = ((L_i - mu_i)/8)(x_i'A x_i - 2 gamma_i x_i1) + (mu_i/2)|x|^2
/// with nu_i = (L_i - mu_i)/mu + 1, q_i = chain_ratio(nu_i) and
/// gamma_i = sqrt(1 - q_i^2)/q_i, so that |x_i^0 - x_i*| = 1 from the origin.
class FiniteSumAdversarialInstance final : public FiniteSumProblem {
 public:
  FiniteSumAdversarialInstance(std::vector<double> smoothness, std::vector<double> strong_convexity,
                               Index d);

  Index num_components() const override { return l_.size(); }
  Index dimension() const override { return l_.size() * d_; }
  double component_value(Index i, const Vector& x) const override;
  void component_gradient(Index i, const Vector& x, Eigen::Ref<Vector> out) const override;
  ComponentSpec component_spec(Index i) const override { return {l_[i], mu_[i]}; }
  std::string family() const override { return "adversarial_chain"; }
  std::optional<Vector> known_optimum() const override;

  Index block_length() const { return d_; }
  double mu_total() const { return mu_total_; }
  double nu(Index i) const { return nu_[i]; }
  double q(Index i) const { return q_[i]; }
  double gamma(Index i) const { return gamma_[i]; }
  Eigen::Ref<const Vector> block(const Vector& x, Index i) const;

 private:
  std::vector<double> l_;
  std::vector<double> mu_;
  std::vector<double> nu_;
  std::vector<double> q_;
  std::vector<double> gamma_;
  double mu_total_;
  Index d_;
};

/// x*_ij = gamma_i q_i^j, j = 1..d, stacked by block.
Vector closed_form_optimum(const FiniteSumAdversarialInstance& instance);

/// Checks L_i - mu_i > mu/m for every i (naming the first offender). When
/// d == 0, d starts at the smallest length with q_max^(2d) < tol and grows
/// until |grad F(x*)| <= kOptimalityResidual.
FiniteSumAdversarialInstance build_finite_sum_instance(std::span<const double> smoothness,
                                                       std::span<const double> strong_convexity,
                                                       Index d = 0, double tol = 1e-16);

/// Paired lower-bound family for the constrained separable model
///   min sum_i g_i(p_i) s.t. sum_i p_i = 0.
/// Each p_i has floor(m/2) blocks of length d. Pair k (components 2k, 2k+1
/// in 0-based numbering) acts on block k with opposite linear terms:
///   g_2k   = c_k (mu_2k/mu_2k+1)(p'Ap - 2 gamma_k p_1) + (mu_2k/2)|p|^2
///   g_2k+1 = c_k                 (p'Ap + 2 gamma_k p_1) + (mu_2k+1/2)|p|^2
/// with c_k = (L_2k+1 - mu_2k+1)/8, q_k = chain_ratio(L_2k+1/mu_2k+1) and
/// gamma_k = sqrt(1 - q_k^2)/q_k * sqrt(2/mu_2k+1). A trailing odd
/// component is (mu_m/2)|p|^2. The optima of the individual g_i cancel, so
/// they solve the constrained problem.
///
/// The first member of a pair inherits the second's condition number; its
/// smoothness constant is mu_2k * kappa_k regardless of the supplied L_2k.
class DualAdversarialInstance final : public FiniteSumProblem {
 public:
  DualAdversarialInstance(std::vector<double> smoothness, std::vector<double> strong_convexity,
                          Index d);

  Index num_components() const override { return mu_.size(); }
  /// Dimension of one p_i.
  Index dimension() const override { return pairs() * d_; }
  double component_value(Index i, const Vector& p) const override;
  void component_gradient(Index i, const Vector& p, Eigen::Ref<Vector> out) const override;
  ComponentSpec component_spec(Index i) const override { return {l_[i], mu_[i]}; }
  std::string family() const override { return "adversarial_dual_pairs"; }

  Index pairs() const { return mu_.size() / 2; }
  Index block_length() const { return d_; }
  double q(Index k) const { return q_[k]; }
  double gamma(Index k) const { return gamma_[k]; }
  /// Column i is p_i*.
  Matrix optimum_blocks() const;
  double optimal_value() const;

 private:
  std::vector<double> l_;
  std::vector<double> mu_;
  std::vector<double> q_;
  std::vector<double> gamma_;
  Index d_;
};

/// Requires kappa_2k+1 > 1 for every pair. Automatic d as for the
/// finite-sum family, on max_i |grad g_i(p_i*)|.
DualAdversarialInstance build_dual_instance(std::span<const double> smoothness,
                                            std::span<const double> strong_convexity,
                                            Index d = 0, double tol = 1e-16);

/// 1-based index of the last entry with |entry| > tol, or 0.
Index prefix_nonzero(const Eigen::Ref<const Vector>& x, double tol = 0.0);

struct BlockAudit {
  Index block = 0;
  std::uint64_t queries = 0;
  Index support = 0;
  double floor = 0.0;
  bool zero_chain_violation = false;
};

struct LowerBoundReport {
  std::vector<BlockAudit> blocks;
  double gap = 0.0;
  /// max_j of the per-block floors (finite-sum family) or their sum (pairs).
  double floor = 0.0;
  bool floor_respected = true;
  bool zero_chain_respected = true;
  /// Least total query count any span-respecting method needs to reach the
  /// observed gap, from inverting the per-block floors.
  double required_queries = 0.0;
  std::uint64_t total_queries = 0;
};

/// Floors (mu/2) q_j^(2 K_j) with K_j the per-component query counts.
LowerBoundReport audit_lower_bound(const FiniteSumAdversarialInstance& instance,
                                   std::span<const std::uint64_t> queries, const Vector& x,
                                   double slack = 1e-12);

/// Floors q_k^(2 K_k) with K_k the queries to both members of pair k.
LowerBoundReport audit_lower_bound(const DualAdversarialInstance& instance,
                                   std::span<const std::uint64_t> queries, const Matrix& p,
                                   double slack = 1e-12);

}  // namespace hetvr

#endif  // HETVR_ADVERSARIAL_HPP
