#ifndef HETVR_DUAL_HPP
#define HETVR_DUAL_HPP

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "hetvr/solvers.hpp"

namespace hetvr {

/// f_i(y_i) = 0.5 y_i'P_i y_i + a_i'y_i with coupling A_i (rows = size of b).
struct QuadraticBlock {
  Matrix hessian;
  Vector linear;
  Matrix coupling;
};

/// min sum_i f_i(y_i)  s.t.  sum_i A_i y_i = b.
class MultiBlockProblem {
 public:
  MultiBlockProblem(std::vector<QuadraticBlock> blocks, Vector rhs);

  Index num_blocks() const { return blocks_.size(); }
  const QuadraticBlock& block(Index i) const { return blocks_[i]; }
  const Vector& rhs() const { return rhs_; }
  /// Size of the dual variable (rows of every A_i).
  Index dual_dimension() const { return static_cast<Index>(rhs_.size()); }
  /// lambda_min(P_i) and lambda_max(P_i).
  double strong_convexity(Index i) const { return mu_[i]; }
  double smoothness(Index i) const { return l_[i]; }
  bool strongly_convex() const;

  double objective(const std::vector<Vector>& y) const;
  /// |sum_i A_i y_i - b|.
  double infeasibility(const std::vector<Vector>& y) const;

 private:
  std::vector<QuadraticBlock> blocks_;
  Vector rhs_;
  std::vector<double> mu_;
  std::vector<double> l_;
};

/// Closed-form conjugate of one quadratic block:
///   f*(p) = 0.5 (p - a)'P^{-1}(p - a),  grad f*(p) = P^{-1}(p - a).
/// The factorization is built once; a singular P is rejected.
class ConjugateOracle {
 public:
  explicit ConjugateOracle(const QuadraticBlock& block);

  double value(const Vector& p) const;
  Vector gradient(const Vector& p) const;
  std::pair<double, Vector> value_gradient(const Vector& p) const;

 private:
  Vector linear_;
  Eigen::LLT<Matrix> factor_;
};

/// x -> sum_i f_i*(A_i'x) - <x, b>, with <x, b>/m attached to each
/// component so the finite-sum oracle is used unchanged.
/// Constants: L^_i = |A_i|_2^2/mu_i, mu^_i = lambda_min(A_i A_i')/L_i.
class DualProblem final : public FiniteSumProblem {
 public:
  explicit DualProblem(MultiBlockProblem primal);

  Index num_components() const override { return primal_.num_blocks(); }
  Index dimension() const override { return primal_.dual_dimension(); }
  double component_value(Index i, const Vector& x) const override;
  void component_gradient(Index i, const Vector& x, Eigen::Ref<Vector> out) const override;
  ComponentSpec component_spec(Index i) const override { return specs_[i]; }
  std::string family() const override { return "multiblock_dual"; }
  bool component_hessian(Index i, const Vector& x, Matrix& out) const override;
  /// Dual part of the KKT solution, computed once at construction.
  std::optional<Vector> known_optimum() const override { return optimum_; }

  const MultiBlockProblem& primal() const { return primal_; }
  const ConjugateOracle& conjugate(Index i) const { return conjugates_[i]; }
  /// |A_i|_2.
  double coupling_norm(Index i) const { return coupling_norm_[i]; }

 private:
  MultiBlockProblem primal_;
  std::vector<ConjugateOracle> conjugates_;
  std::vector<ComponentSpec> specs_;
  std::vector<double> coupling_norm_;
  std::optional<Vector> optimum_;
};

/// Requires every block strongly convex (perturb weakly convex ones first).
std::unique_ptr<DualProblem> build_dual(const MultiBlockProblem& problem);

struct PrimalRecovery {
  std::vector<Vector> blocks;
  double objective = 0.0;
  double infeasibility = 0.0;
};

/// y_i = grad f_i*(A_i'x).
PrimalRecovery recover_primal(const DualProblem& dual, const Vector& x);

/// Measured primal errors next to the bounds
///   |y_i - y_i*| <= (|A_i|_2/mu_i)|x - x*|,
///   |sum A_i y_i - b| <= sum_i (|A_i|_2^2/mu_i)|x - x*|.
struct ErrorCertificate {
  std::vector<double> block_error;
  std::vector<double> block_bound;
  double infeasibility = 0.0;
  double infeasibility_bound = 0.0;
  /// measured <= bound on every line, up to a relative rounding slack.
  bool holds = true;
};

ErrorCertificate error_certificate(const DualProblem& dual, const Vector& x,
                                   const Vector& x_star);

/// delta = eps / (m D^2).
double perturbation_delta(double eps, Index m, double radius);

/// Adds (delta/2)|y_i|^2 to every block.
MultiBlockProblem perturb(const MultiBlockProblem& problem, double eps, double radius);

struct KktSolution {
  std::vector<Vector> blocks;
  Vector dual;
  double residual = 0.0;
};

/// Dense solve of [blkdiag(P_i), -A'; A, 0] [y; x] = [-a; b]. Blocks may
/// be semidefinite as long as the system is nonsingular.
KktSolution kkt_direct_solve(const MultiBlockProblem& problem);

struct DualSolveOptions {
  RunOptions run;
  double eta_scale = 1.0;
  double lambda_scale = 1.0;
  /// Evaluate the error certificates at every record (needs the optimum).
  bool check_certificates = true;
};

struct DualSolveResult {
  PrimalRecovery primal;
  ConvergenceTrace trace;
  SsnmConfig config;
  /// Every recorded certificate held.
  bool certificates_held = true;
  std::size_t certificates_checked = 0;
};

/// Generalized SSNM on the dual, then primal recovery. The trace gap is the
/// dual gap, its infeasibility column the recovered primal residual.
DualSolveResult solve_multiblock_via_dual(const MultiBlockProblem& problem,
                                          const DualSolveOptions& options);

/// Blocks with eigenvalues uniform on [0, 1], the smallest reset to mu, a
/// random orthogonal basis, Gaussian a_i and b, A_i = I and rhs m b.
MultiBlockProblem make_identity_coupled_problem(Index m, Index n, double mu, std::uint64_t seed);

/// Same family with the `rank_drop` smallest eigenvalues of every block set
/// to zero (weakly convex blocks). Null spaces differ across blocks, so the
/// KKT system stays nonsingular. a_i and b are then rescaled so the stacked
/// KKT solution has unit norm.
MultiBlockProblem make_rank_deficient_problem(Index m, Index n, Index rank_drop,
                                              std::uint64_t seed);

}  // namespace hetvr

#endif  // HETVR_DUAL_HPP
