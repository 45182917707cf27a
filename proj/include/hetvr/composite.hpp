#ifndef HETVR_COMPOSITE_HPP
#define HETVR_COMPOSITE_HPP

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "hetvr/solvers.hpp"

namespace hetvr {

/// Outer function f: R^m -> R of the composite model.
class OuterFunction {
 public:
  virtual ~OuterFunction() = default;
  virtual Index dimension() const = 0;
  virtual double value(const Vector& y) const = 0;
  virtual void gradient(const Vector& y, Vector& out) const = 0;
  /// d f / d y_i.
  virtual double partial(Index i, const Vector& y) const;
  /// Hessian of f, for reference solves.
  virtual Matrix hessian(const Vector& y) const = 0;
  virtual std::string name() const = 0;
};

/// f(y) = sum_i y_i.
class SumOuter final : public OuterFunction {
 public:
  explicit SumOuter(Index m) : m_(m) {}
  Index dimension() const override { return m_; }
  double value(const Vector& y) const override { return y.sum(); }
  void gradient(const Vector& y, Vector& out) const override { out = Vector::Ones(y.size()); }
  double partial(Index, const Vector&) const override { return 1.0; }
  Matrix hessian(const Vector& y) const override { return Matrix::Zero(y.size(), y.size()); }
  std::string name() const override { return "sum"; }

 private:
  Index m_;
};

/// f(y) = y'Qy with Q symmetric.
class QuadraticOuter final : public OuterFunction {
 public:
  explicit QuadraticOuter(Matrix q);
  Index dimension() const override { return static_cast<Index>(q_.rows()); }
  double value(const Vector& y) const override { return y.dot(q_ * y); }
  void gradient(const Vector& y, Vector& out) const override { out = 2.0 * (q_ * y); }
  double partial(Index i, const Vector& y) const override;
  Matrix hessian(const Vector&) const override { return 2.0 * q_; }
  std::string name() const override { return "quadratic"; }
  const Matrix& matrix() const { return q_; }

 private:
  Matrix q_;
};

/// Constants the composite analysis takes as known.
struct CompositeConstants {
  /// b_i <= d_i f <= B_i on the region.
  std::vector<double> lower_partials;
  std::vector<double> upper_partials;
  /// Gradient-Lipschitz constant L of F on the region.
  double smoothness = 0.0;
  /// l_i of the reduced-estimator assumption; empty when not available.
  std::vector<double> reduced_smoothness;
  /// Where the constants hold, for metadata.
  std::string region;
};

/// F(x) = f(g_1(x), ..., g_m(x)) over the inner problem's feasible set.
class CompositeProblem {
 public:
  CompositeProblem(std::shared_ptr<const OuterFunction> outer,
                   std::shared_ptr<const FiniteSumProblem> inner, CompositeConstants constants);

  Index num_components() const { return inner_->num_components(); }
  Index dimension() const { return inner_->dimension(); }
  const OuterFunction& outer() const { return *outer_; }
  const FiniteSumProblem& inner() const { return *inner_; }
  const CompositeConstants& constants() const { return constants_; }
  const FeasibleSet& feasible_set() const { return inner_->feasible_set(); }
  void set_reduced_smoothness(std::vector<double> l);

  /// sigma = sum b_i mu_i.
  double sigma() const;
  /// max{L, sum B_i L_i}.
  double l_prime() const;
  /// max{L, sum l_i}.
  double reduced_l_prime() const;

  /// g(x); the counted overload charges m value calls.
  Vector inner_values(const Vector& x) const;
  Vector inner_values(const Vector& x, OracleCounter& counter) const;

  double value(const Vector& x) const;
  /// F^(x) = F(x) - (sigma/2)|x|^2.
  double hat_value(const Vector& x) const;
  /// Chain-rule gradient, uncounted.
  void gradient(const Vector& x, Vector& out) const;
  /// Chain-rule gradient; m inner gradients, m values, m partials.
  void full_gradient(const Vector& x, OracleCounter& counter, Vector& out) const;
  /// d_i f(g(x)) grad g_i(x) - b_i mu_i x, uncounted.
  Vector hat_component_gradient(Index i, const Vector& x) const;
  /// Exact Hessian when the inner components expose theirs.
  bool hessian(const Vector& x, Matrix& out) const;

 private:
  std::shared_ptr<const OuterFunction> outer_;
  std::shared_ptr<const FiniteSumProblem> inner_;
  CompositeConstants constants_;
  std::vector<double> mu_;
};

/// sum_i b_i mu_i.
double strong_convexity_constant(std::span<const double> lower_partials,
                                 std::span<const double> strong_convexity);

/// Estimator of Algorithm-2 form for sampled i, given the snapshot table
/// (column j = grad g^_j(x~)). Uses mu_j inside the sum over j. Uncounted.
Vector estimator_general(const CompositeProblem& problem, const Vector& x,
                         const Matrix& snapshot_table, Index i,
                         const SamplingDistribution& distribution);

/// grad F^(x~) + (1/pi_i)(grad^_i F(x) - grad^_i F(x~)). Uncounted.
Vector estimator_reduced(const CompositeProblem& problem, const Vector& x, const Vector& x_tilde,
                         const Vector& hat_gradient_tilde, Index i,
                         const SamplingDistribution& distribution);

struct VarianceCheck {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// lhs = sum_i pi_i |est(i) - grad F^(x)|^2,
/// rhs = 2 (sum B_i L_i)(F^(x~) - F^(x) - <grad F^(x), x~ - x>).
VarianceCheck variance_check_general(const CompositeProblem& problem, const Vector& x,
                                     const Vector& x_tilde);
/// Same with sum l_i; requires reduced constants.
VarianceCheck variance_check_reduced(const CompositeProblem& problem, const Vector& x,
                                     const Vector& x_tilde);

/// 2 l int_0^1 <grad^_i F(x + t(y - x)) - grad^_i F(x), y - x> dt
///   - |grad^_i F(y) - grad^_i F(x)|^2,
/// with the integral by 64-point Gauss-Legendre quadrature.
double assumption3_slack(const CompositeProblem& problem, Index i, const Vector& x,
                         const Vector& y, double l);

/// Gauss-Legendre nodes and weights on [0, 1].
std::pair<Vector, Vector> gauss_legendre_unit(Index points);

struct Assumption3Report {
  bool certified = true;
  double worst_slack = std::numeric_limits<double>::infinity();
  Index samples = 0;
};

/// Checks the reduced-estimator inequality on sampled (x, y, i) triples in
/// the feasible set (or a ball of `radius` around the origin).
Assumption3Report certify_assumption3(const CompositeProblem& problem, std::span<const double> l,
                                      Index samples, std::uint64_t seed, double tol = 1e-8);

/// Empirical l_i: safety times the largest ratio |diff|^2 / (2 integral)
/// over sampled pairs. Empty when some pair has a nonpositive integral with
/// a nonzero difference (the assumption cannot hold).
std::optional<std::vector<double>> estimate_reduced_smoothness(const CompositeProblem& problem,
                                                                Index samples, std::uint64_t seed,
                                                                double safety = 1.5);

/// Point drawn uniformly from the feasible ball (or the ball of the given
/// radius when the set is not a ball).
Vector sample_in_region(const CompositeProblem& problem, SeededRng& rng, double radius = 1.0);

/// Algorithm-2 estimator: snapshot table of hat gradients, sampling
/// pi_i = B_i L_i / sum B_j L_j.
class GeneralCompositeEstimator final : public KatyushaEstimator {
 public:
  explicit GeneralCompositeEstimator(const CompositeProblem& problem);

  Index num_components() const override { return problem_.num_components(); }
  Index dimension() const override { return problem_.dimension(); }
  double sigma() const override { return problem_.sigma(); }
  double smoothness_bound() const override { return problem_.l_prime(); }
  const SamplingDistribution& distribution() const override { return dist_; }
  void take_snapshot(const Vector& x_tilde, OracleCounter& counter) override;
  void estimate(const Vector& x, Index i, OracleCounter& counter, Vector& out) override;

 private:
  const CompositeProblem& problem_;
  SamplingDistribution dist_;
  Matrix table_;
  Vector g_;
};

/// Reduced estimator: caches grad F^(x~) and d f(g(x~)) per epoch; the
/// per-component table is not kept, so grad g_i(x~) is recomputed and each
/// step costs two inner gradients.
class ReducedCompositeEstimator final : public KatyushaEstimator {
 public:
  explicit ReducedCompositeEstimator(const CompositeProblem& problem);

  Index num_components() const override { return problem_.num_components(); }
  Index dimension() const override { return problem_.dimension(); }
  double sigma() const override { return problem_.sigma(); }
  double smoothness_bound() const override { return problem_.reduced_l_prime(); }
  const SamplingDistribution& distribution() const override { return dist_; }
  void take_snapshot(const Vector& x_tilde, OracleCounter& counter) override;
  void estimate(const Vector& x, Index i, OracleCounter& counter, Vector& out) override;

 private:
  const CompositeProblem& problem_;
  SamplingDistribution dist_;
  Vector x_tilde_;
  Vector hat_gradient_tilde_;
  Vector partials_tilde_;
  Vector g_;
};

/// Full-gradient oracle for the deterministic baseline (L from the
/// constants, mu = sigma).
GradientOracle composite_gradient_oracle(const CompositeProblem& problem);

/// High-accuracy minimizer: long accelerated run, then projected Newton
/// polishing with the exact Hessian.
ReferenceSolution composite_reference(const CompositeProblem& problem, double max_passes = 20000.0);

/// Gap against the reference value (best seen), distance to its minimizer.
Evaluator composite_evaluator(const CompositeProblem& problem, const ReferenceSolution& reference);

struct QuadraticCompositeOptions {
  Index m = 80;
  Index n = 80;
  /// Smallest eigenvalue of every P_i; the rest are uniform on [0, 1].
  double mu = 1e-5;
  /// Off-diagonal part of Q relative to its diagonal; 0 gives a diagonal
  /// outer, for which the reduced-estimator assumption holds analytically.
  double off_diagonal = 1.0;
  std::uint64_t seed = 0;
};

/// f(y) = y'Qy with entrywise-positive PSD Q, inner quadratics
/// g_i(x) = 0.5 (x - c_i)'P_i(x - c_i) + r_i with r_i in [1, 2], so every
/// g_i >= r_i > 0 and d_i f = 2(Qg)_i >= 2(Qr)_i. The feasible set is a
/// ball around the origin containing every c_i with margin; b_i, B_i and L
/// are bounds over that ball.
CompositeProblem make_quadratic_composite(const QuadraticCompositeOptions& options);

}  // namespace hetvr

#endif  // HETVR_COMPOSITE_HPP
