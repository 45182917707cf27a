#ifndef HETVR_PROBLEMS_HPP
#define HETVR_PROBLEMS_HPP

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hetvr/sampling.hpp"
#include "hetvr/types.hpp"

namespace hetvr {

/// Smoothness L_i and strong-convexity mu_i of one component.
struct ComponentSpec {
  double smoothness = 1.0;
  double strong_convexity = 0.0;

  /// Throws InvariantError unless L_i > 0 and L_i >= mu_i >= 0.
  void validate() const;
};

/// Closed convex set with an exact Euclidean projection.
class FeasibleSet {
 public:
  enum class Kind { whole_space, ball, box };

  static FeasibleSet whole_space();
  static FeasibleSet ball(Vector center, double radius);
  static FeasibleSet box(Vector lower, Vector upper);

  Kind kind() const { return kind_; }
  bool is_whole_space() const { return kind_ == Kind::whole_space; }
  Vector project(const Vector& x) const;
  bool contains(const Vector& x, double tol = 1e-12) const;
  std::string describe() const;

  const Vector& center() const { return center_; }
  double radius() const { return radius_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

 private:
  Kind kind_ = Kind::whole_space;
  Vector center_;
  double radius_ = 0.0;
  Vector lower_;
  Vector upper_;
};

/// Per-run oracle ledger. Counts are atomic so parallel kernels may record
/// into the same counter; the counter itself belongs to a single run.
class OracleCounter {
 public:
  explicit OracleCounter(Index num_components);

  OracleCounter(const OracleCounter&) = delete;
  OracleCounter& operator=(const OracleCounter&) = delete;

  void record_gradient(Index i) {
    per_component_[i].fetch_add(1, std::memory_order_relaxed);
    total_.fetch_add(1, std::memory_order_relaxed);
  }
  void record_values(std::uint64_t n) { values_.fetch_add(n, std::memory_order_relaxed); }
  void record_partials(std::uint64_t n) { partials_.fetch_add(n, std::memory_order_relaxed); }

  Index size() const { return size_; }
  std::uint64_t gradient_calls(Index i) const {
    return per_component_[i].load(std::memory_order_relaxed);
  }
  std::uint64_t total_gradient_calls() const { return total_.load(std::memory_order_relaxed); }
  std::uint64_t value_calls() const { return values_.load(std::memory_order_relaxed); }
  std::uint64_t partial_calls() const { return partials_.load(std::memory_order_relaxed); }
  /// K / m.
  double effective_passes() const {
    return static_cast<double>(total_gradient_calls()) / static_cast<double>(size_);
  }
  std::vector<std::uint64_t> gradient_snapshot() const;
  void reset();

 private:
  Index size_;
  std::unique_ptr<std::atomic<std::uint64_t>[]> per_component_;
  std::atomic<std::uint64_t> total_{0};
  std::atomic<std::uint64_t> values_{0};
  std::atomic<std::uint64_t> partials_{0};
};

/// F(x) = sum_i g_i(x) over a feasible set. Implementations expose raw,
/// uncounted oracles; solvers go through grad_component / hat_grad_component
/// which validate arguments and charge the run's OracleCounter.
class FiniteSumProblem {
 public:
  virtual ~FiniteSumProblem() = default;

  virtual Index num_components() const = 0;
  virtual Index dimension() const = 0;
  virtual double component_value(Index i, const Vector& x) const = 0;
  virtual void component_gradient(Index i, const Vector& x, Eigen::Ref<Vector> out) const = 0;
  virtual ComponentSpec component_spec(Index i) const = 0;
  virtual std::string family() const = 0;

  /// Exact Hessian of g_i when available (used by reference solves).
  virtual bool component_hessian(Index /*i*/, const Vector& /*x*/, Matrix& /*out*/) const {
    return false;
  }
  /// Minimizer of F over the feasible set when known in closed form.
  virtual std::optional<Vector> known_optimum() const { return std::nullopt; }

  const FeasibleSet& feasible_set() const { return feasible_; }
  void set_feasible_set(FeasibleSet set) { feasible_ = std::move(set); }

  std::vector<double> smoothness_constants() const;
  std::vector<double> strong_convexity_constants() const;
  /// mu = sum_i mu_i.
  double total_strong_convexity() const;

 private:
  FeasibleSet feasible_ = FeasibleSet::whole_space();
};

/// Gradient of g_i at x; charges one gradient call to component i.
Vector grad_component(const FiniteSumProblem& problem, OracleCounter& counter, Index i,
                      const Vector& x);
void grad_component(const FiniteSumProblem& problem, OracleCounter& counter, Index i,
                    const Vector& x, Eigen::Ref<Vector> out);

/// Gradient of g_i(x) - (mu_i/2)|x|^2; charges one gradient call.
Vector hat_grad_component(const FiniteSumProblem& problem, OracleCounter& counter, Index i,
                          const Vector& x);
void hat_grad_component(const FiniteSumProblem& problem, OracleCounter& counter, Index i,
                        const Vector& x, Eigen::Ref<Vector> out);

/// Uncounted value of g_i(x) - (mu_i/2)|x|^2, for diagnostics.
double hat_value_component(const FiniteSumProblem& problem, Index i, const Vector& x);

/// argmin_{x in set} (mu/2)|x|^2 + <g, x> + |x_k - x|^2/(2 eta).
///
/// The objective equals ((1 + eta mu)/(2 eta)) |x - p|^2 + const with
/// p = (x_k - eta g)/(1 + eta mu), so the constrained minimizer is exactly
/// the Euclidean projection of p onto the set, for any closed convex set.
Vector prox_step(const Vector& x_k, const Vector& grad_estimate, double eta, double mu,
                 const FeasibleSet& set);

enum class LossKind { squared, logistic };

std::string to_string(LossKind loss);
LossKind loss_from_string(const std::string& name);

struct ScaledDesign {
  Matrix matrix;
  double factor = 1.0;
};

/// Rescales A so that max_i of the data-term smoothness equals 1.
/// Squared loss: 2 w_i |a_i|^2 / m. Logistic: w_i |a_i|^2 / (4 m).
ScaledDesign scale_design_matrix(const Matrix& a, const Vector& weights, LossKind loss);

/// g_i(x) = (w_i/m) loss(a_i, b_i; x) + (mu/(2m)) |x|^2.
///
/// The ridge is split evenly, so mu_i = mu/m for every component.
class WeightedGLMProblem final : public FiniteSumProblem {
 public:
  WeightedGLMProblem(Matrix a, Vector targets, Vector weights, double ridge, LossKind loss);

  Index num_components() const override { return static_cast<Index>(a_.rows()); }
  Index dimension() const override { return static_cast<Index>(a_.cols()); }
  double component_value(Index i, const Vector& x) const override;
  void component_gradient(Index i, const Vector& x, Eigen::Ref<Vector> out) const override;
  ComponentSpec component_spec(Index i) const override { return specs_[i]; }
  std::string family() const override;
  bool component_hessian(Index i, const Vector& x, Matrix& out) const override;

  const Matrix& design() const { return a_; }
  const Vector& targets() const { return b_; }
  const Vector& weights() const { return w_; }
  double ridge() const { return ridge_; }
  LossKind loss() const { return loss_; }

 private:
  Matrix a_;
  Vector b_;
  Vector w_;
  double ridge_;
  LossKind loss_;
  std::vector<ComponentSpec> specs_;
};

/// floor(sqrt(m)) components weighted m, the rest weighted 1.
Vector skewed_weights(Index m);

/// Synthetic weighted GLM: Gaussian design, skewed weights, design scaled
/// to unit data-term smoothness. Squared loss draws Gaussian targets,
/// logistic draws +-1 labels.
std::unique_ptr<WeightedGLMProblem> make_weighted_glm(Index m, Index n, double ridge,
                                                      LossKind loss, std::uint64_t seed);

/// g_i(x) = 0.5 x'P_i x + c_i'x + r_i with P_i symmetric PSD.
class QuadraticFiniteSum final : public FiniteSumProblem {
 public:
  struct Component {
    Matrix hessian;
    Vector linear;
    double offset = 0.0;
  };

  explicit QuadraticFiniteSum(std::vector<Component> components);

  Index num_components() const override { return components_.size(); }
  Index dimension() const override { return dim_; }
  double component_value(Index i, const Vector& x) const override;
  void component_gradient(Index i, const Vector& x, Eigen::Ref<Vector> out) const override;
  ComponentSpec component_spec(Index i) const override { return specs_[i]; }
  std::string family() const override { return "quadratic"; }
  bool component_hessian(Index i, const Vector& x, Matrix& out) const override;
  std::optional<Vector> known_optimum() const override;

  const Component& component(Index i) const { return components_[i]; }

 private:
  std::vector<Component> components_;
  std::vector<ComponentSpec> specs_;
  Index dim_;
};

/// Random SPD quadratic components with eigenvalues drawn uniformly from
/// [eig_lo, eig_hi] under a random orthogonal basis.
std::unique_ptr<QuadraticFiniteSum> make_random_quadratics(Index m, Index n, double eig_lo,
                                                           double eig_hi, std::uint64_t seed);

/// Random orthogonal n x n matrix (QR of a Gaussian matrix, sign-fixed).
Matrix random_orthogonal(Index n, SeededRng& rng);

/// Components given as callbacks.
class CallbackFiniteSum final : public FiniteSumProblem {
 public:
  struct Component {
    std::function<double(const Vector&)> value;
    std::function<void(const Vector&, Eigen::Ref<Vector>)> gradient;
    ComponentSpec spec;
  };

  CallbackFiniteSum(Index dimension, std::vector<Component> components);

  Index num_components() const override { return components_.size(); }
  Index dimension() const override { return dim_; }
  double component_value(Index i, const Vector& x) const override {
    return components_[i].value(x);
  }
  void component_gradient(Index i, const Vector& x, Eigen::Ref<Vector> out) const override {
    components_[i].gradient(x, out);
  }
  ComponentSpec component_spec(Index i) const override { return components_[i].spec; }
  std::string family() const override { return "callback"; }

 private:
  Index dim_;
  std::vector<Component> components_;
};

/// Row-major numeric CSV. A first line that does not parse as numbers is
/// treated as a header and skipped.
Matrix load_csv_matrix(const std::string& path);

}  // namespace hetvr

#endif  // HETVR_PROBLEMS_HPP
