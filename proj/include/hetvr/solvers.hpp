#ifndef HETVR_SOLVERS_HPP
#define HETVR_SOLVERS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hetvr/problems.hpp"
#include "hetvr/sampling.hpp"
#include "hetvr/trace.hpp"

namespace hetvr {

/// Common inputs of every iterative method.
struct RunOptions {
  StopRule stop;
  std::uint64_t seed = 0;
  /// Starting point; the origin when unset.
  std::optional<Vector> x0;
};

// ---------------------------------------------------------------------------
// Generalized SSNM

struct SsnmConfig {
  double lambda = 0.0;
  double eta = 0.0;
  SamplingDistribution distribution{std::vector<double>{1.0}};
  /// tau_i = lambda / pi_i.
  std::vector<double> tau;
  /// 1 or 2 for the two parameter regimes, 0 for hand-set parameters.
  int regime = 0;

  /// Builds the config and checks 0 <= tau_i <= 1. With `strict`, also
  /// checks 1/eta - sum_j tau_j L_j >= L_i tau_i / (pi_i (1 - tau_i)) for
  /// every i and raises naming the first violated index.
  static SsnmConfig make(double lambda, double eta, SamplingDistribution distribution,
                         std::span<const double> smoothness, bool strict);
};

/// Parameters from the convergence analysis, with the sqrt(L)-mixture
/// sampling distribution.
///   regime 1 (sqrt(mu) <= sum sqrt(L_j) / m):
///     lambda = sqrt(mu) / (4 S), eta = 1 / (4 sqrt(mu) S),  S = sum sqrt(L_j)
///   regime 2 otherwise: lambda = 1/(4m), eta = 1/(4 mu m).
SsnmConfig ssnm_parameters(std::span<const double> smoothness, double mu_total);

/// The same rule with every L_i replaced by max_i L_i, which yields the
/// uniform distribution (classic SSNM).
SsnmConfig uniform_ssnm_parameters(std::span<const double> smoothness, double mu_total);

/// Grid-scaled copy: eta and lambda multiplied, only 0 < tau_i <= 1 enforced.
SsnmConfig scale_ssnm_config(const SsnmConfig& base, double eta_scale, double lambda_scale,
                             std::span<const double> smoothness);

struct SsnmState {
  Vector x;
  /// Column i is the anchor phi_i.
  Matrix anchors;
  /// Column i is grad g^_i(phi_i).
  Matrix stored;
  Vector running_sum;
  std::uint64_t iteration = 0;

  /// phi_i = x0 for all i; charges m gradient calls.
  static SsnmState initialize(const FiniteSumProblem& problem, OracleCounter& counter,
                              const Vector& x0);
  /// Recomputes the running sum from the stored table.
  void refresh_sum();
};

/// Stochastic estimate for a given sampled index (uncounted; diagnostics
/// and enumeration tests).
Vector ssnm_estimate(const FiniteSumProblem& problem, const SsnmState& state,
                     const SsnmConfig& config, Index i);

struct SsnmStepInfo {
  Index sampled = 0;
  Index refreshed = 0;
  Vector estimate;
};

/// One iteration. Exactly two component-gradient calls.
void ssnm_step(const FiniteSumProblem& problem, OracleCounter& counter, SsnmState& state,
               const SsnmConfig& config, SeededRng& rng, SsnmStepInfo* info = nullptr);

/// D = sum F_i(phi_i) - F(x*) - sum <grad F_i(x*), phi_i - x*>, P = |x - x*|^2,
/// with F_i = g^_i + h/m.
struct LyapunovDiagnostics {
  double anchor_gap = 0.0;
  double distance_sq = 0.0;

  /// D/lambda + (1 + eta mu)/(2 eta) P.
  double potential(double lambda, double eta, double mu) const;
};

LyapunovDiagnostics lyapunov(const FiniteSumProblem& problem, const SsnmState& state,
                             const Vector& optimum);

ConvergenceTrace run_ssnm(const FiniteSumProblem& problem, const SsnmConfig& config,
                          const Evaluator& evaluator, const RunOptions& options,
                          OracleCounter* counter = nullptr);

ConvergenceTrace run_uniform_ssnm(const FiniteSumProblem& problem, double eta_scale,
                                  double lambda_scale, const Evaluator& evaluator,
                                  const RunOptions& options, OracleCounter* counter = nullptr);

// ---------------------------------------------------------------------------
// Generalized Katyusha

/// Supplies the stochastic gradient of F^ = F - (sigma/2)|x|^2.
class KatyushaEstimator {
 public:
  virtual ~KatyushaEstimator() = default;

  virtual Index num_components() const = 0;
  virtual Index dimension() const = 0;
  /// sigma = sum b_i mu_i.
  virtual double sigma() const = 0;
  /// L' = max{L, sum B_i L_i} (or its reduced analogue).
  virtual double smoothness_bound() const = 0;
  virtual const SamplingDistribution& distribution() const = 0;
  virtual void take_snapshot(const Vector& x_tilde, OracleCounter& counter) = 0;
  virtual void estimate(const Vector& x, Index i, OracleCounter& counter, Vector& out) = 0;
};

/// Finite-sum special case (f = coordinate sum): the SVRG estimator on the
/// hat components with pi_i proportional to L_i.
class SvrgFiniteSumEstimator final : public KatyushaEstimator {
 public:
  explicit SvrgFiniteSumEstimator(const FiniteSumProblem& problem);

  Index num_components() const override { return problem_.num_components(); }
  Index dimension() const override { return problem_.dimension(); }
  double sigma() const override { return sigma_; }
  double smoothness_bound() const override { return l_prime_; }
  const SamplingDistribution& distribution() const override { return dist_; }
  void take_snapshot(const Vector& x_tilde, OracleCounter& counter) override;
  void estimate(const Vector& x, Index i, OracleCounter& counter, Vector& out) override;

 private:
  const FiniteSumProblem& problem_;
  double sigma_;
  double l_prime_;
  SamplingDistribution dist_;
  Matrix table_;
  Vector table_sum_;
  Vector scratch_;
};

struct KatyushaConfig {
  double sigma = 0.0;
  double l_prime = 0.0;
  double tau1 = 0.5;
  double tau2 = 0.5;
  double alpha = 0.0;
  Index epoch_length = 2;

  /// tau2 = 1/2, tau1 = min{sqrt(2 m sigma)/sqrt(3 L'), 1/2},
  /// alpha = 1/(3 tau1 L'), epochs of 2m inner steps.
  static KatyushaConfig make(double sigma, double l_prime, Index m);
};

/// Records track the y sequence; the final weighted snapshot is not
/// formed when the budget ends mid-epoch.
ConvergenceTrace run_katyusha(KatyushaEstimator& estimator, const KatyushaConfig& config,
                              const Evaluator& evaluator, const RunOptions& options,
                              const FeasibleSet& set = FeasibleSet::whole_space(),
                              OracleCounter* counter = nullptr);

// ---------------------------------------------------------------------------
// Baselines

/// SAGA with uniform sampling; step = scale / (3 m max L_i).
ConvergenceTrace run_saga(const FiniteSumProblem& problem, double step_scale,
                          const Evaluator& evaluator, const RunOptions& options,
                          OracleCounter* counter = nullptr);

/// SVRG, epochs of m inner steps, last-iterate snapshots;
/// step = scale * 0.1 / (m max L_i).
ConvergenceTrace run_svrg(const FiniteSumProblem& problem, double step_scale,
                          const Evaluator& evaluator, const RunOptions& options,
                          OracleCounter* counter = nullptr);

/// Full-gradient oracle for the deterministic accelerated method.
struct GradientOracle {
  Index dimension = 0;
  Index num_components = 1;
  double smoothness = 1.0;
  double strong_convexity = 0.0;
  std::function<void(const Vector&, OracleCounter&, Vector&)> gradient;
  FeasibleSet set = FeasibleSet::whole_space();
};

/// Nesterov's constant-momentum method for strongly convex objectives:
/// step scale/L, momentum (sqrt(k)-1)/(sqrt(k)+1) with k = L/(scale mu).
ConvergenceTrace run_agd(const GradientOracle& oracle, double step_scale,
                         const Evaluator& evaluator, const RunOptions& options,
                         OracleCounter* counter = nullptr);

/// Finite-sum convenience: L = sum L_i, mu = sum mu_i.
ConvergenceTrace run_agd(const FiniteSumProblem& problem, double step_scale,
                         const Evaluator& evaluator, const RunOptions& options,
                         OracleCounter* counter = nullptr);

/// High-accuracy minimizer used as the gap reference when no closed form is
/// known: long AGD run, then Newton polishing when the problem exposes
/// Hessians and the feasible set is the whole space.
struct ReferenceSolution {
  Vector minimizer;
  double value = 0.0;
  double gradient_norm = 0.0;
};

ReferenceSolution reference_solve(const FiniteSumProblem& problem, double max_passes = 5000.0);

// ---------------------------------------------------------------------------
// Accelerated randomized coordinate descent on the eliminated form of
//   min sum_i g_i(p_i)  s.t.  sum_i p_i = 0.
// Component i of `blocks` is g_i evaluated at its own block p_i.

struct ArcdResult {
  ConvergenceTrace trace;
  /// Column i is p_i; column `eliminated` equals minus the sum of the rest.
  Matrix blocks;
};

/// Objective and optimum for the stacked variable (columns p_1..p_m
/// flattened column-major).
double separable_objective(const FiniteSumProblem& blocks, const Matrix& p);

ArcdResult run_arcd_eliminated(const FiniteSumProblem& blocks, Index eliminated,
                               const RunOptions& options,
                               std::optional<Matrix> optimum = std::nullopt,
                               std::optional<double> optimal_value = std::nullopt,
                               OracleCounter* counter = nullptr);

}  // namespace hetvr

#endif  // HETVR_SOLVERS_HPP
