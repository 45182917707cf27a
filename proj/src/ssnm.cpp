#include <cmath>
#include <numeric>
#include <sstream>

#include "hetvr/kernels.hpp"
#include "hetvr/solvers.hpp"

namespace hetvr {

namespace {

double sqrt_sum(std::span<const double> smoothness) {
  double s = 0.0;
  for (double l : smoothness) s += std::sqrt(l);
  return s;
}

void check_smoothness(std::span<const double> smoothness, double mu_total) {
  if (smoothness.empty()) throw InvariantError("ssnm parameters need at least one component");
  for (Index i = 0; i < smoothness.size(); ++i) {
    if (!(smoothness[i] > 0.0)) {
      std::ostringstream msg;
      msg << "smoothness constant L_" << i << " = " << smoothness[i] << " is not positive";
      throw InvariantError(msg.str());
    }
  }
  if (!(mu_total > 0.0)) throw InvariantError("total strong convexity must be positive");
}

SsnmConfig theory_config(std::span<const double> smoothness, std::span<const double> rule_l,
                         double mu_total) {
  check_smoothness(rule_l, mu_total);
  const double m = static_cast<double>(rule_l.size());
  const double s = sqrt_sum(rule_l);
  const double root_mu = std::sqrt(mu_total);
  double lambda = 0.0;
  double eta = 0.0;
  int regime = 0;
  if (root_mu <= s / m) {
    lambda = root_mu / (4.0 * s);
    eta = 1.0 / (4.0 * root_mu * s);
    regime = 1;
  } else {
    lambda = 1.0 / (4.0 * m);
    eta = 1.0 / (4.0 * mu_total * m);
    regime = 2;
  }
  auto cfg = SsnmConfig::make(lambda, eta, ssnm_distribution(rule_l), smoothness, true);
  cfg.regime = regime;
  return cfg;
}

}  // namespace

SsnmConfig SsnmConfig::make(double lambda, double eta, SamplingDistribution distribution,
                            std::span<const double> smoothness, bool strict) {
  if (!(lambda > 0.0) || !(eta > 0.0)) {
    throw InvariantError("ssnm needs lambda > 0 and eta > 0");
  }
  if (distribution.size() != smoothness.size()) {
    throw InvariantError("sampling distribution and smoothness list differ in length");
  }
  SsnmConfig cfg;
  cfg.lambda = lambda;
  cfg.eta = eta;
  cfg.distribution = std::move(distribution);
  const Index m = smoothness.size();
  cfg.tau.resize(m);
  double weighted = 0.0;
  for (Index i = 0; i < m; ++i) {
    cfg.tau[i] = lambda / cfg.distribution.probability(i);
    if (cfg.tau[i] > 1.0) {
      std::ostringstream msg;
      msg << "tau_" << i << " = lambda/pi_i = " << cfg.tau[i] << " exceeds 1";
      throw InvariantError(msg.str());
    }
    weighted += cfg.tau[i] * smoothness[i];
  }
  if (strict) {
    const double lhs = 1.0 / eta - weighted;
    for (Index i = 0; i < m; ++i) {
      const double t = cfg.tau[i];
      const double rhs = t >= 1.0 ? std::numeric_limits<double>::infinity()
                                  : smoothness[i] * t / (cfg.distribution.probability(i) * (1.0 - t));
      if (lhs < rhs) {
        std::ostringstream msg;
        msg << "1/eta - sum tau_j L_j = " << lhs << " < L_i tau_i/(pi_i (1 - tau_i)) = " << rhs
            << " at i = " << i;
        throw InvariantError(msg.str());
      }
    }
  }
  return cfg;
}

SsnmConfig ssnm_parameters(std::span<const double> smoothness, double mu_total) {
  return theory_config(smoothness, smoothness, mu_total);
}

SsnmConfig uniform_ssnm_parameters(std::span<const double> smoothness, double mu_total) {
  check_smoothness(smoothness, mu_total);
  const double l_max = *std::max_element(smoothness.begin(), smoothness.end());
  std::vector<double> flat(smoothness.size(), l_max);
  return theory_config(smoothness, flat, mu_total);
}

SsnmConfig scale_ssnm_config(const SsnmConfig& base, double eta_scale, double lambda_scale,
                             std::span<const double> smoothness) {
  auto cfg = SsnmConfig::make(base.lambda * lambda_scale, base.eta * eta_scale, base.distribution,
                              smoothness, false);
  cfg.regime = 0;
  return cfg;
}

SsnmState SsnmState::initialize(const FiniteSumProblem& problem, OracleCounter& counter,
                                const Vector& x0) {
  const Index m = problem.num_components();
  SsnmState st;
  st.x = x0;
  st.anchors = x0.replicate(1, static_cast<Eigen::Index>(m));
  kernels::gradient_table(problem, counter, x0, true, st.stored);
  st.refresh_sum();
  return st;
}

void SsnmState::refresh_sum() { kernels::column_sum(stored, running_sum); }

Vector ssnm_estimate(const FiniteSumProblem& problem, const SsnmState& state,
                     const SsnmConfig& config, Index i) {
  const double t = config.tau[i];
  const Vector y = t * state.x + (1.0 - t) * state.anchors.col(i);
  Vector g(problem.dimension());
  problem.component_gradient(i, y, g);
  g -= problem.component_spec(i).strong_convexity * y;
  return (g - state.stored.col(i)) / config.distribution.probability(i) + state.running_sum;
}

void ssnm_step(const FiniteSumProblem& problem, OracleCounter& counter, SsnmState& state,
               const SsnmConfig& config, SeededRng& rng, SsnmStepInfo* info) {
  const Index m = problem.num_components();
  const Index n = problem.dimension();
  const double mu = problem.total_strong_convexity();

  const Index i = config.distribution.sample(rng);
  const double ti = config.tau[i];
  const Vector y = ti * state.x + (1.0 - ti) * state.anchors.col(i);
  Vector g(n);
  hat_grad_component(problem, counter, i, y, g);
  Vector est = (g - state.stored.col(i)) / config.distribution.probability(i);
  est += state.running_sum;
  Vector x_next = prox_step(state.x, est, config.eta, mu, problem.feasible_set());

  const Index j = config.distribution.sample(rng);
  const double tj = config.tau[j];
  state.anchors.col(j) = tj * x_next + (1.0 - tj) * state.anchors.col(j);
  hat_grad_component(problem, counter, j, state.anchors.col(j), g);
  state.running_sum += g - state.stored.col(j);
  state.stored.col(j) = g;
  state.x = std::move(x_next);
  ++state.iteration;
  // patched sums drift; rebuild from the table once per m steps
  if (state.iteration % m == 0) state.refresh_sum();

  if (info != nullptr) {
    info->sampled = i;
    info->refreshed = j;
    info->estimate = std::move(est);
  }
}

double LyapunovDiagnostics::potential(double lambda, double eta, double mu) const {
  return anchor_gap / lambda + (1.0 + eta * mu) / (2.0 * eta) * distance_sq;
}

LyapunovDiagnostics lyapunov(const FiniteSumProblem& problem, const SsnmState& state,
                             const Vector& optimum) {
  const Index m = problem.num_components();
  const double share = problem.total_strong_convexity() / static_cast<double>(m);
  Vector g(problem.dimension());
  LyapunovDiagnostics d;
  for (Index i = 0; i < m; ++i) {
    // F_i = g^_i + h/m
    const Vector phi = state.anchors.col(i);
    const double fi_phi = hat_value_component(problem, i, phi) + 0.5 * share * phi.squaredNorm();
    const double fi_opt =
        hat_value_component(problem, i, optimum) + 0.5 * share * optimum.squaredNorm();
    problem.component_gradient(i, optimum, g);
    g -= problem.component_spec(i).strong_convexity * optimum;
    g += share * optimum;
    d.anchor_gap += fi_phi - fi_opt - g.dot(phi - optimum);
  }
  d.distance_sq = (state.x - optimum).squaredNorm();
  return d;
}

namespace {

ConvergenceTrace ssnm_loop(const std::string& name, const FiniteSumProblem& problem,
                           const SsnmConfig& config, const Evaluator& evaluator,
                           const RunOptions& options, OracleCounter* counter) {
  const Index m = problem.num_components();
  const Index n = problem.dimension();
  if (config.tau.size() != m) throw InvariantError("ssnm config built for a different m");
  if (!(problem.total_strong_convexity() > 0.0)) {
    throw InvariantError("ssnm needs sum of mu_i > 0");
  }
  OracleCounter local(m);
  OracleCounter& c = counter != nullptr ? *counter : local;
  SeededRng rng(options.seed);
  TraceRecorder rec(name, m, evaluator, options.stop);

  Vector x0 = problem.feasible_set().project(options.x0.value_or(Vector::Zero(n)));
  if (rec.empty_budget() || rec.record(0, x0, c)) return rec.finish(0, x0, c);

  SsnmState st = SsnmState::initialize(problem, c, x0);
  while (true) {
    ssnm_step(problem, c, st, config, rng);
    if (rec.due(c)) {
      if (rec.record(st.iteration, st.x, c)) break;
    } else if (rec.budget_exhausted(c, st.iteration)) {
      break;
    }
  }
  return rec.finish(st.iteration, st.x, c);
}

}  // namespace

ConvergenceTrace run_ssnm(const FiniteSumProblem& problem, const SsnmConfig& config,
                          const Evaluator& evaluator, const RunOptions& options,
                          OracleCounter* counter) {
  return ssnm_loop("ssnm", problem, config, evaluator, options, counter);
}

ConvergenceTrace run_uniform_ssnm(const FiniteSumProblem& problem, double eta_scale,
                                  double lambda_scale, const Evaluator& evaluator,
                                  const RunOptions& options, OracleCounter* counter) {
  const auto l = problem.smoothness_constants();
  auto cfg = uniform_ssnm_parameters(l, problem.total_strong_convexity());
  if (eta_scale != 1.0 || lambda_scale != 1.0) cfg = scale_ssnm_config(cfg, eta_scale, lambda_scale, l);
  return ssnm_loop("uniform_ssnm", problem, cfg, evaluator, options, counter);
}

}  // namespace hetvr
