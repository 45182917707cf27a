#include <cmath>

#include "hetvr/kernels.hpp"
#include "hetvr/solvers.hpp"

namespace hetvr {

SvrgFiniteSumEstimator::SvrgFiniteSumEstimator(const FiniteSumProblem& problem)
    : problem_(problem),
      sigma_(problem.total_strong_convexity()),
      l_prime_(0.0),
      dist_(std::vector<double>{1.0}) {
  const auto l = problem.smoothness_constants();
  // L of F never exceeds sum L_i, so L' = sum L_i
  for (double v : l) l_prime_ += v;
  dist_ = katyusha_distribution(std::vector<double>(l.size(), 1.0), l);
  scratch_.resize(problem.dimension());
}

void SvrgFiniteSumEstimator::take_snapshot(const Vector& x_tilde, OracleCounter& counter) {
  kernels::gradient_table(problem_, counter, x_tilde, true, table_);
  kernels::column_sum(table_, table_sum_);
}

void SvrgFiniteSumEstimator::estimate(const Vector& x, Index i, OracleCounter& counter,
                                      Vector& out) {
  hat_grad_component(problem_, counter, i, x, scratch_);
  out = table_sum_ + (scratch_ - table_.col(i)) / dist_.probability(i);
}

KatyushaConfig KatyushaConfig::make(double sigma, double l_prime, Index m) {
  if (!(sigma > 0.0)) throw InvariantError("katyusha needs sigma = sum b_i mu_i > 0");
  if (!(l_prime > 0.0)) throw InvariantError("katyusha needs L' > 0");
  if (m == 0) throw InvariantError("katyusha needs m >= 1");
  KatyushaConfig c;
  c.sigma = sigma;
  c.l_prime = l_prime;
  c.tau2 = 0.5;
  c.tau1 = std::min(std::sqrt(2.0 * static_cast<double>(m) * sigma) / std::sqrt(3.0 * l_prime), 0.5);
  c.alpha = 1.0 / (3.0 * c.tau1 * l_prime);
  c.epoch_length = 2 * m;
  return c;
}

ConvergenceTrace run_katyusha(KatyushaEstimator& estimator, const KatyushaConfig& config,
                              const Evaluator& evaluator, const RunOptions& options,
                              const FeasibleSet& set, OracleCounter* counter) {
  const Index m = estimator.num_components();
  const Index n = estimator.dimension();
  OracleCounter local(m);
  OracleCounter& c = counter != nullptr ? *counter : local;
  SeededRng rng(options.seed);
  TraceRecorder rec("katyusha", m, evaluator, options.stop);

  Vector x0 = set.project(options.x0.value_or(Vector::Zero(n)));
  if (rec.empty_budget() || rec.record(0, x0, c)) return rec.finish(0, x0, c);

  const double t1 = config.tau1;
  const double t2 = config.tau2;
  const double sigma = config.sigma;
  const double y_step = 1.0 / (3.0 * config.l_prime);
  const double growth = 1.0 + config.alpha * sigma;
  const Index len = config.epoch_length;
  const auto& dist = estimator.distribution();

  Vector y = x0;
  Vector z = x0;
  Vector snapshot = x0;
  Vector x(n);
  Vector g(n);
  Vector acc(n);
  std::uint64_t k = 0;
  bool stop = false;
  while (!stop) {
    estimator.take_snapshot(snapshot, c);
    acc.setZero();
    double weight_sum = 0.0;
    for (Index j = 0; j < len; ++j) {
      x = t1 * z + t2 * snapshot + (1.0 - t1 - t2) * y;
      const Index i = dist.sample(rng);
      estimator.estimate(x, i, c, g);
      z = prox_step(z, g, config.alpha, sigma, set);
      y = prox_step(x, g, y_step, sigma, set);
      // (1+alpha sigma)^j normalized by the largest weight to stay finite
      const double w = std::pow(growth, static_cast<double>(j) - static_cast<double>(len - 1));
      acc += w * y;
      weight_sum += w;
      ++k;
      if (rec.due(c)) {
        if (rec.record(k, y, c)) {
          stop = true;
          break;
        }
      } else if (rec.budget_exhausted(c, k)) {
        stop = true;
        break;
      }
    }
    if (!stop) snapshot = acc / weight_sum;
  }
  return rec.finish(k, y, c);
}

}  // namespace hetvr
