#include <cmath>

#include "hetvr/kernels.hpp"
#include "hetvr/solvers.hpp"

namespace hetvr {

namespace {

double max_smoothness(const FiniteSumProblem& problem) {
  const auto l = problem.smoothness_constants();
  return *std::max_element(l.begin(), l.end());
}

void check_step_scale(double step_scale) {
  if (!(step_scale > 0.0)) throw InvariantError("step scale must be positive");
}

}  // namespace

ConvergenceTrace run_saga(const FiniteSumProblem& problem, double step_scale,
                          const Evaluator& evaluator, const RunOptions& options,
                          OracleCounter* counter) {
  check_step_scale(step_scale);
  const Index m = problem.num_components();
  const Index n = problem.dimension();
  const double md = static_cast<double>(m);
  const double step = step_scale / (3.0 * md * max_smoothness(problem));
  const auto& set = problem.feasible_set();
  OracleCounter local(m);
  OracleCounter& c = counter != nullptr ? *counter : local;
  SeededRng rng(options.seed);
  TraceRecorder rec("saga", m, evaluator, options.stop);

  Vector x = set.project(options.x0.value_or(Vector::Zero(n)));
  if (rec.empty_budget() || rec.record(0, x, c)) return rec.finish(0, x, c);

  Matrix table;
  Vector sum;
  kernels::gradient_table(problem, c, x, false, table);
  kernels::column_sum(table, sum);
  Vector g(n);
  std::uint64_t k = 0;
  while (true) {
    const Index j = rng.below(m);
    grad_component(problem, c, j, x, g);
    const Vector v = md * (g - table.col(j)) + sum;
    x = set.project(x - step * v);
    sum += g - table.col(j);
    table.col(j) = g;
    ++k;
    if (k % m == 0) kernels::column_sum(table, sum);
    if (rec.due(c)) {
      if (rec.record(k, x, c)) break;
    } else if (rec.budget_exhausted(c, k)) {
      break;
    }
  }
  return rec.finish(k, x, c);
}

ConvergenceTrace run_svrg(const FiniteSumProblem& problem, double step_scale,
                          const Evaluator& evaluator, const RunOptions& options,
                          OracleCounter* counter) {
  check_step_scale(step_scale);
  const Index m = problem.num_components();
  const Index n = problem.dimension();
  const double md = static_cast<double>(m);
  const double step = step_scale * 0.1 / (md * max_smoothness(problem));
  const auto& set = problem.feasible_set();
  OracleCounter local(m);
  OracleCounter& c = counter != nullptr ? *counter : local;
  SeededRng rng(options.seed);
  TraceRecorder rec("svrg", m, evaluator, options.stop);

  Vector x = set.project(options.x0.value_or(Vector::Zero(n)));
  if (rec.empty_budget() || rec.record(0, x, c)) return rec.finish(0, x, c);

  Vector snapshot;
  Vector full(n);
  Vector gx(n);
  Vector gs(n);
  std::uint64_t k = 0;
  bool stop = false;
  while (!stop) {
    snapshot = x;
    kernels::full_gradient(problem, c, snapshot, full);
    for (Index t = 0; t < m; ++t) {
      const Index i = rng.below(m);
      grad_component(problem, c, i, x, gx);
      grad_component(problem, c, i, snapshot, gs);
      x = set.project(x - step * (md * (gx - gs) + full));
      ++k;
      if (rec.due(c)) {
        if (rec.record(k, x, c)) {
          stop = true;
          break;
        }
      } else if (rec.budget_exhausted(c, k)) {
        stop = true;
        break;
      }
    }
  }
  return rec.finish(k, x, c);
}

ConvergenceTrace run_agd(const GradientOracle& oracle, double step_scale,
                         const Evaluator& evaluator, const RunOptions& options,
                         OracleCounter* counter) {
  check_step_scale(step_scale);
  if (!(oracle.smoothness > 0.0)) throw InvariantError("agd needs L > 0");
  if (oracle.strong_convexity < 0.0) throw InvariantError("agd needs mu >= 0");
  const Index m = oracle.num_components;
  const Index n = oracle.dimension;
  const double step = step_scale / oracle.smoothness;
  double momentum = -1.0;
  if (oracle.strong_convexity > 0.0) {
    const double root_kappa =
        std::sqrt(std::max(oracle.smoothness / (step_scale * oracle.strong_convexity), 1.0));
    momentum = (root_kappa - 1.0) / (root_kappa + 1.0);
  }
  OracleCounter local(m);
  OracleCounter& c = counter != nullptr ? *counter : local;
  TraceRecorder rec("agd", m, evaluator, options.stop);

  Vector x = oracle.set.project(options.x0.value_or(Vector::Zero(n)));
  if (rec.empty_budget() || rec.record(0, x, c)) return rec.finish(0, x, c);

  Vector y = x;
  Vector g(n);
  Vector x_next;
  std::uint64_t k = 0;
  while (true) {
    oracle.gradient(y, c, g);
    x_next = oracle.set.project(y - step * g);
    // without strong convexity fall back to the k/(k+3) schedule
    const double beta =
        momentum >= 0.0 ? momentum : static_cast<double>(k) / static_cast<double>(k + 3);
    y = x_next + beta * (x_next - x);
    x = x_next;
    ++k;
    if (rec.due(c)) {
      if (rec.record(k, x, c)) break;
    } else if (rec.budget_exhausted(c, k)) {
      break;
    }
  }
  return rec.finish(k, x, c);
}

ConvergenceTrace run_agd(const FiniteSumProblem& problem, double step_scale,
                         const Evaluator& evaluator, const RunOptions& options,
                         OracleCounter* counter) {
  GradientOracle oracle;
  oracle.dimension = problem.dimension();
  oracle.num_components = problem.num_components();
  oracle.smoothness = 0.0;
  for (double l : problem.smoothness_constants()) oracle.smoothness += l;
  oracle.strong_convexity = problem.total_strong_convexity();
  oracle.set = problem.feasible_set();
  oracle.gradient = [&problem](const Vector& x, OracleCounter& c, Vector& out) {
    kernels::full_gradient(problem, c, x, out);
  };
  return run_agd(oracle, step_scale, evaluator, options, counter);
}

ReferenceSolution reference_solve(const FiniteSumProblem& problem, double max_passes) {
  const Index n = problem.dimension();
  ReferenceSolution out;
  if (auto opt = problem.known_optimum()) {
    out.minimizer = *opt;
  } else {
    // no gap is known yet, so the evaluator is inert and only the budget stops
    Evaluator e;
    e.objective = [](const Vector&) { return 0.0; };
    RunOptions opts;
    opts.stop.max_passes = max_passes;
    out.minimizer = run_agd(problem, 1.0, e, opts).final_iterate;

    Matrix h(n, n);
    Matrix hi(n, n);
    Vector g(n);
    if (problem.feasible_set().is_whole_space() &&
        problem.component_hessian(0, out.minimizer, hi)) {
      for (int it = 0; it < 20; ++it) {
        kernels::full_gradient(problem, out.minimizer, g);
        if (g.norm() <= 1e-14 * std::max(1.0, out.minimizer.norm())) break;
        h.setZero();
        for (Index i = 0; i < problem.num_components(); ++i) {
          problem.component_hessian(i, out.minimizer, hi);
          h += hi;
        }
        const Vector step = h.ldlt().solve(g);
        const Vector candidate = out.minimizer - step;
        if (!(kernels::objective(problem, candidate) <= kernels::objective(problem, out.minimizer)))
          break;
        out.minimizer = candidate;
      }
    }
  }
  out.value = kernels::objective(problem, out.minimizer);
  Vector g(n);
  kernels::full_gradient(problem, out.minimizer, g);
  out.gradient_norm = g.norm();
  return out;
}

}  // namespace hetvr
