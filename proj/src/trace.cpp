#include "hetvr/trace.hpp"

#include <cmath>

#include "hetvr/kernels.hpp"

namespace hetvr {

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::converged:
      return "converged";
    case RunStatus::budget_exhausted:
      return "budget_exhausted";
    case RunStatus::diverged:
      return "diverged";
  }
  return "unknown";
}

double ConvergenceTrace::final_gap() const {
  return records.empty() ? std::numeric_limits<double>::quiet_NaN() : records.back().gap;
}

std::optional<double> ConvergenceTrace::passes_to_gap(double tol) const {
  for (const auto& r : records) {
    if (r.gap <= tol) return r.passes;
  }
  return std::nullopt;
}

Evaluator make_evaluator(const FiniteSumProblem& problem, std::optional<double> reference_value) {
  Evaluator e;
  e.objective = [&problem](const Vector& x) { return kernels::objective(problem, x); };
  if (auto opt = problem.known_optimum()) {
    e.reference_value = kernels::objective(problem, *opt);
    e.optimum = std::move(opt);
  } else if (reference_value) {
    e.reference_value = *reference_value;
    e.best_seen = true;
  } else {
    throw InvariantError("evaluator needs either a known optimum or a reference value");
  }
  return e;
}

TraceRecorder::TraceRecorder(std::string solver, Index num_components, Evaluator evaluator,
                             StopRule stop)
    : m_(num_components), eval_(std::move(evaluator)), stop_(stop) {
  trace_.solver = std::move(solver);
  start_ = std::chrono::steady_clock::now();
  if (empty_budget()) stopped_ = true;
}

bool TraceRecorder::due(const OracleCounter& counter) const {
  return !stopped_ && counter.effective_passes() >= next_pass_;
}

bool TraceRecorder::budget_exhausted(const OracleCounter& counter,
                                     std::uint64_t iteration) const {
  if (counter.effective_passes() >= stop_.max_passes) return true;
  return stop_.max_iterations > 0 && iteration >= stop_.max_iterations;
}

bool TraceRecorder::record(std::uint64_t iteration, const Vector& x,
                           const OracleCounter& counter) {
  if (stopped_) return true;
  TraceRecord r;
  r.iteration = iteration;
  r.grad_calls = counter.total_gradient_calls();
  r.value_calls = counter.value_calls();
  r.passes = counter.effective_passes();
  const double f = eval_.objective(x);
  best_objective_ = std::min(best_objective_, f);
  r.gap = (eval_.best_seen ? best_objective_ : f) - eval_.reference_value;
  if (eval_.optimum) r.distance = (x - *eval_.optimum).norm();
  if (eval_.infeasibility) r.infeasibility = eval_.infeasibility(x);
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  r.component_calls = counter.gradient_snapshot();
  if (eval_.on_record) eval_.on_record(x, r);
  trace_.records.push_back(std::move(r));
  last_recorded_calls_ = counter.total_gradient_calls();
  const auto& last = trace_.records.back();

  while (next_pass_ <= last.passes) next_pass_ += 1.0;

  if (std::isnan(initial_gap_)) initial_gap_ = std::max(last.gap, 0.0);
  const bool gap_ok = stop_.gap_tolerance && last.gap <= *stop_.gap_tolerance;
  const bool dist_ok = stop_.distance_tolerance && !std::isnan(last.distance) &&
                       last.distance <= *stop_.distance_tolerance;
  if (gap_ok || dist_ok) {
    trace_.status = RunStatus::converged;
    stopped_ = true;
  } else if (!std::isfinite(f) || !std::isfinite(last.gap) ||
             (initial_gap_ > 0.0 &&
              f - eval_.reference_value > stop_.divergence_factor * initial_gap_)) {
    // raw objective, the best-seen gap never grows
    trace_.status = RunStatus::diverged;
    stopped_ = true;
  } else if (budget_exhausted(counter, iteration)) {
    trace_.status = RunStatus::budget_exhausted;
    stopped_ = true;
  }
  return stopped_;
}

ConvergenceTrace TraceRecorder::finish(std::uint64_t iteration, const Vector& x,
                                       const OracleCounter& counter) {
  if (!empty_budget() && !stopped_ && counter.total_gradient_calls() != last_recorded_calls_) {
    record(iteration, x, counter);
  }
  if (!stopped_ && !empty_budget()) {
    // Loop ended on its own (iteration cap or budget between records).
    trace_.status = RunStatus::budget_exhausted;
  }
  trace_.final_iterate = x;
  trace_.iterations = iteration;
  return std::move(trace_);
}

}  // namespace hetvr
