#ifndef HETVR_TRACE_HPP
#define HETVR_TRACE_HPP

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hetvr/problems.hpp"

namespace hetvr {

enum class RunStatus { converged, budget_exhausted, diverged };

std::string to_string(RunStatus status);

struct TraceRecord {
  std::uint64_t iteration = 0;
  std::uint64_t grad_calls = 0;
  std::uint64_t value_calls = 0;
  double passes = 0.0;
  double gap = 0.0;
  double distance = std::numeric_limits<double>::quiet_NaN();
  double infeasibility = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
  /// Per-component gradient counts at the record point.
  std::vector<std::uint64_t> component_calls;
};

struct ConvergenceTrace {
  std::string solver;
  std::vector<TraceRecord> records;
  RunStatus status = RunStatus::budget_exhausted;
  Vector final_iterate;
  std::uint64_t iterations = 0;

  double final_gap() const;
  /// First recorded pass count at which gap <= tol, if any.
  std::optional<double> passes_to_gap(double tol) const;
};

struct StopRule {
  double max_passes = 100.0;
  std::optional<double> gap_tolerance;
  std::optional<double> distance_tolerance;
  /// The run is declared diverged once gap exceeds this multiple of the
  /// initial gap, or becomes non-finite. Kept large: the randomized methods
  /// can overshoot by an order of magnitude early on ill-conditioned duals
  /// and still converge.
  double divergence_factor = 1e6;
  /// Hard cap on iterations regardless of passes (0 = none).
  std::uint64_t max_iterations = 0;
};

/// How the recorder turns an iterate into trace metrics.
struct Evaluator {
  std::function<double(const Vector&)> objective;
  /// Reference optimal value; gap = objective - reference.
  double reference_value = 0.0;
  /// Known minimizer, enables the distance column.
  std::optional<Vector> optimum;
  /// Primal infeasibility for dual pipelines.
  std::function<double(const Vector&)> infeasibility;
  /// When true, the gap column reports best-seen objective minus reference.
  bool best_seen = false;
  /// Extra per-record hook (certificates, audits).
  std::function<void(const Vector&, const TraceRecord&)> on_record;
};

/// Evaluator for a finite-sum problem: uses the closed-form optimum when the
/// problem knows one, otherwise the supplied reference value.
Evaluator make_evaluator(const FiniteSumProblem& problem, std::optional<double> reference_value);

/// Records one row per effective pass and decides termination.
class TraceRecorder {
 public:
  TraceRecorder(std::string solver, Index num_components, Evaluator evaluator, StopRule stop);

  /// True if nothing may be recorded (zero budget).
  bool empty_budget() const { return stop_.max_passes <= 0.0; }
  /// Whether the next pass boundary has been reached.
  bool due(const OracleCounter& counter) const;
  /// Records the iterate; returns true when the run should stop.
  bool record(std::uint64_t iteration, const Vector& x, const OracleCounter& counter);
  /// Budget check between records.
  bool budget_exhausted(const OracleCounter& counter, std::uint64_t iteration) const;

  /// Closes the trace. Records the final iterate when it has not just been
  /// recorded.
  ConvergenceTrace finish(std::uint64_t iteration, const Vector& x, const OracleCounter& counter);

 private:
  ConvergenceTrace trace_;
  Index m_;
  Evaluator eval_;
  StopRule stop_;
  double next_pass_ = 0.0;
  double initial_gap_ = std::numeric_limits<double>::quiet_NaN();
  double best_objective_ = std::numeric_limits<double>::infinity();
  bool stopped_ = false;
  std::uint64_t last_recorded_calls_ = std::numeric_limits<std::uint64_t>::max();
  std::chrono::steady_clock::time_point start_;
};

}  // namespace hetvr

#endif  // HETVR_TRACE_HPP
