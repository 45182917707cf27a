#ifndef HETVR_HARNESS_HPP
#define HETVR_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetvr/composite.hpp"
#include "hetvr/dual.hpp"
#include "hetvr/solvers.hpp"

namespace hetvr {

/// Version string written into every metadata file.
std::string version_string();

// ---------------------------------------------------------------------------
// Configuration

/// Problem descriptor. Which fields matter depends on `family`:
///   glm          m, n, mu, loss, weights ("skewed" | "uniform")
///   glm_csv      design, targets (CSV paths), mu, loss, weights
///   quadratic    m, n, eig_lo, eig_hi
///   multiblock   m, n, mu, rank_drop, epsilon, radius
///   composite    m, n, mu, off_diagonal
///   adversarial  smoothness, strong_convexity, d
struct ProblemSpec {
  std::string family = "glm";
  Index m = 0;
  Index n = 0;
  double mu = 1e-5;
  std::string loss = "squared";
  std::string weights = "skewed";
  std::string design_csv;
  std::string targets_csv;
  double eig_lo = 0.0;
  double eig_hi = 1.0;
  Index rank_drop = 0;
  std::optional<double> epsilon;
  std::optional<double> radius;
  double off_diagonal = 1.0;
  std::vector<double> smoothness;
  std::vector<double> strong_convexity;
  Index d = 0;
  std::uint64_t seed = 0;
};

/// One solver with its multiplier on the theoretical parameters. For the
/// SSNM variants `scale` multiplies eta and `lambda_scale` multiplies lambda;
/// Katyusha scales alpha; SAGA/SVRG/AGD scale their step.
struct SolverSpec {
  std::string name;
  double scale = 1.0;
  double lambda_scale = 1.0;
};

/// Rate grid {10^-k, 3 * 10^-k : k_min <= k <= k_max}.
struct GridSpec {
  bool enabled = false;
  int k_min = -3;
  int k_max = 3;
  /// Pass budget of each grid run; the run budget when unset.
  std::optional<double> passes;
};

struct ExperimentConfig {
  ProblemSpec problem;
  std::vector<SolverSpec> solvers;
  std::uint64_t seed = 0;
  StopRule stop;
  GridSpec grid;
  std::string output = "results";
  /// The document the config was parsed from, kept verbatim for metadata.
  nlohmann::json source;
};

const std::vector<std::string>& known_solvers();
const std::vector<std::string>& known_families();

/// Parses and validates. Errors are ConfigError with the offending field
/// path, or the line and column for malformed JSON.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Throws ConfigError naming the first invalid field.
void validate(const ExperimentConfig& config);
/// Canonical JSON form (what parse_config accepts).
nlohmann::json to_json(const ExperimentConfig& config);

/// Figure presets: fig1/fig2 weighted least squares / logistic regression,
/// fig3 the identity-coupled multi-block problem, fig4 the quadratic
/// composite. Sizes scale as max(10, round(size * scale)).
ExperimentConfig preset(const std::string& name, double scale = 1.0, std::uint64_t seed = 0);
Index scaled_size(Index size, double scale);

// ---------------------------------------------------------------------------
// Running

/// Instantiated problem plus everything needed to measure a run.
struct Workload {
  std::string family;
  /// Set for every family except composite (the dual for multiblock).
  std::shared_ptr<const FiniteSumProblem> finite_sum;
  std::shared_ptr<const DualProblem> dual;
  std::shared_ptr<const CompositeProblem> composite;
  Evaluator evaluator;
  /// Instance facts for the metadata (reference value, delta, region...).
  nlohmann::json info;

  Index num_components() const;
};

/// Builds the problem and its gap reference (closed form, KKT solve or a
/// long reference solve).
Workload build_workload(const ProblemSpec& spec, const std::vector<SolverSpec>& solvers = {});

struct SolverRun {
  SolverSpec spec;
  ConvergenceTrace trace;
  /// Parameters actually used.
  nlohmann::json parameters;
  std::uint64_t counter_gradient_calls = 0;
  std::uint64_t counter_value_calls = 0;
  std::uint64_t counter_partial_calls = 0;
  /// Family-specific outcome (recovered primal for multiblock, ...).
  nlohmann::json summary;
};

/// One solver on a workload. Invalid parameters raise InvariantError.
SolverRun run_solver(const Workload& workload, const SolverSpec& spec, const StopRule& stop,
                     std::uint64_t seed);

struct ExperimentResult {
  std::vector<SolverRun> runs;
  nlohmann::json metadata;
  std::filesystem::path directory;
  bool zero_budget = false;

  /// True when every run diverged.
  bool divergence_only() const;
};

/// Runs every solver of the config with its seed and writes
/// <output>/metadata.json and <output>/trace.csv.
ExperimentResult run_experiment(const ExperimentConfig& config);
/// Same, on an already-built workload (no files unless `write` is set).
ExperimentResult run_experiment(const ExperimentConfig& config, const Workload& workload,
                                bool write);

/// Columns: solver,pass,grad_calls,gap,distance,infeasibility,value_calls,iteration.
/// Fixed formatting, no timing columns, so seeded runs give identical bytes.
std::string trace_csv(const std::vector<SolverRun>& runs);

// ---------------------------------------------------------------------------
// Tuning

struct GridPoint {
  int k = 0;
  double multiplier = 1.0;
  double scale = 1.0;
  RunStatus status = RunStatus::budget_exhausted;
  bool invalid = false;
  double final_gap = 0.0;
  std::optional<double> passes_to_tolerance;
};

struct TuneResult {
  std::string solver;
  std::vector<GridPoint> grid;
  std::optional<GridPoint> best;
  bool all_diverged = false;
};

/// The grid scales in evaluation order.
std::vector<std::pair<int, double>> grid_scales(const GridSpec& grid);

/// Runs every grid point with the same seed. Best is the earliest to the gap
/// tolerance when one is set and reached, otherwise the smallest gap at the
/// budget; ties go to scale 1, then smaller |k|. Diverged and invalid points
/// are never selected.
TuneResult tune_grid(const Workload& workload, const SolverSpec& solver, const StopRule& stop,
                     const GridSpec& grid, std::uint64_t seed);

struct TuneReport {
  std::vector<TuneResult> results;
  std::filesystem::path directory;
  bool all_diverged() const;
};

/// Tunes every solver of the config, writes <output>/grid.csv and
/// <output>/tune.json.
TuneReport tune_experiment(const ExperimentConfig& config);
TuneReport tune_experiment(const ExperimentConfig& config, const Workload& workload, bool write);

/// Applies tuned scales to a copy of the config's solver list.
std::vector<SolverSpec> apply_tuning(const std::vector<SolverSpec>& solvers,
                                     const std::vector<TuneResult>& tuned);

// ---------------------------------------------------------------------------
// Adversarial instance generation

/// Spec: {"family": "finite_sum" | "dual_pairs", "smoothness": [...],
/// "strong_convexity": [...], "d": 0, "tol": 1e-16, "output": "dir",
/// "audit": {"solvers": [...], "passes": 20, "seed": 0}}.
/// Writes instance.json (q, gamma, d, optimality residual), optimum.csv and,
/// when auditing, audit.csv. Returns the instance summary.
nlohmann::json generate_instance(const nlohmann::json& spec);

// ---------------------------------------------------------------------------
// Plotting

struct PlotSeries {
  std::string label;
  std::vector<double> passes;
  std::vector<double> gaps;
};

/// Reads trace CSVs (header with at least pass and gap; a solver column
/// splits series). Series keep first-appearance order.
std::vector<PlotSeries> read_trace_series(const std::vector<std::filesystem::path>& files);

/// log10(gap) against effective passes, one polyline per series plus a
/// legend. Gaps at or below 1e-16 (including exact zeros) are drawn at 1e-16.
std::string render_svg(const std::vector<PlotSeries>& series, const std::string& title = "");

inline constexpr double kPlotGapFloor = 1e-16;

}  // namespace hetvr

#endif  // HETVR_HARNESS_HPP
