#include "hetvr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "hetvr/adversarial.hpp"
#include "hetvr/kernels.hpp"

#ifndef HETVR_VERSION
#define HETVR_VERSION "0.1.0"
#endif

namespace hetvr {

using nlohmann::json;

std::string version_string() { return "hetvr " HETVR_VERSION; }

Index Workload::num_components() const {
  return composite ? composite->num_components() : finite_sum->num_components();
}

namespace {

std::unique_ptr<WeightedGLMProblem> glm_with_weights(Matrix a, Vector targets, double mu,
                                                     LossKind loss, const std::string& weights) {
  const Index m = static_cast<Index>(a.rows());
  Vector w = weights == "skewed" ? skewed_weights(m) : Vector::Ones(static_cast<Eigen::Index>(m));
  auto scaled = scale_design_matrix(a, w, loss);
  return std::make_unique<WeightedGLMProblem>(std::move(scaled.matrix), std::move(targets),
                                              std::move(w), mu, loss);
}

void attach_reference(Workload& w, const FiniteSumProblem& problem) {
  if (problem.known_optimum()) {
    w.evaluator = make_evaluator(problem, std::nullopt);
    w.info["reference"] = "closed_form";
    w.info["reference_value"] = w.evaluator.reference_value;
    return;
  }
  const auto ref = reference_solve(problem);
  w.evaluator = make_evaluator(problem, ref.value);
  w.info["reference"] = "agd_5000_passes_newton_polish";
  w.info["reference_value"] = ref.value;
  w.info["reference_gradient_norm"] = ref.gradient_norm;
}

Workload build_multiblock(const ProblemSpec& spec) {
  Workload w;
  MultiBlockProblem base = spec.rank_drop > 0
                               ? make_rank_deficient_problem(spec.m, spec.n, spec.rank_drop, spec.seed)
                               : make_identity_coupled_problem(spec.m, spec.n, spec.mu, spec.seed);
  std::optional<MultiBlockProblem> solved;
  if (spec.epsilon) {
    double radius = 0.0;
    if (spec.radius) {
      radius = *spec.radius;
    } else {
      // twice the norm of the unperturbed KKT solution
      const auto kkt = kkt_direct_solve(base);
      double sq = 0.0;
      for (const auto& y : kkt.blocks) sq += y.squaredNorm();
      radius = 2.0 * std::sqrt(sq);
      w.info["unperturbed_optimal_value"] = base.objective(kkt.blocks);
    }
    w.info["epsilon"] = *spec.epsilon;
    w.info["radius"] = radius;
    w.info["delta"] = perturbation_delta(*spec.epsilon, base.num_blocks(), radius);
    solved.emplace(perturb(base, *spec.epsilon, radius));
  } else {
    solved.emplace(std::move(base));
  }
  if (!solved->strongly_convex()) {
    throw InvariantError("multiblock: blocks are not strongly convex; set problem.epsilon");
  }
  const auto kkt = kkt_direct_solve(*solved);
  w.info["kkt_optimal_value"] = solved->objective(kkt.blocks);
  w.info["kkt_residual"] = kkt.residual;
  auto dual = std::shared_ptr<DualProblem>(build_dual(*solved));
  w.dual = dual;
  w.finite_sum = dual;
  attach_reference(w, *dual);
  const DualProblem* d = dual.get();
  w.evaluator.infeasibility = [d](const Vector& x) { return recover_primal(*d, x).infeasibility; };
  return w;
}

Workload build_composite(const ProblemSpec& spec, const std::vector<SolverSpec>& solvers) {
  Workload w;
  QuadraticCompositeOptions opts;
  opts.m = spec.m;
  opts.n = spec.n;
  opts.mu = spec.mu;
  opts.off_diagonal = spec.off_diagonal;
  opts.seed = spec.seed;
  auto problem = std::make_shared<CompositeProblem>(make_quadratic_composite(opts));
  const bool wants_reduced = std::any_of(solvers.begin(), solvers.end(), [](const SolverSpec& s) {
    return s.name == "katyusha_reduced";
  });
  if (wants_reduced) {
    if (problem->constants().reduced_smoothness.empty()) {
      auto l = estimate_reduced_smoothness(*problem, 200, derive_seed(spec.seed, 1));
      if (!l) {
        throw InvariantError(
            "katyusha_reduced: the reduced components are not convex on the region, so no "
            "constants l_i exist for this instance (try off_diagonal = 0)");
      }
      problem->set_reduced_smoothness(*l);
      w.info["reduced_constants"] = "estimated";
    } else {
      w.info["reduced_constants"] = "analytic";
    }
    const auto report = certify_assumption3(*problem, problem->constants().reduced_smoothness, 500,
                                            derive_seed(spec.seed, 2));
    w.info["assumption3_certified"] = report.certified;
    w.info["assumption3_worst_slack"] = report.worst_slack;
    if (!report.certified) {
      throw InvariantError("katyusha_reduced: the reduced-smoothness inequality fails on sampled "
                           "pairs of this instance");
    }
  }
  const auto ref = composite_reference(*problem);
  w.composite = problem;
  w.evaluator = composite_evaluator(*problem, ref);
  w.info["region"] = problem->constants().region;
  w.info["sigma"] = problem->sigma();
  w.info["smoothness"] = problem->constants().smoothness;
  w.info["l_prime"] = problem->l_prime();
  w.info["reference"] = "agd_then_newton";
  w.info["reference_value"] = ref.value;
  w.info["reference_gradient_norm"] = ref.gradient_norm;
  return w;
}

}  // namespace

Workload build_workload(const ProblemSpec& spec, const std::vector<SolverSpec>& solvers) {
  Workload w;
  const std::string& f = spec.family;
  if (f == "glm") {
    const LossKind loss = loss_from_string(spec.loss);
    std::shared_ptr<FiniteSumProblem> p;
    if (spec.weights == "skewed") {
      p = make_weighted_glm(spec.m, spec.n, spec.mu, loss, spec.seed);
    } else {
      SeededRng rng(spec.seed);
      Matrix a(spec.m, spec.n);
      for (Index i = 0; i < spec.m; ++i) {
        for (Index j = 0; j < spec.n; ++j) a(i, j) = rng.normal();
      }
      Vector b(spec.m);
      for (Index i = 0; i < spec.m; ++i) {
        b[i] = loss == LossKind::squared ? rng.normal() : (rng.uniform() < 0.5 ? -1.0 : 1.0);
      }
      p = glm_with_weights(std::move(a), std::move(b), spec.mu, loss, spec.weights);
    }
    w.finite_sum = p;
    attach_reference(w, *p);
  } else if (f == "glm_csv") {
    Matrix a = load_csv_matrix(spec.design_csv);
    Matrix t = load_csv_matrix(spec.targets_csv);
    if (t.size() != a.rows()) {
      throw ConfigError("problem.targets: " + std::to_string(t.size()) + " values for " +
                        std::to_string(a.rows()) + " design rows");
    }
    Vector b = Eigen::Map<Vector>(t.data(), t.size());
    std::shared_ptr<FiniteSumProblem> p =
        glm_with_weights(std::move(a), std::move(b), spec.mu, loss_from_string(spec.loss), spec.weights);
    w.finite_sum = p;
    attach_reference(w, *p);
  } else if (f == "quadratic") {
    std::shared_ptr<FiniteSumProblem> p =
        make_random_quadratics(spec.m, spec.n, spec.eig_lo, spec.eig_hi, spec.seed);
    w.finite_sum = p;
    attach_reference(w, *p);
  } else if (f == "multiblock") {
    w = build_multiblock(spec);
  } else if (f == "composite") {
    w = build_composite(spec, solvers);
  } else if (f == "adversarial") {
    auto p = std::make_shared<FiniteSumAdversarialInstance>(
        build_finite_sum_instance(spec.smoothness, spec.strong_convexity, spec.d));
    w.info["block_length"] = p->block_length();
    w.finite_sum = p;
    attach_reference(w, *p);
  } else {
    throw ConfigError("problem.family: unknown family '" + f + "'");
  }
  w.family = f;
  if (w.finite_sum) {
    w.info["m"] = w.finite_sum->num_components();
    w.info["dimension"] = w.finite_sum->dimension();
    w.info["mu_total"] = w.finite_sum->total_strong_convexity();
    const auto l = w.finite_sum->smoothness_constants();
    w.info["max_smoothness"] = *std::max_element(l.begin(), l.end());
    w.info["min_smoothness"] = *std::min_element(l.begin(), l.end());
  } else {
    w.info["m"] = w.composite->num_components();
    w.info["dimension"] = w.composite->dimension();
  }
  return w;
}

SolverRun run_solver(const Workload& w, const SolverSpec& spec, const StopRule& stop,
                     std::uint64_t seed) {
  SolverRun r;
  r.spec = spec;
  RunOptions opts;
  opts.stop = stop;
  opts.seed = seed;
  OracleCounter counter(w.num_components());
  r.parameters["scale"] = spec.scale;

  if (w.composite) {
    const auto& p = *w.composite;
    const Index m = p.num_components();
    if (spec.name == "katyusha" || spec.name == "katyusha_reduced") {
      std::unique_ptr<KatyushaEstimator> est;
      double l_prime = 0.0;
      if (spec.name == "katyusha") {
        est = std::make_unique<GeneralCompositeEstimator>(p);
        l_prime = p.l_prime();
      } else {
        est = std::make_unique<ReducedCompositeEstimator>(p);
        l_prime = p.reduced_l_prime();
      }
      auto cfg = KatyushaConfig::make(p.sigma(), l_prime, m);
      cfg.alpha *= spec.scale;
      r.parameters.update({{"sigma", cfg.sigma}, {"l_prime", cfg.l_prime}, {"tau1", cfg.tau1},
                           {"tau2", cfg.tau2}, {"alpha", cfg.alpha},
                           {"epoch_length", cfg.epoch_length}});
      r.trace = run_katyusha(*est, cfg, w.evaluator, opts, p.feasible_set(), &counter);
      r.trace.solver = spec.name;
    } else if (spec.name == "agd") {
      const auto oracle = composite_gradient_oracle(p);
      r.parameters.update({{"step", spec.scale / oracle.smoothness},
                           {"smoothness", oracle.smoothness},
                           {"strong_convexity", oracle.strong_convexity}});
      r.trace = run_agd(oracle, spec.scale, w.evaluator, opts, &counter);
    } else {
      throw InvariantError("solver '" + spec.name + "' does not apply to composite problems");
    }
  } else {
    const auto& p = *w.finite_sum;
    const Index m = p.num_components();
    const auto l = p.smoothness_constants();
    const double mu = p.total_strong_convexity();
    const double l_max = *std::max_element(l.begin(), l.end());
    double l_sum = 0.0;
    for (double v : l) l_sum += v;
    if (spec.name == "ssnm" || spec.name == "uniform_ssnm") {
      const bool uniform = spec.name == "uniform_ssnm";
      auto cfg = uniform ? uniform_ssnm_parameters(l, mu) : ssnm_parameters(l, mu);
      r.parameters["regime"] = cfg.regime;
      if (spec.scale != 1.0 || spec.lambda_scale != 1.0) {
        cfg = scale_ssnm_config(cfg, spec.scale, spec.lambda_scale, l);
      }
      r.parameters.update({{"lambda", cfg.lambda}, {"eta", cfg.eta},
                           {"lambda_scale", spec.lambda_scale},
                           {"tau_min", *std::min_element(cfg.tau.begin(), cfg.tau.end())},
                           {"tau_max", *std::max_element(cfg.tau.begin(), cfg.tau.end())}});
      r.trace = uniform ? run_uniform_ssnm(p, spec.scale, spec.lambda_scale, w.evaluator, opts, &counter)
                        : run_ssnm(p, cfg, w.evaluator, opts, &counter);
    } else if (spec.name == "saga") {
      r.parameters["step"] = spec.scale / (3.0 * static_cast<double>(m) * l_max);
      r.trace = run_saga(p, spec.scale, w.evaluator, opts, &counter);
    } else if (spec.name == "svrg") {
      r.parameters["step"] = spec.scale * 0.1 / (static_cast<double>(m) * l_max);
      r.trace = run_svrg(p, spec.scale, w.evaluator, opts, &counter);
    } else if (spec.name == "agd") {
      r.parameters.update({{"step", spec.scale / l_sum}, {"smoothness", l_sum},
                           {"strong_convexity", mu}});
      r.trace = run_agd(p, spec.scale, w.evaluator, opts, &counter);
    } else if (spec.name == "katyusha") {
      SvrgFiniteSumEstimator est(p);
      auto cfg = KatyushaConfig::make(est.sigma(), est.smoothness_bound(), m);
      cfg.alpha *= spec.scale;
      r.parameters.update({{"sigma", cfg.sigma}, {"l_prime", cfg.l_prime}, {"tau1", cfg.tau1},
                           {"tau2", cfg.tau2}, {"alpha", cfg.alpha},
                           {"epoch_length", cfg.epoch_length}});
      r.trace = run_katyusha(est, cfg, w.evaluator, opts, p.feasible_set(), &counter);
    } else {
      throw InvariantError("solver '" + spec.name + "' does not apply to finite-sum problems");
    }
    if (w.dual && r.trace.final_iterate.size() > 0) {
      const auto rec = recover_primal(*w.dual, r.trace.final_iterate);
      r.summary["primal_objective"] = rec.objective;
      r.summary["primal_infeasibility"] = rec.infeasibility;
    }
  }
  r.counter_gradient_calls = counter.total_gradient_calls();
  r.counter_value_calls = counter.value_calls();
  r.counter_partial_calls = counter.partial_calls();
  return r;
}

bool ExperimentResult::divergence_only() const {
  return !runs.empty() && std::all_of(runs.begin(), runs.end(), [](const SolverRun& r) {
    return r.trace.status == RunStatus::diverged;
  });
}

namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::filesystem::path prepare_directory(const std::string& output) {
  std::filesystem::path dir(output);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error("output: cannot create directory '" + output + "'" +
                (ec ? " (" + ec.message() + ")" : ""));
  }
  return dir;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

json run_json(const SolverRun& r) {
  const auto& t = r.trace;
  json j{{"solver", r.spec.name},
         {"parameters", r.parameters},
         {"status", to_string(t.status)},
         {"iterations", t.iterations},
         {"records", t.records.size()},
         {"counter", {{"gradient_calls", r.counter_gradient_calls},
                      {"value_calls", r.counter_value_calls},
                      {"partial_calls", r.counter_partial_calls}}}};
  if (!t.records.empty()) {
    j["final_gap"] = t.records.back().gap;
    j["final_passes"] = t.records.back().passes;
    j["wall_seconds"] = t.records.back().wall_seconds;
  }
  if (!r.summary.is_null()) j["summary"] = r.summary;
  return j;
}

}  // namespace

std::string trace_csv(const std::vector<SolverRun>& runs) {
  std::ostringstream out;
  out << "solver,pass,grad_calls,gap,distance,infeasibility,value_calls,iteration\n";
  for (const auto& r : runs) {
    for (const auto& rec : r.trace.records) {
      out << r.spec.name << ',' << format_double(rec.passes) << ',' << rec.grad_calls << ','
          << format_double(rec.gap) << ',' << format_double(rec.distance) << ','
          << format_double(rec.infeasibility) << ',' << rec.value_calls << ',' << rec.iteration
          << '\n';
    }
  }
  return out.str();
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Workload& workload,
                                bool write) {
  validate(config);
  ExperimentResult res;
  res.zero_budget = config.stop.max_passes <= 0.0;
  if (write) res.directory = prepare_directory(config.output);
  for (const auto& s : config.solvers) {
    res.runs.push_back(run_solver(workload, s, config.stop, config.seed));
  }
  json runs = json::array();
  for (const auto& r : res.runs) runs.push_back(run_json(r));
  res.metadata = json{{"version", version_string()},
                      {"config", config.source.is_null() ? to_json(config) : config.source},
                      {"resolved_config", to_json(config)},
                      {"seed", config.seed},
                      {"rng", "xoshiro256** seeded through SplitMix64"},
                      {"problem", workload.info},
                      {"zero_budget", res.zero_budget},
                      {"divergence_only", res.divergence_only()},
                      {"runs", runs}};
  if (write) {
    write_file(res.directory / "metadata.json", res.metadata.dump(2) + "\n");
    write_file(res.directory / "trace.csv", trace_csv(res.runs));
  }
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate(config);
  const Workload w = build_workload(config.problem, config.solvers);
  return run_experiment(config, w, true);
}

// ---------------------------------------------------------------------------
// Tuning

std::vector<std::pair<int, double>> grid_scales(const GridSpec& grid) {
  std::vector<std::pair<int, double>> out;
  for (int k = grid.k_min; k <= grid.k_max; ++k) {
    const double base = std::pow(10.0, -k);
    out.emplace_back(k, base);
    out.emplace_back(k, 3.0 * base);
  }
  return out;
}

TuneResult tune_grid(const Workload& workload, const SolverSpec& solver, const StopRule& stop,
                     const GridSpec& grid, std::uint64_t seed) {
  TuneResult res;
  res.solver = solver.name;
  StopRule s = stop;
  if (grid.passes) s.max_passes = *grid.passes;
  for (const auto& [k, scale] : grid_scales(grid)) {
    GridPoint g;
    g.k = k;
    g.scale = scale;
    g.multiplier = scale * std::pow(10.0, k) > 2.0 ? 3.0 : 1.0;
    SolverSpec spec = solver;
    spec.scale = scale;
    try {
      const auto run = run_solver(workload, spec, s, seed);
      g.status = run.trace.status;
      g.final_gap = run.trace.final_gap();
      if (s.gap_tolerance) g.passes_to_tolerance = run.trace.passes_to_gap(*s.gap_tolerance);
    } catch (const InvariantError&) {
      g.invalid = true;
    }
    res.grid.push_back(g);
  }

  auto better = [](const GridPoint& a, const GridPoint& b) {
    const bool ra = a.passes_to_tolerance.has_value();
    const bool rb = b.passes_to_tolerance.has_value();
    if (ra != rb) return ra;
    const double ka = ra ? *a.passes_to_tolerance : a.final_gap;
    const double kb = rb ? *b.passes_to_tolerance : b.final_gap;
    if (ka != kb) return ka < kb;
    const bool one_a = a.scale == 1.0;
    const bool one_b = b.scale == 1.0;
    if (one_a != one_b) return one_a;
    return std::abs(a.k) < std::abs(b.k);
  };
  bool any_diverged = false;
  for (const auto& g : res.grid) {
    if (g.status == RunStatus::diverged) any_diverged = true;
    if (g.invalid || g.status == RunStatus::diverged || !std::isfinite(g.final_gap)) continue;
    if (!res.best || better(g, *res.best)) res.best = g;
  }
  res.all_diverged = !res.best && any_diverged;
  return res;
}

bool TuneReport::all_diverged() const {
  return !results.empty() && std::all_of(results.begin(), results.end(),
                                         [](const TuneResult& r) { return r.all_diverged; });
}

TuneReport tune_experiment(const ExperimentConfig& config, const Workload& workload, bool write) {
  validate(config);
  TuneReport rep;
  for (const auto& s : config.solvers) {
    rep.results.push_back(tune_grid(workload, s, config.stop, config.grid, config.seed));
  }
  if (!write) return rep;
  rep.directory = prepare_directory(config.output);
  std::ostringstream csv;
  csv << "solver,k,multiplier,scale,status,final_gap,passes_to_tolerance\n";
  json best = json::object();
  for (const auto& r : rep.results) {
    for (const auto& g : r.grid) {
      csv << r.solver << ',' << g.k << ',' << format_double(g.multiplier) << ','
          << format_double(g.scale) << ',' << (g.invalid ? "invalid" : to_string(g.status)) << ','
          << (g.invalid ? "" : format_double(g.final_gap)) << ','
          << (g.passes_to_tolerance ? format_double(*g.passes_to_tolerance) : "") << '\n';
    }
    if (r.best) {
      best[r.solver] = {{"scale", r.best->scale}, {"k", r.best->k}, {"final_gap", r.best->final_gap}};
    } else {
      best[r.solver] = {{"scale", nullptr},
                        {"report", r.all_diverged ? "every grid point diverged"
                                                  : "no valid grid point"}};
    }
  }
  json meta{{"version", version_string()},
            {"config", config.source.is_null() ? to_json(config) : config.source},
            {"seed", config.seed},
            {"problem", workload.info},
            {"grid", {{"k_min", config.grid.k_min},
                      {"k_max", config.grid.k_max},
                      {"passes", config.grid.passes ? *config.grid.passes : config.stop.max_passes}}},
            {"best", best},
            {"all_diverged", rep.all_diverged()}};
  write_file(rep.directory / "grid.csv", csv.str());
  write_file(rep.directory / "tune.json", meta.dump(2) + "\n");
  return rep;
}

TuneReport tune_experiment(const ExperimentConfig& config) {
  validate(config);
  const Workload w = build_workload(config.problem, config.solvers);
  return tune_experiment(config, w, true);
}

std::vector<SolverSpec> apply_tuning(const std::vector<SolverSpec>& solvers,
                                     const std::vector<TuneResult>& tuned) {
  std::vector<SolverSpec> out = solvers;
  for (auto& s : out) {
    for (const auto& t : tuned) {
      if (t.solver == s.name && t.best) s.scale = t.best->scale;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adversarial instances

namespace {

std::vector<double> spec_list(const json& spec, const std::string& key) {
  if (!spec.contains(key) || !spec.at(key).is_array()) {
    throw ConfigError(key + ": required array of numbers");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < spec.at(key).size(); ++i) {
    const auto& v = spec.at(key)[i];
    if (!v.is_number()) throw ConfigError(key + "[" + std::to_string(i) + "]: expected a number");
    out.push_back(v.get<double>());
  }
  return out;
}

std::string matrix_csv(const Matrix& rows) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(rows(i, j));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace

json generate_instance(const json& spec) {
  if (!spec.is_object()) throw ConfigError("<root>: expected an object");
  static const std::set<std::string> keys{"family", "smoothness", "strong_convexity", "d",
                                          "tol",    "output",     "audit"};
  for (const auto& [k, v] : spec.items()) {
    if (!keys.contains(k)) throw ConfigError(k + ": unknown field");
  }
  const std::string family = spec.value("family", std::string("finite_sum"));
  const auto l = spec_list(spec, "smoothness");
  const auto mu = spec_list(spec, "strong_convexity");
  if (l.size() != mu.size()) {
    throw ConfigError("strong_convexity: needs as many entries as smoothness");
  }
  const Index d = spec.value("d", Index{0});
  const double tol = spec.value("tol", 1e-16);
  const std::string output = spec.value("output", std::string("results/instance"));
  json audit_spec = spec.value("audit", json::object());

  json info{{"version", version_string()}, {"family", family}, {"spec", spec}};
  std::ostringstream audit_csv;
  audit_csv << "solver,pass,grad_calls,gap,floor,floor_respected,zero_chain_respected\n";
  bool audited = false;
  Matrix optimum_rows;

  if (family == "finite_sum") {
    const auto inst = build_finite_sum_instance(l, mu, d, tol);
    const Vector x = closed_form_optimum(inst);
    Vector g(x.size());
    kernels::full_gradient(inst, x, g);
    std::vector<double> q, gamma, nu;
    for (Index i = 0; i < inst.num_components(); ++i) {
      q.push_back(inst.q(i));
      gamma.push_back(inst.gamma(i));
      nu.push_back(inst.nu(i));
    }
    info.update({{"m", inst.num_components()}, {"block_length", inst.block_length()},
                 {"dimension", inst.dimension()}, {"mu_total", inst.mu_total()},
                 {"q", q}, {"gamma", gamma}, {"nu", nu},
                 {"optimal_value", kernels::objective(inst, x)},
                 {"optimality_residual", g.norm()}});
    optimum_rows = Eigen::Map<const Matrix>(x.data(), static_cast<Eigen::Index>(inst.block_length()),
                                            static_cast<Eigen::Index>(inst.num_components()))
                       .transpose();

    if (!audit_spec.empty()) {
      audited = true;
      std::vector<std::string> solvers = audit_spec.value(
          "solvers", std::vector<std::string>{"ssnm", "uniform_ssnm", "saga", "svrg", "agd"});
      StopRule stop;
      stop.max_passes = audit_spec.value("passes", 20.0);
      const std::uint64_t seed = audit_spec.value("seed", std::uint64_t{0});
      Workload w;
      w.family = "adversarial";
      auto shared = std::make_shared<FiniteSumAdversarialInstance>(inst);
      w.finite_sum = shared;
      w.evaluator = make_evaluator(*shared, std::nullopt);
      bool all_ok = true;
      for (const auto& name : solvers) {
        if (name == "katyusha_reduced") throw ConfigError("audit.solvers: '" + name + "' not applicable");
        Workload wi = w;
        std::ostringstream rows;
        wi.evaluator.on_record = [&, shared](const Vector& xr, const TraceRecord& r) {
          const auto rep = audit_lower_bound(*shared, r.component_calls, xr);
          all_ok = all_ok && rep.floor_respected && rep.zero_chain_respected;
          rows << name << ',' << format_double(r.passes) << ',' << r.grad_calls << ','
               << format_double(r.gap) << ',' << format_double(rep.floor) << ','
               << (rep.floor_respected ? 1 : 0) << ',' << (rep.zero_chain_respected ? 1 : 0) << '\n';
        };
        run_solver(wi, {name}, stop, seed);
        audit_csv << rows.str();
      }
      info["audit_passed"] = all_ok;
    }
  } else if (family == "dual_pairs") {
    const auto inst = build_dual_instance(l, mu, d, tol);
    const Matrix p = inst.optimum_blocks();
    Matrix grads(p.rows(), p.cols());
    for (Index i = 0; i < inst.num_components(); ++i) {
      Vector gi(p.rows());
      inst.component_gradient(i, p.col(static_cast<Eigen::Index>(i)), gi);
      grads.col(static_cast<Eigen::Index>(i)) = gi;
    }
    const Vector mean = grads.rowwise().mean();
    const double spread = (grads.colwise() - mean).colwise().norm().maxCoeff();
    std::vector<double> q, gamma;
    for (Index k = 0; k < inst.pairs(); ++k) {
      q.push_back(inst.q(k));
      gamma.push_back(inst.gamma(k));
    }
    info.update({{"m", inst.num_components()}, {"pairs", inst.pairs()},
                 {"block_length", inst.block_length()}, {"dimension", inst.dimension()},
                 {"q", q}, {"gamma", gamma}, {"optimal_value", inst.optimal_value()},
                 {"constraint_residual", p.rowwise().sum().norm()},
                 {"multiplier_spread", spread}});
    optimum_rows = p.transpose();

    if (!audit_spec.empty()) {
      audited = true;
      RunOptions opts;
      opts.stop.max_passes = audit_spec.value("passes", 20.0);
      opts.seed = audit_spec.value("seed", std::uint64_t{0});
      OracleCounter counter(inst.num_components());
      const auto res = run_arcd_eliminated(inst, inst.num_components() - 1, opts, p,
                                           inst.optimal_value(), &counter);
      std::vector<std::uint64_t> queries = counter.gradient_snapshot();
      const auto rep = audit_lower_bound(inst, queries, res.blocks);
      audit_csv << "arcd," << format_double(counter.effective_passes()) << ','
                << counter.total_gradient_calls() << ',' << format_double(rep.gap) << ','
                << format_double(rep.floor) << ',' << (rep.floor_respected ? 1 : 0) << ','
                << (rep.zero_chain_respected ? 1 : 0) << '\n';
      info["audit_passed"] = rep.floor_respected && rep.zero_chain_respected;
    }
  } else {
    throw ConfigError("family: expected 'finite_sum' or 'dual_pairs'");
  }

  const auto dir = prepare_directory(output);
  write_file(dir / "instance.json", info.dump(2) + "\n");
  write_file(dir / "optimum.csv", matrix_csv(optimum_rows));
  if (audited) write_file(dir / "audit.csv", audit_csv.str());
  info["directory"] = dir.string();
  return info;
}

}  // namespace hetvr
