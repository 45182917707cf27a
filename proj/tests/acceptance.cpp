// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hetvr/adversarial.hpp"
#include "hetvr/composite.hpp"
#include "hetvr/dual.hpp"
#include "hetvr/harness.hpp"
#include "hetvr/kernels.hpp"

using namespace hetvr;

namespace {

Vector random_vector(Index n, SeededRng& rng, double scale = 1.0) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = scale * rng.normal();
  return v;
}

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Vector hat_grad(const FiniteSumProblem& p, Index i, const Vector& x) {
  Vector g(p.dimension());
  p.component_gradient(i, x, g);
  return g - p.component_spec(i).strong_convexity * x;
}

Vector composite_hat_gradient(const CompositeProblem& p, const Vector& x) {
  Vector g;
  p.gradient(x, g);
  return g - p.sigma() * x;
}

Matrix snapshot_table(const CompositeProblem& p, const Vector& xt) {
  Matrix t(p.dimension(), p.num_components());
  for (Index j = 0; j < p.num_components(); ++j) t.col(j) = hat_grad(p.inner(), j, xt);
  return t;
}

SsnmState scattered_state(const FiniteSumProblem& p, SeededRng& rng) {
  OracleCounter c(p.num_components());
  SsnmState st = SsnmState::initialize(p, c, random_vector(p.dimension(), rng));
  for (Index i = 0; i < p.num_components(); ++i) {
    st.anchors.col(i) = random_vector(p.dimension(), rng);
    st.stored.col(i) = hat_grad(p, i, st.anchors.col(i));
  }
  st.refresh_sum();
  return st;
}

CompositeProblem random_composite(Index m, Index n, double off_diagonal, std::uint64_t seed) {
  QuadraticCompositeOptions o;
  o.m = m;
  o.n = n;
  o.mu = 1e-2;
  o.off_diagonal = off_diagonal;
  o.seed = seed;
  return make_quadratic_composite(o);
}

// 1. enumerated expectations equal the exact gradients
Outcome unbiasedness() {
  double worst = 0.0;
  SeededRng rng(101);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Index m = 2 + rng.below(19);
    const Index n = 2 + rng.below(6);
    auto p = make_random_quadratics(m, n, 0.01, 1.0 + 20.0 * rng.uniform(), 1000 + s);
    const auto cfg = ssnm_parameters(p->smoothness_constants(), p->total_strong_convexity());
    const SsnmState st = scattered_state(*p, rng);
    Vector mean = Vector::Zero(n), target = Vector::Zero(n);
    for (Index i = 0; i < m; ++i) {
      mean += cfg.distribution.probability(i) * ssnm_estimate(*p, st, cfg, i);
      target += hat_grad(*p, i, cfg.tau[i] * st.x + (1.0 - cfg.tau[i]) * st.anchors.col(i));
    }
    worst = std::max(worst, rel(mean, target));

    // snapshot estimator on the same finite sum
    SvrgFiniteSumEstimator svrg(*p);
    OracleCounter c(m);
    const Vector xt = random_vector(n, rng), x = random_vector(n, rng);
    svrg.take_snapshot(xt, c);
    Vector est, sum = Vector::Zero(n), exact = Vector::Zero(n);
    for (Index i = 0; i < m; ++i) {
      svrg.estimate(x, i, c, est);
      sum += svrg.distribution().probability(i) * est;
      exact += hat_grad(*p, i, x);
    }
    worst = std::max(worst, rel(sum, exact));

    // composite estimators
    const Index mc = 2 + rng.below(49);
    const auto general = random_composite(mc, n, 1.0, 2000 + s);
    const auto gdist = katyusha_distribution(general.constants().upper_partials,
                                             general.inner().smoothness_constants());
    const Vector cx = sample_in_region(general, rng), cxt = sample_in_region(general, rng);
    const Matrix table = snapshot_table(general, cxt);
    Vector gmean = Vector::Zero(n);
    for (Index i = 0; i < mc; ++i) gmean += gdist.probability(i) * estimator_general(general, cx, table, i, gdist);
    worst = std::max(worst, rel(gmean, composite_hat_gradient(general, cx)));

    const auto diag = random_composite(mc, n, 0.0, 3000 + s);
    const auto rdist = reduced_distribution(diag.constants().reduced_smoothness);
    const Vector dx = sample_in_region(diag, rng), dxt = sample_in_region(diag, rng);
    const Vector ht = composite_hat_gradient(diag, dxt);
    Vector rmean = Vector::Zero(n);
    for (Index i = 0; i < mc; ++i) rmean += rdist.probability(i) * estimator_reduced(diag, dx, dxt, ht, i, rdist);
    worst = std::max(worst, rel(rmean, composite_hat_gradient(diag, dx)));
  }
  return {worst <= 1e-10, "worst relative error " + fmt(worst) + " over 20 instances (4 estimators)"};
}

// 2. variance inequalities
Outcome variance() {
  double worst = std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < 5; ++s) {
    SeededRng rng(200 + s);
    auto p = make_random_quadratics(8, 4, 0.01, 10.0, 400 + s);
    const auto cfg = ssnm_parameters(p->smoothness_constants(), p->total_strong_convexity());
    for (int t = 0; t < 100; ++t) {
      const SsnmState st = scattered_state(*p, rng);
      Vector mean = Vector::Zero(4);
      double bound = 0.0;
      for (Index i = 0; i < 8; ++i) {
        const Vector y = cfg.tau[i] * st.x + (1.0 - cfg.tau[i]) * st.anchors.col(i);
        const Vector gy = hat_grad(*p, i, y);
        mean += gy;
        const Vector phi = st.anchors.col(i);
        const double breg = hat_value_component(*p, i, phi) - hat_value_component(*p, i, y) -
                            gy.dot(phi - y);
        bound += 2.0 * p->component_spec(i).smoothness / cfg.distribution.probability(i) * breg;
      }
      double var = 0.0;
      for (Index i = 0; i < 8; ++i) {
        var += cfg.distribution.probability(i) * (ssnm_estimate(*p, st, cfg, i) - mean).squaredNorm();
      }
      worst = std::min(worst, bound - var);
    }
    const auto general = random_composite(10, 4, 1.0, 500 + s);
    const auto diag = random_composite(10, 4, 0.0, 600 + s);
    for (int t = 0; t < 100; ++t) {
      const auto vg = variance_check_general(general, sample_in_region(general, rng),
                                             sample_in_region(general, rng));
      worst = std::min(worst, vg.rhs - vg.lhs);
      const auto vr = variance_check_reduced(diag, sample_in_region(diag, rng), sample_in_region(diag, rng));
      worst = std::min(worst, vr.rhs - vr.lhs);
    }
  }
  return {worst >= -1e-9, "min slack " + fmt(worst) + " over 1500 configurations"};
}

// 3. prox inequality for each feasible-set variant
Outcome prox() {
  const Index n = 5;
  std::vector<std::pair<std::string, FeasibleSet>> sets = {
      {"whole space", FeasibleSet::whole_space()},
      {"ball", FeasibleSet::ball(Vector::Constant(n, 0.3), 1.5)},
      {"box", FeasibleSet::box(Vector::Constant(n, -0.5), Vector::Constant(n, 1.0))}};
  double worst = std::numeric_limits<double>::infinity();
  SeededRng rng(300);
  for (const auto& [name, set] : sets) {
    for (int t = 0; t < 100; ++t) {
      const Vector xk = set.project(random_vector(n, rng, 2.0));
      const Vector g = random_vector(n, rng, 3.0);
      const Vector u = set.project(random_vector(n, rng, 2.0));
      const double eta = 0.01 + 2.0 * rng.uniform();
      const double mu = 0.01 + rng.uniform();
      auto h = [&](const Vector& v) { return 0.5 * mu * v.squaredNorm(); };
      const Vector x1 = prox_step(xk, g, eta, mu, set);
      const double lhs = g.dot(x1 - u);
      const double rhs = -(x1 - xk).squaredNorm() / (2 * eta) + (xk - u).squaredNorm() / (2 * eta) -
                         (1 + eta * mu) / (2 * eta) * (x1 - u).squaredNorm() + h(u) - h(x1);
      worst = std::min(worst, rhs - lhs);
    }
  }
  return {worst >= -1e-9, "min slack " + fmt(worst) + " over 300 draws (3 sets)"};
}

// least-squares R^2 of log10 gap against passes
double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  return syy == 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
}

// 4. linear convergence and the pass budget
Outcome linear_convergence() {
  const Index m = 1000, n = 50;
  const double mu = 1e-3;
  double min_r2 = 1.0, worst_ratio = 0.0;
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto p = make_weighted_glm(m, n, mu, LossKind::squared, seed);
    const auto ref = reference_solve(*p);
    const auto eval = make_evaluator(*p, ref.value);
    const auto cfg = ssnm_parameters(p->smoothness_constants(), p->total_strong_convexity());
    RunOptions opt;
    opt.seed = seed;
    opt.stop.max_passes = 2000;
    opt.stop.gap_tolerance = 1e-10;
    const auto trace = run_ssnm(*p, cfg, eval, opt);

    std::vector<double> xs, ys;
    for (const auto& r : trace.records) {
      if (r.gap <= 1e-2 && r.gap >= 1e-9) {
        xs.push_back(r.passes);
        ys.push_back(std::log10(r.gap));
      }
    }
    const double r2 = xs.size() >= 3 ? r_squared(xs, ys) : 0.0;
    min_r2 = std::min(min_r2, r2);

    double root_sum = 0.0;
    for (double l : p->smoothness_constants()) root_sum += std::sqrt(l);
    const double mu_total = p->total_strong_convexity();
    const double gap0 = trace.records.front().gap;
    const double budget =
        40.0 * (static_cast<double>(m) + root_sum / std::sqrt(mu_total)) * std::log(gap0 / 1e-9) /
        static_cast<double>(m);
    const auto reached = trace.passes_to_gap(1e-9);
    const double ratio = reached ? *reached / budget : std::numeric_limits<double>::infinity();
    worst_ratio = std::max(worst_ratio, ratio);
    ok = ok && r2 >= 0.98 && reached && *reached <= budget;
  }
  return {ok, "min R^2 " + fmt(min_r2) + ", worst passes/budget " + fmt(worst_ratio) + " over 10 seeds"};
}

// 5. tuned importance sampling beats tuned uniform sampling
Outcome heterogeneity() {
  int wins = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    // same skewed least-squares instance as criterion 4
    auto cfg = preset("fig1", 0.1, seed);
    cfg.problem.n = 50;
    cfg.problem.mu = 1e-3;
    const auto w = build_workload(cfg.problem, cfg.solvers);
    StopRule stop;
    stop.max_passes = 200;
    stop.gap_tolerance = 1e-6;
    GridSpec grid;
    grid.k_min = -1;
    grid.k_max = 1;
    const auto ssnm = tune_grid(w, {"ssnm"}, stop, grid, seed);
    const auto uniform = tune_grid(w, {"uniform_ssnm"}, stop, grid, seed);
    const auto passes = [](const TuneResult& t) {
      return t.best && t.best->passes_to_tolerance ? *t.best->passes_to_tolerance
                                                   : std::numeric_limits<double>::infinity();
    };
    const double a = passes(ssnm), b = passes(uniform);
    if (a < b) ++wins;
    detail << (seed ? " " : "") << fmt(a) << "/" << fmt(b);
  }
  return {wins >= 8, std::to_string(wins) + "/10 seeds won (passes ssnm/uniform: " + detail.str() + ")"};
}

// 6. zero-chain audit on the lower-bound family
Outcome zero_chain() {
  bool chain_ok = true, floor_ok = true;
  std::size_t records = 0;
  const double tolerance = 1e-12;
  SeededRng rng(600);
  for (Index m : {1u, 4u, 8u}) {
    std::vector<double> l(m), mu(m, 0.05);
    for (auto& v : l) v = 0.05 * (2.05 + 97.95 * rng.uniform());
    const auto inst = build_finite_sum_instance(l, mu, 0, 1e-16);
    Evaluator e = make_evaluator(inst, std::nullopt);
    e.on_record = [&](const Vector& x, const TraceRecord& r) {
      const auto rep = audit_lower_bound(inst, r.component_calls, x, tolerance);
      chain_ok = chain_ok && rep.zero_chain_respected;
      floor_ok = floor_ok && rep.floor_respected;
      ++records;
    };
    RunOptions opt;
    opt.seed = 6 + m;
    opt.stop.max_passes = 30;
    run_ssnm(inst, ssnm_parameters(inst.smoothness_constants(), inst.mu_total()), e, opt);
    run_uniform_ssnm(inst, 1.0, 1.0, e, opt);
    run_saga(inst, 1.0, e, opt);
    run_svrg(inst, 1.0, e, opt);
    SvrgFiniteSumEstimator est(inst);
    run_katyusha(est, KatyushaConfig::make(est.sigma(), est.smoothness_bound(), m), e, opt);
    run_agd(inst, 1.0, e, opt);
  }
  return {chain_ok && floor_ok, std::string("zero chain ") + (chain_ok ? "held" : "violated") +
                                    ", gap floor " + (floor_ok ? "held" : "violated") + " on " +
                                    std::to_string(records) + " records (6 solvers, m = 1, 4, 8)"};
}

// 7. dual pipeline on the identity-coupled instance
Outcome dual_pipeline() {
  const auto prob = make_identity_coupled_problem(10, 10, 1e-3, 1);
  const auto k = kkt_direct_solve(prob);
  DualSolveOptions opt;
  opt.run.seed = 1;
  opt.run.stop.max_passes = 20000;
  opt.run.stop.distance_tolerance = 1e-8;
  const auto r = solve_multiblock_via_dual(prob, opt);
  double err = 0.0;
  for (Index i = 0; i < 10; ++i) err = std::max(err, (r.primal.blocks[i] - k.blocks[i]).lpNorm<Eigen::Infinity>());
  const bool ok = r.trace.status == RunStatus::converged && err <= 1e-6 && r.certificates_held &&
                  r.certificates_checked > 0;
  return {ok, "max-norm error " + fmt(err) + " after " + fmt(r.trace.records.back().passes) +
                  " passes, certificates " + (r.certificates_held ? "held" : "failed") + " on " +
                  std::to_string(r.certificates_checked) + " records"};
}

// 8. perturbation path on a rank-deficient instance
Outcome perturbation() {
  const auto prob = make_rank_deficient_problem(4, 4, 1, 14);
  // regularized KKT oracle: tiny ridge on every block, solved directly
  std::vector<QuadraticBlock> ridge;
  for (Index i = 0; i < prob.num_blocks(); ++i) {
    QuadraticBlock b = prob.block(i);
    b.hessian += 1e-12 * Matrix::Identity(b.hessian.rows(), b.hessian.cols());
    ridge.push_back(b);
  }
  const auto exact = kkt_direct_solve(MultiBlockProblem(ridge, prob.rhs()));
  double ynorm = 0.0;
  for (const auto& y : exact.blocks) ynorm += y.squaredNorm();
  const double eps = 1e-4;
  const auto pert = perturb(prob, eps, 2.0 * std::sqrt(ynorm));
  DualSolveOptions opt;
  opt.run.seed = 8;
  opt.run.stop.max_passes = 100000;
  opt.run.stop.distance_tolerance = 1e-12;
  opt.check_certificates = false;
  const auto r = solve_multiblock_via_dual(pert, opt);
  const double diff = std::abs(prob.objective(r.primal.blocks) - prob.objective(exact.blocks));
  const double infeas = prob.infeasibility(r.primal.blocks);
  return {diff <= 2 * eps && infeas <= 1e-4,
          "objective error " + fmt(diff) + " (limit " + fmt(2 * eps) + "), infeasibility " + fmt(infeas)};
}

// 9. composite Katyusha against AGD, and the reduced estimator's limit point
Outcome composite_katyusha() {
  int wins = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    QuadraticCompositeOptions o;
    o.m = scaled_size(80, 0.25);
    o.n = scaled_size(80, 0.25);
    o.mu = 1e-5;
    o.off_diagonal = 1.0;
    o.seed = seed;
    const auto p = make_quadratic_composite(o);
    const auto ref = composite_reference(p);
    const auto eval = composite_evaluator(p, ref);
    RunOptions opt;
    opt.seed = seed;
    opt.stop.max_passes = 20000;
    opt.stop.gap_tolerance = 1e-8;
    GeneralCompositeEstimator est(p);
    OracleCounter kc(p.num_components()), ac(p.num_components());
    const auto kt = run_katyusha(est, KatyushaConfig::make(est.sigma(), est.smoothness_bound(), p.num_components()),
                                 eval, opt, p.feasible_set(), &kc);
    const auto at = run_agd(composite_gradient_oracle(p), 1.0, eval, opt, &ac);
    const bool won = kt.status == RunStatus::converged &&
                     (at.status != RunStatus::converged ||
                      kc.total_gradient_calls() < ac.total_gradient_calls());
    if (won) ++wins;
    detail << (seed ? " " : "") << kc.total_gradient_calls() << "/" << ac.total_gradient_calls();
  }

  // reduced variant: certify on the fig4 instance, fall back to a diagonal outer
  QuadraticCompositeOptions o;
  o.m = scaled_size(80, 0.25);
  o.n = scaled_size(80, 0.25);
  o.mu = 1e-5;
  o.off_diagonal = 1.0;
  auto p = make_quadratic_composite(o);
  std::string instance = "fig4";
  bool certified = false;
  if (auto l = estimate_reduced_smoothness(p, 200, 1)) {
    p.set_reduced_smoothness(*l);
    certified = certify_assumption3(p, *l, 500, 2).certified;
  }
  if (!certified) {
    o.off_diagonal = 0.0;
    p = make_quadratic_composite(o);
    certified = certify_assumption3(p, p.constants().reduced_smoothness, 500, 2).certified;
    instance = "diagonal outer";
  }
  double limit_gap = std::numeric_limits<double>::infinity();
  if (certified) {
    const auto ref = composite_reference(p);
    const auto eval = composite_evaluator(p, ref);
    RunOptions opt;
    opt.seed = 9;
    opt.stop.max_passes = 200000;
    opt.stop.distance_tolerance = 4e-7;
    GeneralCompositeEstimator gen(p);
    ReducedCompositeEstimator red(p);
    const Index m = p.num_components();
    const auto tg = run_katyusha(gen, KatyushaConfig::make(gen.sigma(), gen.smoothness_bound(), m), eval, opt,
                                 p.feasible_set());
    const auto tr = run_katyusha(red, KatyushaConfig::make(red.sigma(), red.smoothness_bound(), m), eval, opt,
                                 p.feasible_set());
    if (tg.status == RunStatus::converged && tr.status == RunStatus::converged) {
      limit_gap = (tg.final_iterate - tr.final_iterate).norm();
    }
  }
  return {wins >= 8 && limit_gap <= 1e-6,
          std::to_string(wins) + "/10 seeds fewer gradients (katyusha/agd: " + detail.str() +
              "); reduced on " + instance + " limit points differ by " + fmt(limit_gap)};
}

// 10. byte-identical traces and exact accounting
Outcome determinism() {
  const auto config = parse_config(R"({
    "problem": {"family": "glm", "m": 200, "n": 12, "mu": 1e-3, "loss": "logistic"},
    "solvers": ["ssnm", "uniform_ssnm", "saga", "svrg", "katyusha", "agd"],
    "seed": 10,
    "stop": {"max_passes": 20}
  })");
  const auto w = build_workload(config.problem, config.solvers);
  const auto a = run_experiment(config, w, false);
  const auto b = run_experiment(config, w, false);
  const bool same = trace_csv(a.runs) == trace_csv(b.runs);
  bool reconciled = true;
  for (const auto& run : a.runs) {
    reconciled = reconciled && !run.trace.records.empty() &&
                 run.trace.records.back().grad_calls == run.counter_gradient_calls &&
                 run.trace.records.back().value_calls == run.counter_value_calls;
  }
  return {same && reconciled, std::string("traces ") + (same ? "identical" : "differ") +
                                  ", counters " + (reconciled ? "reconcile" : "disagree") + " (" +
                                  std::to_string(a.runs.size()) + " solvers)"};
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria = {
      unbiasedness, variance,     prox,          linear_convergence, heterogeneity,
      zero_chain,   dual_pipeline, perturbation, composite_katyusha, determinism};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i]();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!out.pass) ++failures;
    std::cout << "criterion " << (i + 1) << ": " << (out.pass ? "PASS" : "FAIL") << "  " << out.detail
              << " [" << fmt(secs) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
