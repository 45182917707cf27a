#include <doctest.h>

#include <cmath>

#include "hetvr/kernels.hpp"
#include "hetvr/solvers.hpp"
#include "support.hpp"

using namespace hetvr;
using hetvr::testing::random_vector;

namespace {

// State with anchors scattered away from x, stored table consistent.
SsnmState scattered_state(const FiniteSumProblem& p, SeededRng& rng) {
  OracleCounter c(p.num_components());
  SsnmState st = SsnmState::initialize(p, c, random_vector(p.dimension(), rng));
  for (Index i = 0; i < p.num_components(); ++i) {
    st.anchors.col(i) = random_vector(p.dimension(), rng);
    Vector g = hat_grad_component(p, c, i, st.anchors.col(i));
    st.stored.col(i) = g;
  }
  st.refresh_sum();
  return st;
}

Vector hat_grad(const FiniteSumProblem& p, Index i, const Vector& x) {
  Vector g(p.dimension());
  p.component_gradient(i, x, g);
  return g - p.component_spec(i).strong_convexity * x;
}

}  // namespace

TEST_CASE("parameter regimes") {
  SUBCASE("regime 1: m=4, L=1, mu=1/16") {
    const std::vector<double> l(4, 1.0);
    const auto cfg = ssnm_parameters(l, 1.0 / 16.0);
    CHECK(cfg.regime == 1);
    CHECK(cfg.lambda == doctest::Approx(1.0 / 64.0));
    CHECK(cfg.eta == doctest::Approx(0.25));
    for (double t : cfg.tau) CHECK(t == doctest::Approx(1.0 / 16.0));
  }
  SUBCASE("regime 2: m=2, L=1, mu=4") {
    const std::vector<double> l(2, 1.0);
    const auto cfg = ssnm_parameters(l, 4.0);
    CHECK(cfg.regime == 2);
    CHECK(cfg.lambda == doctest::Approx(1.0 / 8.0));
    CHECK(cfg.eta == doctest::Approx(1.0 / 32.0));
  }
  SUBCASE("m=1: tau equals lambda and stays below 1") {
    for (double mu : {1e-6, 0.5, 1.0}) {
      const std::vector<double> l = {1.0};
      const auto cfg = ssnm_parameters(l, mu);
      CHECK(cfg.tau[0] == doctest::Approx(cfg.lambda));
      CHECK(cfg.tau[0] <= 1.0);
    }
  }
  SUBCASE("heterogeneous constants satisfy the step inequality") {
    SeededRng rng(2);
    std::vector<double> l(30);
    for (auto& v : l) v = std::exp(8.0 * rng.uniform());
    for (double mu : {1e-4, 1.0, 1e3}) CHECK_NOTHROW(ssnm_parameters(l, mu));
  }
}

TEST_CASE("config validation names the violated inequality") {
  const std::vector<double> l = {1.0, 1.0};
  CHECK_THROWS_AS(SsnmConfig::make(0.8, 0.1, uniform_distribution(2), l, false), InvariantError);
  CHECK_THROWS_WITH_AS(SsnmConfig::make(0.25, 10.0, uniform_distribution(2), l, true),
                       doctest::Contains("at i = 0"), InvariantError);
  CHECK_NOTHROW(SsnmConfig::make(0.25, 10.0, uniform_distribution(2), l, false));
  CHECK_THROWS_AS(ssnm_parameters(std::vector<double>{1.0, 0.0}, 1.0), InvariantError);
  CHECK_THROWS_AS(ssnm_parameters(l, 0.0), InvariantError);
}

TEST_CASE("uniform variant samples uniformly") {
  const std::vector<double> l = {1.0, 100.0, 4.0};
  const auto cfg = uniform_ssnm_parameters(l, 1e-2);
  for (Index i = 0; i < 3; ++i) CHECK(cfg.distribution.probability(i) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("estimator is unbiased (enumeration)") {
  SeededRng rng(11);
  for (Index m : {2u, 5u, 20u}) {
    auto p = make_random_quadratics(m, 4, 0.05, 3.0, 100 + m);
    const auto cfg = ssnm_parameters(p->smoothness_constants(), p->total_strong_convexity());
    const SsnmState st = scattered_state(*p, rng);
    Vector mean = Vector::Zero(4);
    Vector target = Vector::Zero(4);
    for (Index i = 0; i < m; ++i) {
      mean += cfg.distribution.probability(i) * ssnm_estimate(*p, st, cfg, i);
      const Vector y = cfg.tau[i] * st.x + (1.0 - cfg.tau[i]) * st.anchors.col(i);
      target += hat_grad(*p, i, y);
    }
    CHECK((mean - target).norm() <= 1e-10 * std::max(1.0, target.norm()));
  }
}

TEST_CASE("variance bound (enumeration)") {
  SeededRng rng(12);
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto p = make_random_quadratics(6, 3, 0.01, 5.0, 200 + s);
    const auto cfg = ssnm_parameters(p->smoothness_constants(), p->total_strong_convexity());
    const SsnmState st = scattered_state(*p, rng);
    Vector mean = Vector::Zero(3);
    double bound = 0.0;
    std::vector<Vector> ys;
    for (Index i = 0; i < 6; ++i) {
      const Vector y = cfg.tau[i] * st.x + (1.0 - cfg.tau[i]) * st.anchors.col(i);
      ys.push_back(y);
      const Vector gy = hat_grad(*p, i, y);
      mean += gy;
      const Vector phi = st.anchors.col(i);
      const double breg = hat_value_component(*p, i, phi) - hat_value_component(*p, i, y) -
                          gy.dot(phi - y);
      bound += 2.0 * p->component_spec(i).smoothness / cfg.distribution.probability(i) * breg;
    }
    double var = 0.0;
    for (Index i = 0; i < 6; ++i) {
      var += cfg.distribution.probability(i) * (ssnm_estimate(*p, st, cfg, i) - mean).squaredNorm();
    }
    CHECK(var <= bound + 1e-9);
  }
}

TEST_CASE("prox inequality holds at the computed step") {
  SeededRng rng(13);
  const auto ball = FeasibleSet::ball(Vector::Zero(5), 1.5);
  for (int t = 0; t < 20; ++t) {
    const Vector xk = ball.project(random_vector(5, rng));
    const Vector g = random_vector(5, rng, 3.0);
    const double eta = 0.05 + rng.uniform();
    const double mu = 0.1 + rng.uniform();
    auto h = [&](const Vector& v) { return 0.5 * mu * v.squaredNorm(); };
    const Vector x1 = prox_step(xk, g, eta, mu, ball);
    for (int s = 0; s < 20; ++s) {
      const Vector u = ball.project(random_vector(5, rng));
      const double lhs = g.dot(x1 - u);
      const double rhs = -(x1 - xk).squaredNorm() / (2 * eta) + (xk - u).squaredNorm() / (2 * eta) -
                         (1 + eta * mu) / (2 * eta) * (x1 - u).squaredNorm() + h(u) - h(x1);
      CHECK(lhs <= rhs + 1e-9);
    }
  }
}

TEST_CASE("each step costs two gradient calls and keeps the running sum") {
  auto p = make_weighted_glm(40, 6, 1e-2, LossKind::logistic, 3);
  const auto cfg = ssnm_parameters(p->smoothness_constants(), p->total_strong_convexity());
  OracleCounter c(40);
  SsnmState st = SsnmState::initialize(*p, c, Vector::Zero(6));
  CHECK(c.total_gradient_calls() == 40);
  SeededRng rng(5);
  for (int k = 1; k <= 97; ++k) {
    ssnm_step(*p, c, st, cfg, rng);
    CHECK(c.total_gradient_calls() == 40u + 2u * static_cast<unsigned>(k));
  }
  Vector exact;
  kernels::serial::column_sum(st.stored, exact);
  CHECK((st.running_sum - exact).norm() <= 1e-9);
}

TEST_CASE("single component: estimate is the exact hat gradient") {
  auto p = make_random_quadratics(1, 3, 0.5, 2.0, 8);
  const auto cfg = ssnm_parameters(p->smoothness_constants(), p->total_strong_convexity());
  SeededRng rng(3);
  const SsnmState st = scattered_state(*p, rng);
  const Vector y = cfg.tau[0] * st.x + (1.0 - cfg.tau[0]) * st.anchors.col(0);
  CHECK((ssnm_estimate(*p, st, cfg, 0) - hat_grad(*p, 0, y)).norm() < 1e-12);
}

TEST_CASE("optimum is a fixed point") {
  auto p = make_random_quadratics(5, 4, 0.2, 2.0, 9);
  const Vector xs = *p->known_optimum();
  const auto cfg = ssnm_parameters(p->smoothness_constants(), p->total_strong_convexity());
  OracleCounter c(5);
  SsnmState st = SsnmState::initialize(*p, c, xs);
  SeededRng rng(1);
  for (int k = 0; k < 50; ++k) {
    ssnm_step(*p, c, st, cfg, rng);
    CHECK((st.x - xs).norm() <= 1e-12 * (k + 1));
  }
}

TEST_CASE("single quadratic: potential contracts by (1 + eta mu)^-1 every step") {
  auto p = make_random_quadratics(1, 5, 0.3, 4.0, 10);
  const Vector xs = *p->known_optimum();
  const double mu = p->total_strong_convexity();
  const auto cfg = ssnm_parameters(p->smoothness_constants(), mu);
  OracleCounter c(1);
  SeededRng rng(2);
  SsnmState st = SsnmState::initialize(*p, c, Vector::Ones(5));
  double prev = lyapunov(*p, st, xs).potential(cfg.lambda, cfg.eta, mu);
  CHECK(lyapunov(*p, st, xs).anchor_gap >= 0.0);
  for (int k = 0; k < 200; ++k) {
    ssnm_step(*p, c, st, cfg, rng);
    const auto d = lyapunov(*p, st, xs);
    CHECK(d.anchor_gap >= -1e-12);
    const double cur = d.potential(cfg.lambda, cfg.eta, mu);
    CHECK(cur <= prev / (1.0 + cfg.eta * mu) + 1e-12 * std::max(1.0, prev));
    prev = cur;
  }
}

TEST_CASE("anchor gap is nonnegative along a run") {
  auto p = make_random_quadratics(8, 3, 0.1, 3.0, 14);
  const Vector xs = *p->known_optimum();
  const auto cfg = ssnm_parameters(p->smoothness_constants(), p->total_strong_convexity());
  OracleCounter c(8);
  SeededRng rng(4);
  SsnmState st = SsnmState::initialize(*p, c, Vector::Constant(3, 2.0));
  for (int k = 0; k < 100; ++k) {
    ssnm_step(*p, c, st, cfg, rng);
    CHECK(lyapunov(*p, st, xs).anchor_gap >= -1e-12);
  }
}

TEST_CASE("weighted least squares converges to 1e-10 within 200 passes") {
  auto p = make_weighted_glm(1000, 50, 1e-3, LossKind::squared, 7);
  const auto ref = reference_solve(*p);
  const auto eval = make_evaluator(*p, ref.value);
  const auto cfg = ssnm_parameters(p->smoothness_constants(), p->total_strong_convexity());
  RunOptions opt;
  opt.seed = 7;
  opt.stop.max_passes = 200;
  opt.stop.gap_tolerance = 1e-10;
  const auto trace = run_ssnm(*p, cfg, eval, opt);
  CHECK(trace.status == RunStatus::converged);
  CHECK(trace.final_gap() < 1e-10);
  // recorded once per pass
  for (Index k = 1; k < trace.records.size(); ++k) {
    CHECK(trace.records[k].passes - trace.records[k - 1].passes <= 1.0 + 2.0 / 1000.0);
  }
}

TEST_CASE("run started at the optimum stops at pass 0") {
  auto p = make_random_quadratics(4, 3, 0.2, 1.0, 15);
  const auto eval = make_evaluator(*p, std::nullopt);
  RunOptions opt;
  opt.x0 = *p->known_optimum();
  opt.stop.gap_tolerance = 1e-8;
  const auto cfg = ssnm_parameters(p->smoothness_constants(), p->total_strong_convexity());
  const auto trace = run_ssnm(*p, cfg, eval, opt);
  REQUIRE(trace.records.size() == 1);
  CHECK(trace.records[0].passes == 0.0);
  CHECK(trace.status == RunStatus::converged);
}

TEST_CASE("same seed gives the same trace") {
  auto p = make_weighted_glm(60, 5, 1e-2, LossKind::logistic, 16);
  const auto ref = reference_solve(*p);
  const auto eval = make_evaluator(*p, ref.value);
  const auto cfg = ssnm_parameters(p->smoothness_constants(), p->total_strong_convexity());
  RunOptions opt;
  opt.seed = 99;
  opt.stop.max_passes = 10;
  const auto a = run_ssnm(*p, cfg, eval, opt);
  const auto b = run_ssnm(*p, cfg, eval, opt);
  REQUIRE(a.records.size() == b.records.size());
  for (Index k = 0; k < a.records.size(); ++k) CHECK(a.records[k].gap == b.records[k].gap);
  CHECK(a.final_iterate == b.final_iterate);
}
