#include <doctest.h>

#include <cmath>

#include "hetvr/adversarial.hpp"
#include "hetvr/kernels.hpp"
#include "hetvr/solvers.hpp"

using namespace hetvr;

TEST_CASE("tridiagonal operator") {
  Vector e1 = Vector::Unit(5, 0);
  Vector expected(5);
  expected << 2, -1, 0, 0, 0;
  CHECK(tridiag_apply(e1) == expected);

  // interior row sums vanish, boundary rows keep 1
  const Vector ones = Vector::Ones(6);
  Vector row_sums(6);
  row_sums << 1, 0, 0, 0, 0, 1;
  CHECK(tridiag_apply(ones) == row_sums);

  Vector one(1);
  one << 3.5;
  CHECK(tridiag_apply(one)[0] == 7.0);
}

TEST_CASE("chain ratio and truncation") {
  CHECK(chain_ratio(1.0) == 0.0);
  CHECK(chain_ratio(9.0) == doctest::Approx(0.5));
  const Index d = truncation_dimension(0.5);
  CHECK(std::pow(0.5, 2.0 * d) < 1e-16);
  CHECK(std::pow(0.5, 2.0 * (d - 1)) >= 1e-16);
}

TEST_CASE("unit-condition chain has the origin as optimum") {
  ChainQuadratic c(4, 1.0, 1.0);
  CHECK(c.q() == 0.0);
  CHECK(c.optimum().norm() == 0.0);
}

TEST_CASE("single chain, L = 9, mu = 1") {
  const std::vector<double> l = {9.0}, mu = {1.0};
  const auto inst = build_finite_sum_instance(l, mu);
  CHECK(inst.nu(0) == doctest::Approx(9.0));
  CHECK(inst.q(0) == doctest::Approx(0.5));
  CHECK(inst.gamma(0) == doctest::Approx(std::sqrt(3.0)));
  const Vector xs = closed_form_optimum(inst);
  // geometric series 3 (1/4) / (3/4)
  CHECK(xs.squaredNorm() == doctest::Approx(1.0).epsilon(1e-12));
  Vector g;
  kernels::full_gradient(inst, xs, g);
  CHECK(g.norm() <= 1e-8);
}

TEST_CASE("two blocks, L = 2, mu = 1/2") {
  const std::vector<double> l = {2.0, 2.0}, mu = {0.5, 0.5};
  const auto inst = build_finite_sum_instance(l, mu);
  CHECK(inst.mu_total() == doctest::Approx(1.0));
  CHECK(inst.nu(0) == doctest::Approx(2.5));
  CHECK(inst.nu(1) == doctest::Approx(2.5));
  const Vector xs = closed_form_optimum(inst);
  for (Index i = 0; i < 2; ++i) CHECK(inst.block(xs, i).squaredNorm() == doctest::Approx(1.0));
}

TEST_CASE("assumption on the constants is enforced") {
  const std::vector<double> l = {1.0, 1.0}, mu = {1.0, 1.0};
  CHECK_THROWS_WITH_AS(build_finite_sum_instance(l, mu), doctest::Contains("0"), InvariantError);
}

TEST_CASE("heterogeneous instance: optimality and component constants") {
  const std::vector<double> l = {1.0, 10.0, 100.0, 1000.0};
  const std::vector<double> mu = {0.01, 0.01, 0.01, 0.01};
  const auto inst = build_finite_sum_instance(l, mu);
  const Vector xs = closed_form_optimum(inst);
  CHECK((*inst.known_optimum() - xs).norm() == 0.0);
  Vector g;
  kernels::full_gradient(inst, xs, g);
  CHECK(g.norm() <= 1e-8);
  for (Index i = 0; i < 4; ++i) {
    CHECK(inst.block(xs, i).squaredNorm() == doctest::Approx(1.0).epsilon(1e-10));
  }
  // smoothness bound sampled along random directions
  SeededRng rng(1);
  for (Index i = 0; i < 4; ++i) {
    Vector x(inst.dimension()), y(inst.dimension()), gx(inst.dimension()), gy(inst.dimension());
    for (int t = 0; t < 10; ++t) {
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        x[k] = rng.normal();
        y[k] = rng.normal();
      }
      inst.component_gradient(i, x, gx);
      inst.component_gradient(i, y, gy);
      CHECK((gx - gy).norm() <= l[i] * (x - y).norm() * (1 + 1e-12));
    }
  }
}

TEST_CASE("prefix_nonzero") {
  CHECK(prefix_nonzero(Vector::Zero(4)) == 0);
  Vector v(5);
  v << 1, 0, 3, 0, 0;
  CHECK(prefix_nonzero(v) == 3);
  CHECK(prefix_nonzero(v, 2.0) == 3);
  CHECK(prefix_nonzero(v, 5.0) == 0);
}

TEST_CASE("gradient descent from the origin reveals one coordinate per step") {
  ChainQuadratic c(40, 9.0, 1.0);
  Vector x = Vector::Zero(40);
  Vector g(40);
  for (Index k = 1; k <= 30; ++k) {
    c.gradient(x, g);
    x -= g / 9.0;
    CHECK(prefix_nonzero(x) <= k);
  }
}

TEST_CASE("audit at the origin: floor mu/2") {
  const std::vector<double> l = {9.0, 5.0}, mu = {0.5, 0.5};
  const auto inst = build_finite_sum_instance(l, mu);
  const std::vector<std::uint64_t> k = {0, 0};
  const auto rep = audit_lower_bound(inst, k, Vector::Zero(inst.dimension()));
  CHECK(rep.floor == doctest::Approx(0.5));
  CHECK(rep.gap >= 0.5 - 1e-12);
  CHECK(rep.floor_respected);
  CHECK(rep.zero_chain_respected);
}

TEST_CASE("audit after 20 gradient steps on a single chain") {
  const std::vector<double> l = {9.0}, mu = {1.0};
  const auto inst = build_finite_sum_instance(l, mu);
  OracleCounter c(1);
  Vector x = Vector::Zero(inst.dimension());
  Vector g(inst.dimension());
  for (int k = 0; k < 20; ++k) {
    grad_component(inst, c, 0, x, g);
    x -= g / 9.0;
  }
  const auto rep = audit_lower_bound(inst, c.gradient_snapshot(), x);
  CHECK(rep.total_queries == 20);
  CHECK(rep.floor == doctest::Approx(0.5 * std::pow(0.5, 40)));
  CHECK(rep.gap >= rep.floor - 1e-12);
  CHECK(rep.zero_chain_respected);
  const Vector xs = closed_form_optimum(inst);
  CHECK((x - xs).squaredNorm() >= std::pow(0.5, 40) - 1e-10);
}

TEST_CASE("solver runs respect the zero-chain and gap floors") {
  const std::vector<double> l = {1.0, 4.0, 16.0, 64.0};
  const std::vector<double> mu = {0.05, 0.05, 0.05, 0.05};
  const auto inst = build_finite_sum_instance(l, mu);
  const Vector xs = closed_form_optimum(inst);
  bool chain_ok = true, floor_ok = true, dist_ok = true;
  Evaluator e = make_evaluator(inst, std::nullopt);
  e.on_record = [&](const Vector& x, const TraceRecord& r) {
    const auto rep = audit_lower_bound(inst, r.component_calls, x);
    chain_ok = chain_ok && rep.zero_chain_respected;
    floor_ok = floor_ok && rep.floor_respected;
    for (Index i = 0; i < 4; ++i) {
      const double q = inst.q(i);
      const double bound = std::pow(q, 2.0 * static_cast<double>(r.component_calls[i]));
      dist_ok = dist_ok && (inst.block(x, i) - inst.block(xs, i)).squaredNorm() >= bound - 1e-10;
    }
  };
  RunOptions opt;
  opt.seed = 5;
  opt.stop.max_passes = 30;
  const auto cfg = ssnm_parameters(inst.smoothness_constants(), inst.mu_total());
  run_ssnm(inst, cfg, e, opt);
  run_saga(inst, 1.0, e, opt);
  run_svrg(inst, 1.0, e, opt);
  run_agd(inst, 1.0, e, opt);
  CHECK(chain_ok);
  CHECK(floor_ok);
  CHECK(dist_ok);
}

TEST_CASE("dual pairs: optima cancel and sit at the stated distance") {
  const std::vector<double> l = {4.0, 16.0, 9.0, 25.0, 3.0};
  const std::vector<double> mu = {0.5, 1.0, 1.0, 2.0, 1.5};
  const auto inst = build_dual_instance(l, mu);
  CHECK(inst.pairs() == 2);
  const Matrix p = inst.optimum_blocks();
  CHECK(p.rowwise().sum().norm() == 0.0);
  CHECK(p.col(4).norm() == 0.0);
  const Index d = inst.block_length();
  for (Index k = 0; k < 2; ++k) {
    const double second = p.col(2 * k + 1).segment(k * d, d).squaredNorm();
    CHECK(second == doctest::Approx(2.0 / mu[2 * k + 1]).epsilon(1e-10));
  }
  // each p_i* minimizes its own g_i
  Vector g(inst.dimension());
  for (Index i = 0; i < 5; ++i) {
    inst.component_gradient(i, p.col(i), g);
    CHECK(g.norm() <= 1e-8);
  }
  CHECK(inst.optimal_value() == doctest::Approx(separable_objective(inst, p)));
}

TEST_CASE("dual pair audit at the origin") {
  const std::vector<double> l = {4.0, 16.0}, mu = {1.0, 1.0};
  const auto inst = build_dual_instance(l, mu);
  const std::vector<std::uint64_t> k = {0, 0};
  const auto rep = audit_lower_bound(inst, k, Matrix::Zero(inst.dimension(), 2));
  CHECK(rep.floor == doctest::Approx(1.0));
  CHECK(rep.floor_respected);
}
