#include "hetvr/composite.hpp"

#include <cmath>
#include <sstream>

#include "hetvr/kernels.hpp"

namespace hetvr {

double OuterFunction::partial(Index i, const Vector& y) const {
  Vector g;
  gradient(y, g);
  return g[static_cast<Eigen::Index>(i)];
}

QuadraticOuter::QuadraticOuter(Matrix q) : q_(std::move(q)) {
  if (q_.rows() != q_.cols() || q_.rows() == 0) throw InvariantError("Q must be square");
  if ((q_ - q_.transpose()).norm() > 1e-12 * (1.0 + q_.norm())) {
    throw InvariantError("Q must be symmetric");
  }
}

double QuadraticOuter::partial(Index i, const Vector& y) const {
  return 2.0 * q_.row(static_cast<Eigen::Index>(i)).dot(y);
}

CompositeProblem::CompositeProblem(std::shared_ptr<const OuterFunction> outer,
                                   std::shared_ptr<const FiniteSumProblem> inner,
                                   CompositeConstants constants)
    : outer_(std::move(outer)), inner_(std::move(inner)), constants_(std::move(constants)) {
  const Index m = inner_->num_components();
  if (outer_->dimension() != m) throw InvariantError("outer dimension differs from m");
  if (constants_.lower_partials.size() != m || constants_.upper_partials.size() != m) {
    throw InvariantError("need b_i and B_i for every component");
  }
  for (Index i = 0; i < m; ++i) {
    const double b = constants_.lower_partials[i];
    const double ub = constants_.upper_partials[i];
    if (!(b > 0.0) || !(ub >= b)) {
      std::ostringstream msg;
      msg << "partial bounds need 0 < b_i <= B_i; component " << i << " has b = " << b
          << ", B = " << ub;
      throw InvariantError(msg.str());
    }
  }
  if (!(constants_.smoothness > 0.0)) throw InvariantError("composite L must be positive");
  if (!constants_.reduced_smoothness.empty()) set_reduced_smoothness(constants_.reduced_smoothness);
  mu_ = inner_->strong_convexity_constants();
  if (!(sigma() > 0.0)) throw InvariantError("sigma = sum b_i mu_i must be positive");
}

void CompositeProblem::set_reduced_smoothness(std::vector<double> l) {
  if (l.size() != num_components()) throw InvariantError("need one l_i per component");
  for (double v : l) {
    if (!(v > 0.0)) throw InvariantError("reduced constants l_i must be positive");
  }
  constants_.reduced_smoothness = std::move(l);
}

double CompositeProblem::sigma() const {
  return strong_convexity_constant(constants_.lower_partials, mu_);
}

double CompositeProblem::l_prime() const {
  const auto l = inner_->smoothness_constants();
  double s = 0.0;
  for (Index i = 0; i < l.size(); ++i) s += constants_.upper_partials[i] * l[i];
  return std::max(constants_.smoothness, s);
}

double CompositeProblem::reduced_l_prime() const {
  if (constants_.reduced_smoothness.empty()) {
    throw InvariantError("reduced estimator needs the constants l_i");
  }
  double s = 0.0;
  for (double v : constants_.reduced_smoothness) s += v;
  return std::max(constants_.smoothness, s);
}

Vector CompositeProblem::inner_values(const Vector& x) const {
  const Index m = num_components();
  Vector y(static_cast<Eigen::Index>(m));
  for (Index i = 0; i < m; ++i) y[static_cast<Eigen::Index>(i)] = inner_->component_value(i, x);
  return y;
}

Vector CompositeProblem::inner_values(const Vector& x, OracleCounter& counter) const {
  counter.record_values(num_components());
  return inner_values(x);
}

double CompositeProblem::value(const Vector& x) const { return outer_->value(inner_values(x)); }

double CompositeProblem::hat_value(const Vector& x) const {
  return value(x) - 0.5 * sigma() * x.squaredNorm();
}

void CompositeProblem::gradient(const Vector& x, Vector& out) const {
  Vector p;
  outer_->gradient(inner_values(x), p);
  Vector g(static_cast<Eigen::Index>(dimension()));
  out.setZero(static_cast<Eigen::Index>(dimension()));
  for (Index i = 0; i < num_components(); ++i) {
    inner_->component_gradient(i, x, g);
    out += p[static_cast<Eigen::Index>(i)] * g;
  }
}

void CompositeProblem::full_gradient(const Vector& x, OracleCounter& counter, Vector& out) const {
  const Index m = num_components();
  Vector p;
  outer_->gradient(inner_values(x, counter), p);
  counter.record_partials(m);
  Vector g(static_cast<Eigen::Index>(dimension()));
  out.setZero(static_cast<Eigen::Index>(dimension()));
  for (Index i = 0; i < m; ++i) {
    grad_component(*inner_, counter, i, x, g);
    out += p[static_cast<Eigen::Index>(i)] * g;
  }
}

Vector CompositeProblem::hat_component_gradient(Index i, const Vector& x) const {
  Vector g(static_cast<Eigen::Index>(dimension()));
  inner_->component_gradient(i, x, g);
  const double p = outer_->partial(i, inner_values(x));
  return p * g - constants_.lower_partials[i] * mu_[i] * x;
}

bool CompositeProblem::hessian(const Vector& x, Matrix& out) const {
  const Index m = num_components();
  const auto n = static_cast<Eigen::Index>(dimension());
  const Vector y = inner_values(x);
  Vector p;
  outer_->gradient(y, p);
  Matrix jac(static_cast<Eigen::Index>(m), n);
  Vector g(n);
  Matrix hi(n, n);
  out.setZero(n, n);
  for (Index i = 0; i < m; ++i) {
    if (!inner_->component_hessian(i, x, hi)) return false;
    out += p[static_cast<Eigen::Index>(i)] * hi;
    inner_->component_gradient(i, x, g);
    jac.row(static_cast<Eigen::Index>(i)) = g.transpose();
  }
  out += jac.transpose() * outer_->hessian(y) * jac;
  return true;
}

double strong_convexity_constant(std::span<const double> lower_partials,
                                 std::span<const double> strong_convexity) {
  if (lower_partials.size() != strong_convexity.size()) {
    throw InvariantError("b and mu lists differ in length");
  }
  double s = 0.0;
  for (Index i = 0; i < lower_partials.size(); ++i) s += lower_partials[i] * strong_convexity[i];
  return s;
}

Vector estimator_general(const CompositeProblem& problem, const Vector& x,
                         const Matrix& snapshot_table, Index i,
                         const SamplingDistribution& distribution) {
  const auto& inner = problem.inner();
  Vector p;
  problem.outer().gradient(problem.inner_values(x), p);
  const auto mu = inner.strong_convexity_constants();
  double weighted_mu = 0.0;
  for (Index j = 0; j < mu.size(); ++j) weighted_mu += p[static_cast<Eigen::Index>(j)] * mu[j];
  Vector g(x.size());
  inner.component_gradient(i, x, g);
  g -= mu[i] * x;
  const auto ii = static_cast<Eigen::Index>(i);
  return snapshot_table * p + weighted_mu * x +
         (p[ii] / distribution.probability(i)) * (g - snapshot_table.col(ii)) - problem.sigma() * x;
}

Vector estimator_reduced(const CompositeProblem& problem, const Vector& x, const Vector& x_tilde,
                         const Vector& hat_gradient_tilde, Index i,
                         const SamplingDistribution& distribution) {
  return hat_gradient_tilde + (problem.hat_component_gradient(i, x) -
                               problem.hat_component_gradient(i, x_tilde)) /
                                  distribution.probability(i);
}

namespace {

Vector hat_gradient(const CompositeProblem& problem, const Vector& x) {
  Vector g;
  problem.gradient(x, g);
  return g - problem.sigma() * x;
}

double bregman_hat(const CompositeProblem& problem, const Vector& x, const Vector& x_tilde) {
  return problem.hat_value(x_tilde) - problem.hat_value(x) -
         hat_gradient(problem, x).dot(x_tilde - x);
}

Matrix hat_table(const CompositeProblem& problem, const Vector& x) {
  const auto& inner = problem.inner();
  Matrix t(x.size(), static_cast<Eigen::Index>(inner.num_components()));
  Vector g(x.size());
  for (Index j = 0; j < inner.num_components(); ++j) {
    inner.component_gradient(j, x, g);
    t.col(static_cast<Eigen::Index>(j)) = g - inner.component_spec(j).strong_convexity * x;
  }
  return t;
}

}  // namespace

VarianceCheck variance_check_general(const CompositeProblem& problem, const Vector& x,
                                     const Vector& x_tilde) {
  const auto l = problem.inner().smoothness_constants();
  const auto& ub = problem.constants().upper_partials;
  const auto dist = katyusha_distribution(ub, l);
  const Matrix table = hat_table(problem, x_tilde);
  const Vector exact = hat_gradient(problem, x);
  VarianceCheck v;
  for (Index i = 0; i < l.size(); ++i) {
    v.lhs += dist.probability(i) *
             (estimator_general(problem, x, table, i, dist) - exact).squaredNorm();
  }
  double s = 0.0;
  for (Index i = 0; i < l.size(); ++i) s += ub[i] * l[i];
  v.rhs = 2.0 * s * bregman_hat(problem, x, x_tilde);
  return v;
}

VarianceCheck variance_check_reduced(const CompositeProblem& problem, const Vector& x,
                                     const Vector& x_tilde) {
  const auto& l = problem.constants().reduced_smoothness;
  if (l.empty()) throw InvariantError("reduced estimator needs the constants l_i");
  const auto dist = reduced_distribution(l);
  const Vector tilde_grad = hat_gradient(problem, x_tilde);
  const Vector exact = hat_gradient(problem, x);
  VarianceCheck v;
  double s = 0.0;
  for (Index i = 0; i < l.size(); ++i) {
    v.lhs += dist.probability(i) *
             (estimator_reduced(problem, x, x_tilde, tilde_grad, i, dist) - exact).squaredNorm();
    s += l[i];
  }
  v.rhs = 2.0 * s * bregman_hat(problem, x, x_tilde);
  return v;
}

std::pair<Vector, Vector> gauss_legendre_unit(Index points) {
  if (points == 0) throw InvariantError("quadrature needs at least one point");
  const auto n = static_cast<Eigen::Index>(points);
  // Golub-Welsch: eigen-decomposition of the Legendre Jacobi matrix
  Matrix jac = Matrix::Zero(n, n);
  for (Eigen::Index k = 1; k < n; ++k) {
    const double kd = static_cast<double>(k);
    const double beta = kd / std::sqrt(4.0 * kd * kd - 1.0);
    jac(k, k - 1) = beta;
    jac(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jac);
  Vector nodes = (es.eigenvalues().array() + 1.0) / 2.0;
  Vector weights = es.eigenvectors().row(0).transpose().array().square();
  return {nodes, weights};
}

double assumption3_slack(const CompositeProblem& problem, Index i, const Vector& x,
                         const Vector& y, double l) {
  static const auto rule = gauss_legendre_unit(64);
  const Vector d = y - x;
  const Vector gx = problem.hat_component_gradient(i, x);
  double integral = 0.0;
  for (Eigen::Index k = 0; k < rule.first.size(); ++k) {
    const Vector z = x + rule.first[k] * d;
    integral += rule.second[k] * (problem.hat_component_gradient(i, z) - gx).dot(d);
  }
  const double lhs = (problem.hat_component_gradient(i, y) - gx).squaredNorm();
  return 2.0 * l * integral - lhs;
}

Vector sample_in_region(const CompositeProblem& problem, SeededRng& rng, double radius) {
  const auto& set = problem.feasible_set();
  Vector center = Vector::Zero(static_cast<Eigen::Index>(problem.dimension()));
  if (set.kind() == FeasibleSet::Kind::ball) {
    center = set.center();
    radius = set.radius();
  }
  Vector dir(center.size());
  for (Eigen::Index j = 0; j < dir.size(); ++j) dir[j] = rng.normal();
  const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(dir.size()));
  return center + r * dir / dir.norm();
}

Assumption3Report certify_assumption3(const CompositeProblem& problem, std::span<const double> l,
                                      Index samples, std::uint64_t seed, double tol) {
  if (l.size() != problem.num_components()) throw InvariantError("need one l_i per component");
  SeededRng rng(seed);
  Assumption3Report r;
  for (Index s = 0; s < samples; ++s) {
    const Index i = rng.below(problem.num_components());
    const Vector x = sample_in_region(problem, rng);
    const Vector y = sample_in_region(problem, rng);
    const double lhs_scale =
        (problem.hat_component_gradient(i, y) - problem.hat_component_gradient(i, x)).squaredNorm();
    const double slack = assumption3_slack(problem, i, x, y, l[i]);
    r.worst_slack = std::min(r.worst_slack, slack / (1.0 + lhs_scale));
    if (slack < -tol * (1.0 + lhs_scale)) r.certified = false;
    ++r.samples;
  }
  return r;
}

std::optional<std::vector<double>> estimate_reduced_smoothness(const CompositeProblem& problem,
                                                                Index samples, std::uint64_t seed,
                                                                double safety) {
  static const auto rule = gauss_legendre_unit(64);
  const Index m = problem.num_components();
  SeededRng rng(seed);
  std::vector<double> l(m, 0.0);
  for (Index i = 0; i < m; ++i) {
    for (Index s = 0; s < samples; ++s) {
      const Vector x = sample_in_region(problem, rng);
      const Vector y = sample_in_region(problem, rng);
      const Vector d = y - x;
      const Vector gx = problem.hat_component_gradient(i, x);
      double integral = 0.0;
      for (Eigen::Index k = 0; k < rule.first.size(); ++k) {
        integral += rule.second[k] *
                    (problem.hat_component_gradient(i, x + rule.first[k] * d) - gx).dot(d);
      }
      const double lhs = (problem.hat_component_gradient(i, y) - gx).squaredNorm();
      if (integral <= 0.0) {
        if (lhs > 1e-14) return std::nullopt;
        continue;
      }
      l[i] = std::max(l[i], lhs / (2.0 * integral));
    }
    l[i] = std::max(l[i] * safety, std::numeric_limits<double>::min());
  }
  return l;
}

GeneralCompositeEstimator::GeneralCompositeEstimator(const CompositeProblem& problem)
    : problem_(problem),
      dist_(katyusha_distribution(problem.constants().upper_partials,
                                  problem.inner().smoothness_constants())) {
  g_.resize(static_cast<Eigen::Index>(problem.dimension()));
}

void GeneralCompositeEstimator::take_snapshot(const Vector& x_tilde, OracleCounter& counter) {
  kernels::gradient_table(problem_.inner(), counter, x_tilde, true, table_);
}

void GeneralCompositeEstimator::estimate(const Vector& x, Index i, OracleCounter& counter,
                                         Vector& out) {
  const auto& inner = problem_.inner();
  const Index m = inner.num_components();
  Vector p;
  problem_.outer().gradient(problem_.inner_values(x, counter), p);
  counter.record_partials(m);
  double weighted_mu = 0.0;
  for (Index j = 0; j < m; ++j) {
    weighted_mu += p[static_cast<Eigen::Index>(j)] * inner.component_spec(j).strong_convexity;
  }
  hat_grad_component(inner, counter, i, x, g_);
  const auto ii = static_cast<Eigen::Index>(i);
  out = table_ * p;
  out += (weighted_mu - problem_.sigma()) * x;
  out += (p[ii] / dist_.probability(i)) * (g_ - table_.col(ii));
}

ReducedCompositeEstimator::ReducedCompositeEstimator(const CompositeProblem& problem)
    : problem_(problem), dist_(reduced_distribution(problem.constants().reduced_smoothness)) {
  g_.resize(static_cast<Eigen::Index>(problem.dimension()));
}

void ReducedCompositeEstimator::take_snapshot(const Vector& x_tilde, OracleCounter& counter) {
  const auto& inner = problem_.inner();
  const Index m = inner.num_components();
  x_tilde_ = x_tilde;
  problem_.outer().gradient(problem_.inner_values(x_tilde, counter), partials_tilde_);
  counter.record_partials(m);
  hat_gradient_tilde_ = -problem_.sigma() * x_tilde;
  for (Index j = 0; j < m; ++j) {
    grad_component(inner, counter, j, x_tilde, g_);
    hat_gradient_tilde_ += partials_tilde_[static_cast<Eigen::Index>(j)] * g_;
  }
}

void ReducedCompositeEstimator::estimate(const Vector& x, Index i, OracleCounter& counter,
                                         Vector& out) {
  const auto& inner = problem_.inner();
  const double shift = problem_.constants().lower_partials[i] * inner.component_spec(i).strong_convexity;
  const double p = problem_.outer().partial(i, problem_.inner_values(x, counter));
  counter.record_partials(1);
  grad_component(inner, counter, i, x, g_);
  out = p * g_ - shift * x;
  grad_component(inner, counter, i, x_tilde_, g_);
  out -= partials_tilde_[static_cast<Eigen::Index>(i)] * g_ - shift * x_tilde_;
  out /= dist_.probability(i);
  out += hat_gradient_tilde_;
}

GradientOracle composite_gradient_oracle(const CompositeProblem& problem) {
  GradientOracle o;
  o.dimension = problem.dimension();
  o.num_components = problem.num_components();
  o.smoothness = problem.constants().smoothness;
  o.strong_convexity = problem.sigma();
  o.set = problem.feasible_set();
  o.gradient = [&problem](const Vector& x, OracleCounter& c, Vector& out) {
    problem.full_gradient(x, c, out);
  };
  return o;
}

ReferenceSolution composite_reference(const CompositeProblem& problem, double max_passes) {
  Evaluator inert;
  inert.objective = [](const Vector&) { return 0.0; };
  RunOptions opts;
  opts.stop.max_passes = max_passes;
  ReferenceSolution out;
  out.minimizer = run_agd(composite_gradient_oracle(problem), 1.0, inert, opts).final_iterate;

  const auto& set = problem.feasible_set();
  Vector g;
  Matrix h;
  for (int it = 0; it < 30; ++it) {
    problem.gradient(out.minimizer, g);
    if (g.norm() <= 1e-13 * std::max(1.0, std::abs(problem.value(out.minimizer)))) break;
    if (!problem.hessian(out.minimizer, h)) break;
    const Vector candidate = set.project(out.minimizer - h.ldlt().solve(g));
    if (!(problem.value(candidate) <= problem.value(out.minimizer))) break;
    out.minimizer = candidate;
  }
  out.value = problem.value(out.minimizer);
  problem.gradient(out.minimizer, g);
  out.gradient_norm = g.norm();
  return out;
}

Evaluator composite_evaluator(const CompositeProblem& problem, const ReferenceSolution& reference) {
  Evaluator e;
  e.objective = [&problem](const Vector& x) { return problem.value(x); };
  e.reference_value = reference.value;
  e.optimum = reference.minimizer;
  e.best_seen = true;
  return e;
}

CompositeProblem make_quadratic_composite(const QuadraticCompositeOptions& options) {
  const Index m = options.m;
  const Index n = options.n;
  if (m == 0 || n == 0) throw InvariantError("need m >= 1 and n >= 1");
  if (!(options.mu > 0.0 && options.mu <= 1.0)) throw InvariantError("mu must lie in (0, 1]");
  if (!(options.off_diagonal >= 0.0 && options.off_diagonal <= 1.0)) {
    throw InvariantError("off_diagonal must lie in [0, 1]");
  }
  const auto ni = static_cast<Eigen::Index>(n);
  const auto mi = static_cast<Eigen::Index>(m);
  SeededRng rng(options.seed);

  std::vector<QuadraticFiniteSum::Component> comps;
  std::vector<Vector> centers;
  Vector offsets(mi);
  double max_center = 0.0;
  for (Index i = 0; i < m; ++i) {
    Vector eig(ni);
    for (Eigen::Index j = 0; j < ni; ++j) eig[j] = rng.uniform();
    Eigen::Index k;
    eig.minCoeff(&k);
    eig[k] = options.mu;
    const Matrix q = random_orthogonal(n, rng);
    Matrix p = q * eig.asDiagonal() * q.transpose();
    p = 0.5 * (p + p.transpose());
    Vector c(ni);
    for (Eigen::Index j = 0; j < ni; ++j) c[j] = rng.normal() / std::sqrt(static_cast<double>(n));
    const double r = 1.0 + rng.uniform();
    QuadraticFiniteSum::Component comp;
    comp.linear = -(p * c);
    comp.offset = 0.5 * c.dot(p * c) + r;
    comp.hessian = std::move(p);
    comps.push_back(std::move(comp));
    max_center = std::max(max_center, c.norm());
    centers.push_back(std::move(c));
    offsets[static_cast<Eigen::Index>(i)] = r;
  }
  auto inner = std::make_shared<QuadraticFiniteSum>(std::move(comps));
  const double radius = max_center + 1.0;
  inner->set_feasible_set(FeasibleSet::ball(Vector::Zero(ni), radius));

  Matrix mm(mi, mi);
  for (Eigen::Index a = 0; a < mi; ++a) {
    for (Eigen::Index b = 0; b < mi; ++b) mm(a, b) = rng.uniform();
  }
  Matrix full = mm * mm.transpose() / static_cast<double>(m * m);
  full = 0.5 * (full + full.transpose());
  Matrix qmat = options.off_diagonal * full;
  qmat.diagonal() += (1.0 - options.off_diagonal) * full.diagonal();
  auto outer = std::make_shared<QuadraticOuter>(qmat);

  // bounds over the ball |x| <= R
  const auto l = inner->smoothness_constants();
  Vector g_max(mi);
  Vector grad_max(mi);
  for (Index i = 0; i < m; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double reach = radius + centers[i].norm();
    g_max[ii] = 0.5 * l[i] * reach * reach + offsets[ii];
    grad_max[ii] = l[i] * reach;
  }
  CompositeConstants cc;
  const Vector lower = 2.0 * (qmat * offsets);
  const Vector upper = 2.0 * (qmat * g_max);
  Matrix weighted = Matrix::Zero(ni, ni);
  for (Index i = 0; i < m; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    cc.lower_partials.push_back(lower[ii]);
    cc.upper_partials.push_back(upper[ii]);
    weighted += upper[ii] * inner->component(i).hessian;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> ew(weighted, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Matrix> eq(qmat, Eigen::EigenvaluesOnly);
  cc.smoothness = ew.eigenvalues().maxCoeff() +
                  2.0 * eq.eigenvalues().maxCoeff() * grad_max.squaredNorm();
  if (options.off_diagonal == 0.0) {
    // grad^_i F is the gradient of Q_ii g_i^2 - (b_i mu_i/2)|x|^2, convex
    // because 2 Q_ii g_i >= b_i; its Hessian is bounded on the ball
    for (Index i = 0; i < m; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      cc.reduced_smoothness.push_back(2.0 * qmat(ii, ii) *
                                      (g_max[ii] * l[i] + grad_max[ii] * grad_max[ii]));
    }
  }
  std::ostringstream region;
  region << "ball(0, " << radius << ")";
  cc.region = region.str();
  return CompositeProblem(outer, inner, std::move(cc));
}

}  // namespace hetvr
