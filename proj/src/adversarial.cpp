#include "hetvr/adversarial.hpp"

#include <cmath>
#include <sstream>

#include "hetvr/kernels.hpp"

namespace hetvr {

void tridiag_apply(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) {
  const Eigen::Index d = x.size();
  for (Eigen::Index j = 0; j < d; ++j) {
    double v = 2.0 * x[j];
    if (j > 0) v -= x[j - 1];
    if (j + 1 < d) v -= x[j + 1];
    out[j] = v;
  }
}

Vector tridiag_apply(const Eigen::Ref<const Vector>& x) {
  Vector out(x.size());
  tridiag_apply(x, out);
  return out;
}

double chain_ratio(double kappa) {
  if (!(kappa >= 1.0)) throw InvariantError("condition number must be >= 1");
  const double r = std::sqrt(kappa);
  return (r - 1.0) / (r + 1.0);
}

Index truncation_dimension(double q, double tol) {
  if (!(tol > 0.0 && tol < 1.0)) throw InvariantError("truncation tolerance must lie in (0, 1)");
  if (q <= 0.0) return 1;
  if (q >= 1.0) throw InvariantError("chain ratio must be < 1");
  Index d = static_cast<Index>(std::floor(std::log(tol) / (2.0 * std::log(q)))) + 1;
  while (d > 1 && std::pow(q, 2.0 * static_cast<double>(d - 1)) < tol) --d;
  while (std::pow(q, 2.0 * static_cast<double>(d)) >= tol) ++d;
  return d;
}

namespace {

// ((c/8) (x'Ax - 2 s x_1)) and its gradient (c/4)(Ax - s e_1)
double chain_value(const Eigen::Ref<const Vector>& x, double c, double s) {
  if (x.size() == 0) return 0.0;
  return c / 8.0 * (x.dot(tridiag_apply(x)) - 2.0 * s * x[0]);
}

void add_chain_gradient(const Eigen::Ref<const Vector>& x, double c, double s,
                        Eigen::Ref<Vector> out) {
  if (x.size() == 0) return;
  Vector ax = tridiag_apply(x);
  ax[0] -= s;
  out += (c / 4.0) * ax;
}

Vector geometric(Index d, double q, double scale) {
  Vector v(d);
  double p = q;
  for (Index j = 0; j < d; ++j) {
    v[j] = scale * p;
    p *= q;
  }
  return v;
}

}  // namespace

ChainQuadratic::ChainQuadratic(Index d, double smoothness, double strong_convexity, double gamma)
    : d_(d), l_(smoothness), mu_(strong_convexity), gamma_(gamma) {
  if (d == 0) throw InvariantError("chain dimension must be positive");
  ComponentSpec{smoothness, strong_convexity}.validate();
  if (!(strong_convexity > 0.0)) throw InvariantError("chain needs mu > 0");
  q_ = chain_ratio(l_ / mu_);
}

double ChainQuadratic::value(const Eigen::Ref<const Vector>& x) const {
  return chain_value(x, l_ - mu_, gamma_) + 0.5 * mu_ * x.squaredNorm();
}

void ChainQuadratic::gradient(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) const {
  out = mu_ * x;
  add_chain_gradient(x, l_ - mu_, gamma_, out);
}

Vector ChainQuadratic::optimum() const { return geometric(d_, q_, gamma_); }

FiniteSumAdversarialInstance::FiniteSumAdversarialInstance(std::vector<double> smoothness,
                                                           std::vector<double> strong_convexity,
                                                           Index d)
    : l_(std::move(smoothness)), mu_(std::move(strong_convexity)), mu_total_(0.0), d_(d) {
  if (l_.empty() || l_.size() != mu_.size()) {
    throw InvariantError("need matching nonempty L and mu lists");
  }
  if (d_ == 0) throw InvariantError("block length must be positive");
  for (Index i = 0; i < l_.size(); ++i) {
    ComponentSpec{l_[i], mu_[i]}.validate();
    mu_total_ += mu_[i];
  }
  if (!(mu_total_ > 0.0)) throw InvariantError("sum of mu_i must be positive");
  for (Index i = 0; i < l_.size(); ++i) {
    nu_.push_back((l_[i] - mu_[i]) / mu_total_ + 1.0);
    q_.push_back(chain_ratio(nu_.back()));
    gamma_.push_back(q_.back() > 0.0 ? std::sqrt(1.0 - q_.back() * q_.back()) / q_.back() : 0.0);
  }
}

Eigen::Ref<const Vector> FiniteSumAdversarialInstance::block(const Vector& x, Index i) const {
  return x.segment(static_cast<Eigen::Index>(i * d_), static_cast<Eigen::Index>(d_));
}

double FiniteSumAdversarialInstance::component_value(Index i, const Vector& x) const {
  return chain_value(block(x, i), l_[i] - mu_[i], gamma_[i]) + 0.5 * mu_[i] * x.squaredNorm();
}

void FiniteSumAdversarialInstance::component_gradient(Index i, const Vector& x,
                                                      Eigen::Ref<Vector> out) const {
  out = mu_[i] * x;
  add_chain_gradient(block(x, i), l_[i] - mu_[i], gamma_[i],
                     out.segment(static_cast<Eigen::Index>(i * d_), static_cast<Eigen::Index>(d_)));
}

std::optional<Vector> FiniteSumAdversarialInstance::known_optimum() const {
  if (!feasible_set().is_whole_space()) return std::nullopt;
  return closed_form_optimum(*this);
}

Vector closed_form_optimum(const FiniteSumAdversarialInstance& instance) {
  const Index d = instance.block_length();
  Vector x(instance.dimension());
  for (Index i = 0; i < instance.num_components(); ++i) {
    x.segment(static_cast<Eigen::Index>(i * d), static_cast<Eigen::Index>(d)) =
        geometric(d, instance.q(i), instance.gamma(i));
  }
  return x;
}

FiniteSumAdversarialInstance build_finite_sum_instance(std::span<const double> smoothness,
                                                       std::span<const double> strong_convexity,
                                                       Index d, double tol) {
  if (smoothness.empty() || smoothness.size() != strong_convexity.size()) {
    throw InvariantError("need matching nonempty L and mu lists");
  }
  const Index m = smoothness.size();
  double mu = 0.0;
  for (double v : strong_convexity) mu += v;
  for (Index i = 0; i < m; ++i) {
    if (!(smoothness[i] - strong_convexity[i] > mu / static_cast<double>(m))) {
      std::ostringstream msg;
      msg << "L_i - mu_i > mu/m fails at i = " << i << ": " << smoothness[i] - strong_convexity[i]
          << " <= " << mu / static_cast<double>(m);
      throw InvariantError(msg.str());
    }
  }
  FiniteSumAdversarialInstance probe({smoothness.begin(), smoothness.end()},
                                     {strong_convexity.begin(), strong_convexity.end()}, 1);
  double q_max = 0.0;
  for (Index i = 0; i < m; ++i) q_max = std::max(q_max, probe.q(i));
  const Index needed = truncation_dimension(q_max, tol);
  const bool automatic = d == 0;
  if (automatic) d = needed;
  if (d < needed) {
    std::ostringstream msg;
    msg << "block length " << d << " leaves q^(2d) >= " << tol << "; need at least " << needed;
    throw InvariantError(msg.str());
  }
  auto make = [&](Index len) {
    return FiniteSumAdversarialInstance({smoothness.begin(), smoothness.end()},
                                        {strong_convexity.begin(), strong_convexity.end()}, len);
  };
  if (!automatic) return make(d);
  // the cut tail leaves a residual of order (L - mu) gamma q^(d+1); extend
  // until it is negligible
  const Index step = std::max<Index>(1, needed / 8);
  for (Index len = d;; len += step) {
    auto inst = make(len);
    const Vector xs = closed_form_optimum(inst);
    Vector g;
    kernels::serial::full_gradient(inst, xs, g);
    if (g.norm() <= kOptimalityResidual || len >= 8 * needed) return inst;
  }
}

DualAdversarialInstance::DualAdversarialInstance(std::vector<double> smoothness,
                                                 std::vector<double> strong_convexity, Index d)
    : l_(std::move(smoothness)), mu_(std::move(strong_convexity)), d_(d) {
  const Index m = mu_.size();
  if (m < 2 || l_.size() != m) throw InvariantError("need matching L and mu lists with m >= 2");
  if (d_ == 0) throw InvariantError("block length must be positive");
  for (Index i = 0; i < m; ++i) {
    ComponentSpec{l_[i], mu_[i]}.validate();
    if (!(mu_[i] > 0.0)) throw InvariantError("every block needs mu_i > 0");
  }
  for (Index k = 0; k < pairs(); ++k) {
    const Index a = 2 * k;
    const Index b = 2 * k + 1;
    const double kappa = l_[b] / mu_[b];
    if (!(kappa > 1.0)) {
      throw InvariantError("pair " + std::to_string(k) + " needs L/mu > 1 on its second member");
    }
    q_.push_back(chain_ratio(kappa));
    gamma_.push_back(std::sqrt(1.0 - q_.back() * q_.back()) / q_.back() *
                     std::sqrt(2.0 / mu_[b]));
    l_[a] = mu_[a] * kappa;
  }
  if (m % 2 == 1) l_[m - 1] = mu_[m - 1];
}

double DualAdversarialInstance::component_value(Index i, const Vector& p) const {
  double v = 0.5 * mu_[i] * p.squaredNorm();
  const Index k = i / 2;
  if (k >= pairs()) return v;
  const Index b = 2 * k + 1;
  const auto blk = p.segment(static_cast<Eigen::Index>(k * d_), static_cast<Eigen::Index>(d_));
  const double c = (l_[b] - mu_[b]) * (i == b ? 1.0 : mu_[i] / mu_[b]);
  return v + chain_value(blk, c, i == b ? -gamma_[k] : gamma_[k]);
}

void DualAdversarialInstance::component_gradient(Index i, const Vector& p,
                                                 Eigen::Ref<Vector> out) const {
  out = mu_[i] * p;
  const Index k = i / 2;
  if (k >= pairs()) return;
  const Index b = 2 * k + 1;
  const double c = (l_[b] - mu_[b]) * (i == b ? 1.0 : mu_[i] / mu_[b]);
  const auto seg = [&](auto& v) {
    return v.segment(static_cast<Eigen::Index>(k * d_), static_cast<Eigen::Index>(d_));
  };
  add_chain_gradient(seg(p), c, i == b ? -gamma_[k] : gamma_[k], seg(out));
}

Matrix DualAdversarialInstance::optimum_blocks() const {
  Matrix p = Matrix::Zero(static_cast<Eigen::Index>(dimension()),
                          static_cast<Eigen::Index>(num_components()));
  for (Index k = 0; k < pairs(); ++k) {
    const Vector chain = geometric(d_, q_[k], gamma_[k]);
    const auto off = static_cast<Eigen::Index>(k * d_);
    const auto len = static_cast<Eigen::Index>(d_);
    p.col(static_cast<Eigen::Index>(2 * k)).segment(off, len) = chain;
    p.col(static_cast<Eigen::Index>(2 * k + 1)).segment(off, len) = -chain;
  }
  return p;
}

double DualAdversarialInstance::optimal_value() const {
  const Matrix p = optimum_blocks();
  double v = 0.0;
  for (Index i = 0; i < num_components(); ++i) v += component_value(i, p.col(i));
  return v;
}

DualAdversarialInstance build_dual_instance(std::span<const double> smoothness,
                                            std::span<const double> strong_convexity, Index d,
                                            double tol) {
  DualAdversarialInstance probe({smoothness.begin(), smoothness.end()},
                                {strong_convexity.begin(), strong_convexity.end()}, 1);
  double q_max = 0.0;
  for (Index k = 0; k < probe.pairs(); ++k) q_max = std::max(q_max, probe.q(k));
  const Index needed = truncation_dimension(q_max, tol);
  const bool automatic = d == 0;
  if (automatic) d = needed;
  if (d < needed) {
    std::ostringstream msg;
    msg << "block length " << d << " leaves q^(2d) >= " << tol << "; need at least " << needed;
    throw InvariantError(msg.str());
  }
  auto make = [&](Index len) {
    return DualAdversarialInstance({smoothness.begin(), smoothness.end()},
                                   {strong_convexity.begin(), strong_convexity.end()}, len);
  };
  if (!automatic) return make(d);
  const Index step = std::max<Index>(1, needed / 8);
  for (Index len = d;; len += step) {
    auto inst = make(len);
    const Matrix p = inst.optimum_blocks();
    Vector g(inst.dimension());
    double worst = 0.0;
    for (Index i = 0; i < inst.num_components(); ++i) {
      inst.component_gradient(i, p.col(static_cast<Eigen::Index>(i)), g);
      worst = std::max(worst, g.norm());
    }
    if (worst <= kOptimalityResidual || len >= 8 * needed) return inst;
  }
}

Index prefix_nonzero(const Eigen::Ref<const Vector>& x, double tol) {
  for (Eigen::Index j = x.size(); j > 0; --j) {
    if (std::abs(x[j - 1]) > tol) return static_cast<Index>(j);
  }
  return 0;
}

namespace {

// Least K with floor_scale * q^(2K) <= gap.
double queries_needed(double floor_scale, double q, double gap) {
  if (q <= 0.0 || gap >= floor_scale) return 0.0;
  if (gap <= 0.0) return std::numeric_limits<double>::infinity();
  return std::ceil(std::log(floor_scale / gap) / (2.0 * std::log(1.0 / q)));
}

}  // namespace

LowerBoundReport audit_lower_bound(const FiniteSumAdversarialInstance& instance,
                                   std::span<const std::uint64_t> queries, const Vector& x,
                                   double slack) {
  const Index m = instance.num_components();
  if (queries.size() != m) throw std::invalid_argument("need one query count per component");
  const auto opt = closed_form_optimum(instance);
  LowerBoundReport r;
  for (Index i = 0; i < m; ++i) {
    r.gap += instance.component_value(i, x) - instance.component_value(i, opt);
  }
  const double half_mu = 0.5 * instance.mu_total();
  for (Index i = 0; i < m; ++i) {
    BlockAudit a;
    a.block = i;
    a.queries = queries[i];
    a.support = prefix_nonzero(instance.block(x, i));
    a.floor = half_mu * std::pow(instance.q(i), 2.0 * static_cast<double>(queries[i]));
    a.zero_chain_violation = a.support > a.queries;
    r.zero_chain_respected = r.zero_chain_respected && !a.zero_chain_violation;
    r.floor = std::max(r.floor, a.floor);
    r.required_queries += queries_needed(half_mu, instance.q(i), r.gap);
    r.total_queries += queries[i];
    r.blocks.push_back(a);
  }
  r.floor_respected = r.gap >= r.floor - slack;
  return r;
}

LowerBoundReport audit_lower_bound(const DualAdversarialInstance& instance,
                                   std::span<const std::uint64_t> queries, const Matrix& p,
                                   double slack) {
  const Index m = instance.num_components();
  if (queries.size() != m || static_cast<Index>(p.cols()) != m) {
    throw std::invalid_argument("need one query count and one block per component");
  }
  LowerBoundReport r;
  for (Index i = 0; i < m; ++i) r.gap += instance.component_value(i, p.col(i));
  r.gap -= instance.optimal_value();
  const Index d = instance.block_length();
  for (Index k = 0; k < instance.pairs(); ++k) {
    BlockAudit a;
    a.block = k;
    a.queries = queries[2 * k] + queries[2 * k + 1];
    for (Index i = 0; i < m; ++i) {
      const auto seg = p.col(static_cast<Eigen::Index>(i))
                           .segment(static_cast<Eigen::Index>(k * d), static_cast<Eigen::Index>(d));
      a.support = std::max(a.support, prefix_nonzero(seg));
    }
    a.floor = std::pow(instance.q(k), 2.0 * static_cast<double>(a.queries));
    a.zero_chain_violation = a.support > a.queries;
    r.zero_chain_respected = r.zero_chain_respected && !a.zero_chain_violation;
    r.floor += a.floor;
    r.required_queries += queries_needed(1.0, instance.q(k), r.gap);
    r.blocks.push_back(a);
  }
  for (auto q : queries) r.total_queries += q;
  r.floor_respected = r.gap >= r.floor - slack;
  return r;
}

}  // namespace hetvr
