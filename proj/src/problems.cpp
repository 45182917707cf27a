#include "hetvr/problems.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace hetvr {

namespace {

void check_index(const FiniteSumProblem& problem, Index i) {
  if (i >= problem.num_components()) {
    throw std::out_of_range("component index " + std::to_string(i) + " out of range [0, " +
                            std::to_string(problem.num_components()) + ")");
  }
}

void check_dimension(const FiniteSumProblem& problem, const Vector& x) {
  if (static_cast<Index>(x.size()) != problem.dimension()) {
    throw std::invalid_argument("dimension mismatch: got " + std::to_string(x.size()) +
                                ", expected " + std::to_string(problem.dimension()));
  }
}

// log(1 + exp(t)) without overflow.
double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double sigmoid(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

void ComponentSpec::validate() const {
  if (!(smoothness > 0.0) || !std::isfinite(smoothness)) {
    throw InvariantError("component smoothness must be positive, got " +
                         std::to_string(smoothness));
  }
  if (!(strong_convexity >= 0.0) || strong_convexity > smoothness * (1.0 + 1e-12)) {
    throw InvariantError("component constants must satisfy L >= mu >= 0 (L=" +
                         std::to_string(smoothness) + ", mu=" + std::to_string(strong_convexity) +
                         ")");
  }
}

// ---------------------------------------------------------------------------
// FeasibleSet

FeasibleSet FeasibleSet::whole_space() { return FeasibleSet{}; }

FeasibleSet FeasibleSet::ball(Vector center, double radius) {
  if (!(radius > 0.0)) throw InvariantError("ball radius must be positive");
  FeasibleSet s;
  s.kind_ = Kind::ball;
  s.center_ = std::move(center);
  s.radius_ = radius;
  return s;
}

FeasibleSet FeasibleSet::box(Vector lower, Vector upper) {
  if (lower.size() != upper.size()) throw InvariantError("box bounds differ in length");
  if ((lower.array() > upper.array()).any()) throw InvariantError("box has lower > upper");
  FeasibleSet s;
  s.kind_ = Kind::box;
  s.lower_ = std::move(lower);
  s.upper_ = std::move(upper);
  return s;
}

Vector FeasibleSet::project(const Vector& x) const {
  switch (kind_) {
    case Kind::whole_space:
      return x;
    case Kind::ball: {
      const Vector d = x - center_;
      const double norm = d.norm();
      if (norm <= radius_) return x;
      return center_ + (radius_ / norm) * d;
    }
    case Kind::box:
      return x.cwiseMax(lower_).cwiseMin(upper_);
  }
  return x;
}

bool FeasibleSet::contains(const Vector& x, double tol) const {
  switch (kind_) {
    case Kind::whole_space:
      return true;
    case Kind::ball:
      return (x - center_).norm() <= radius_ + tol;
    case Kind::box:
      return ((x - lower_).array() >= -tol).all() && ((upper_ - x).array() >= -tol).all();
  }
  return true;
}

std::string FeasibleSet::describe() const {
  switch (kind_) {
    case Kind::whole_space:
      return "whole_space";
    case Kind::ball:
      return "ball";
    case Kind::box:
      return "box";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// OracleCounter

OracleCounter::OracleCounter(Index num_components)
    : size_(num_components),
      per_component_(std::make_unique<std::atomic<std::uint64_t>[]>(num_components)) {
  if (num_components == 0) throw InvariantError("oracle counter needs at least one component");
  reset();
}

std::vector<std::uint64_t> OracleCounter::gradient_snapshot() const {
  std::vector<std::uint64_t> out(size_);
  for (Index i = 0; i < size_; ++i) out[i] = gradient_calls(i);
  return out;
}

void OracleCounter::reset() {
  for (Index i = 0; i < size_; ++i) per_component_[i].store(0, std::memory_order_relaxed);
  total_.store(0);
  values_.store(0);
  partials_.store(0);
}

// ---------------------------------------------------------------------------
// FiniteSumProblem

std::vector<double> FiniteSumProblem::smoothness_constants() const {
  std::vector<double> out(num_components());
  for (Index i = 0; i < out.size(); ++i) out[i] = component_spec(i).smoothness;
  return out;
}

std::vector<double> FiniteSumProblem::strong_convexity_constants() const {
  std::vector<double> out(num_components());
  for (Index i = 0; i < out.size(); ++i) out[i] = component_spec(i).strong_convexity;
  return out;
}

double FiniteSumProblem::total_strong_convexity() const {
  double mu = 0.0;
  for (Index i = 0; i < num_components(); ++i) mu += component_spec(i).strong_convexity;
  return mu;
}

Vector grad_component(const FiniteSumProblem& problem, OracleCounter& counter, Index i,
                      const Vector& x) {
  Vector out(problem.dimension());
  grad_component(problem, counter, i, x, out);
  return out;
}

void grad_component(const FiniteSumProblem& problem, OracleCounter& counter, Index i,
                    const Vector& x, Eigen::Ref<Vector> out) {
  check_index(problem, i);
  check_dimension(problem, x);
  problem.component_gradient(i, x, out);
  counter.record_gradient(i);
}

Vector hat_grad_component(const FiniteSumProblem& problem, OracleCounter& counter, Index i,
                          const Vector& x) {
  Vector out(problem.dimension());
  hat_grad_component(problem, counter, i, x, out);
  return out;
}

void hat_grad_component(const FiniteSumProblem& problem, OracleCounter& counter, Index i,
                        const Vector& x, Eigen::Ref<Vector> out) {
  grad_component(problem, counter, i, x, out);
  out.noalias() -= problem.component_spec(i).strong_convexity * x;
}

double hat_value_component(const FiniteSumProblem& problem, Index i, const Vector& x) {
  return problem.component_value(i, x) -
         0.5 * problem.component_spec(i).strong_convexity * x.squaredNorm();
}

Vector prox_step(const Vector& x_k, const Vector& grad_estimate, double eta, double mu,
                 const FeasibleSet& set) {
  if (!(eta > 0.0)) throw InvariantError("prox_step: step size must be positive");
  if (mu < 0.0) throw InvariantError("prox_step: mu must be nonnegative");
  Vector p = (x_k - eta * grad_estimate) / (1.0 + eta * mu);
  if (set.is_whole_space()) return p;
  return set.project(p);
}

// ---------------------------------------------------------------------------
// GLM

std::string to_string(LossKind loss) {
  return loss == LossKind::squared ? "squared" : "logistic";
}

LossKind loss_from_string(const std::string& name) {
  if (name == "squared" || name == "least_squares") return LossKind::squared;
  if (name == "logistic") return LossKind::logistic;
  throw ConfigError("unknown loss kind '" + name + "'");
}

ScaledDesign scale_design_matrix(const Matrix& a, const Vector& weights, LossKind loss) {
  if (a.rows() == 0 || a.cols() == 0) throw InvariantError("scale_design_matrix: empty matrix");
  if (weights.size() != a.rows()) {
    throw InvariantError("scale_design_matrix: weights length differs from row count");
  }
  const double m = static_cast<double>(a.rows());
  const double per_row = loss == LossKind::squared ? 2.0 / m : 1.0 / (4.0 * m);
  double max_l = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    max_l = std::max(max_l, per_row * weights[i] * a.row(i).squaredNorm());
  }
  if (!(max_l > 0.0)) throw InvariantError("scale_design_matrix: zero matrix");
  const double factor = 1.0 / std::sqrt(max_l);
  return ScaledDesign{a * factor, factor};
}

WeightedGLMProblem::WeightedGLMProblem(Matrix a, Vector targets, Vector weights, double ridge,
                                       LossKind loss)
    : a_(std::move(a)), b_(std::move(targets)), w_(std::move(weights)), ridge_(ridge), loss_(loss) {
  if (a_.rows() == 0 || a_.cols() == 0) throw InvariantError("GLM: empty design matrix");
  if (b_.size() != a_.rows() || w_.size() != a_.rows()) {
    throw InvariantError("GLM: targets/weights length differs from row count");
  }
  if ((w_.array() <= 0.0).any()) throw InvariantError("GLM: weights must be positive");
  if (ridge_ < 0.0) throw InvariantError("GLM: ridge must be nonnegative");
  const double m = static_cast<double>(a_.rows());
  specs_.resize(a_.rows());
  for (Eigen::Index i = 0; i < a_.rows(); ++i) {
    const double row_sq = a_.row(i).squaredNorm();
    const double data_l = loss_ == LossKind::squared
                              ? 2.0 * w_[i] * row_sq / m
                              : w_[i] * b_[i] * b_[i] * row_sq / (4.0 * m);
    specs_[i].strong_convexity = ridge_ / m;
    specs_[i].smoothness = data_l + ridge_ / m;
    if (!(specs_[i].smoothness > 0.0)) {
      throw InvariantError("GLM: component " + std::to_string(i) + " has zero smoothness");
    }
  }
}

std::string WeightedGLMProblem::family() const {
  return loss_ == LossKind::squared ? "weighted_least_squares" : "weighted_logistic";
}

double WeightedGLMProblem::component_value(Index i, const Vector& x) const {
  const double m = static_cast<double>(a_.rows());
  const double z = a_.row(static_cast<Eigen::Index>(i)).dot(x);
  const double data = loss_ == LossKind::squared ? (z - b_[i]) * (z - b_[i])
                                                 : softplus(-b_[i] * z);
  return w_[i] / m * data + 0.5 * ridge_ / m * x.squaredNorm();
}

void WeightedGLMProblem::component_gradient(Index i, const Vector& x,
                                            Eigen::Ref<Vector> out) const {
  const double m = static_cast<double>(a_.rows());
  const auto row = a_.row(static_cast<Eigen::Index>(i));
  const double z = row.dot(x);
  const double slope = loss_ == LossKind::squared ? 2.0 * (z - b_[i])
                                                  : -b_[i] * sigmoid(-b_[i] * z);
  out.noalias() = (w_[i] / m * slope) * row.transpose();
  out.noalias() += (ridge_ / m) * x;
}

bool WeightedGLMProblem::component_hessian(Index i, const Vector& x, Matrix& out) const {
  const double m = static_cast<double>(a_.rows());
  const auto row = a_.row(static_cast<Eigen::Index>(i));
  double curvature = 2.0;
  if (loss_ == LossKind::logistic) {
    const double s = sigmoid(b_[i] * row.dot(x));
    curvature = b_[i] * b_[i] * s * (1.0 - s);
  }
  out.noalias() = (w_[i] / m * curvature) * row.transpose() * row;
  out.diagonal().array() += ridge_ / m;
  return true;
}

Vector skewed_weights(Index m) {
  Vector w = Vector::Ones(static_cast<Eigen::Index>(m));
  const auto heavy = static_cast<Index>(std::floor(std::sqrt(static_cast<double>(m))));
  for (Index i = 0; i < heavy; ++i) w[static_cast<Eigen::Index>(i)] = static_cast<double>(m);
  return w;
}

std::unique_ptr<WeightedGLMProblem> make_weighted_glm(Index m, Index n, double ridge,
                                                      LossKind loss, std::uint64_t seed) {
  if (m == 0 || n == 0) throw InvariantError("make_weighted_glm: empty dimensions");
  SeededRng rng(seed);
  Matrix a(m, n);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) a(i, j) = rng.normal();
  }
  Vector w = skewed_weights(m);
  Vector b(m);
  for (Index i = 0; i < m; ++i) {
    b[i] = loss == LossKind::squared ? rng.normal() : (rng.uniform() < 0.5 ? -1.0 : 1.0);
  }
  auto scaled = scale_design_matrix(a, w, loss);
  return std::make_unique<WeightedGLMProblem>(std::move(scaled.matrix), std::move(b),
                                              std::move(w), ridge, loss);
}

// ---------------------------------------------------------------------------
// Quadratics

QuadraticFiniteSum::QuadraticFiniteSum(std::vector<Component> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw InvariantError("quadratic finite sum: no components");
  dim_ = static_cast<Index>(components_.front().hessian.rows());
  specs_.resize(components_.size());
  for (Index i = 0; i < components_.size(); ++i) {
    auto& c = components_[i];
    if (static_cast<Index>(c.hessian.rows()) != dim_ ||
        static_cast<Index>(c.hessian.cols()) != dim_ ||
        static_cast<Index>(c.linear.size()) != dim_) {
      throw InvariantError("quadratic finite sum: component " + std::to_string(i) +
                           " has inconsistent dimensions");
    }
    c.hessian = 0.5 * (c.hessian + c.hessian.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c.hessian, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (lo < -1e-12 * std::max(1.0, hi)) {
      throw InvariantError("quadratic finite sum: component " + std::to_string(i) +
                           " is not positive semidefinite");
    }
    specs_[i].smoothness = hi;
    specs_[i].strong_convexity = std::max(lo, 0.0);
    specs_[i].validate();
  }
}

double QuadraticFiniteSum::component_value(Index i, const Vector& x) const {
  const auto& c = components_[i];
  return 0.5 * x.dot(c.hessian * x) + c.linear.dot(x) + c.offset;
}

void QuadraticFiniteSum::component_gradient(Index i, const Vector& x,
                                            Eigen::Ref<Vector> out) const {
  const auto& c = components_[i];
  out.noalias() = c.hessian * x;
  out += c.linear;
}

bool QuadraticFiniteSum::component_hessian(Index i, const Vector&, Matrix& out) const {
  out = components_[i].hessian;
  return true;
}

std::optional<Vector> QuadraticFiniteSum::known_optimum() const {
  if (!feasible_set().is_whole_space()) return std::nullopt;
  Matrix h = Matrix::Zero(dim_, dim_);
  Vector c = Vector::Zero(dim_);
  for (const auto& comp : components_) {
    h += comp.hessian;
    c += comp.linear;
  }
  Eigen::LDLT<Matrix> ldlt(h);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
  Vector x = ldlt.solve(-c);
  if (!x.allFinite()) return std::nullopt;
  return x;
}

Matrix random_orthogonal(Index n, SeededRng& rng) {
  Matrix g(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

std::unique_ptr<QuadraticFiniteSum> make_random_quadratics(Index m, Index n, double eig_lo,
                                                           double eig_hi, std::uint64_t seed) {
  if (!(eig_lo > 0.0) || eig_hi < eig_lo) {
    throw InvariantError("make_random_quadratics: need 0 < eig_lo <= eig_hi");
  }
  SeededRng rng(seed);
  std::vector<QuadraticFiniteSum::Component> comps(m);
  for (auto& c : comps) {
    Vector eig(n);
    for (Index j = 0; j < n; ++j) eig[j] = eig_lo + (eig_hi - eig_lo) * rng.uniform();
    const Matrix q = random_orthogonal(n, rng);
    c.hessian = q * eig.asDiagonal() * q.transpose();
    c.linear = Vector(n);
    for (Index j = 0; j < n; ++j) c.linear[j] = rng.normal();
  }
  return std::make_unique<QuadraticFiniteSum>(std::move(comps));
}

// ---------------------------------------------------------------------------

CallbackFiniteSum::CallbackFiniteSum(Index dimension, std::vector<Component> components)
    : dim_(dimension), components_(std::move(components)) {
  if (components_.empty()) throw InvariantError("callback finite sum: no components");
  for (const auto& c : components_) c.spec.validate();
}

Matrix load_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
        row.push_back(v);
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw ConfigError(path + ":" + std::to_string(line_no) + ": non-numeric cell");
    }
    first = false;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("CSV file '" + path + "' has no data rows");
  Matrix out(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) out(i, j) = rows[i][j];
  }
  return out;
}

}  // namespace hetvr
