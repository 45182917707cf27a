#include "hetvr/dual.hpp"

#include <cmath>
#include <sstream>

#include "hetvr/kernels.hpp"

namespace hetvr {

namespace {

std::pair<double, double> extreme_eigenvalues(const Matrix& p) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(p, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw InvariantError("eigenvalue solve failed");
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

bool certificate_line(double measured, double bound) {
  return measured <= bound * (1.0 + 1e-9) + 1e-12;
}

}  // namespace

MultiBlockProblem::MultiBlockProblem(std::vector<QuadraticBlock> blocks, Vector rhs)
    : blocks_(std::move(blocks)), rhs_(std::move(rhs)) {
  if (blocks_.empty()) throw InvariantError("multi-block problem needs at least one block");
  for (Index i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const auto n = b.hessian.rows();
    std::ostringstream where;
    where << "block " << i << ": ";
    if (b.hessian.cols() != n || b.linear.size() != n || b.coupling.cols() != n) {
      throw InvariantError(where.str() + "P, a and A disagree on the block size");
    }
    if (b.coupling.rows() != rhs_.size()) {
      throw InvariantError(where.str() + "A rows differ from the size of b");
    }
    if ((b.hessian - b.hessian.transpose()).norm() > 1e-12 * (1.0 + b.hessian.norm())) {
      throw InvariantError(where.str() + "P is not symmetric");
    }
    const auto [lo, hi] = extreme_eigenvalues(b.hessian);
    if (lo < -1e-12 * std::max(1.0, hi)) throw InvariantError(where.str() + "P is indefinite");
    mu_.push_back(std::max(lo, 0.0));
    l_.push_back(hi);
  }
}

bool MultiBlockProblem::strongly_convex() const {
  for (double m : mu_) {
    if (!(m > 0.0)) return false;
  }
  return true;
}

double MultiBlockProblem::objective(const std::vector<Vector>& y) const {
  double v = 0.0;
  for (Index i = 0; i < blocks_.size(); ++i) {
    v += 0.5 * y[i].dot(blocks_[i].hessian * y[i]) + blocks_[i].linear.dot(y[i]);
  }
  return v;
}

double MultiBlockProblem::infeasibility(const std::vector<Vector>& y) const {
  Vector r = -rhs_;
  for (Index i = 0; i < blocks_.size(); ++i) r += blocks_[i].coupling * y[i];
  return r.norm();
}

ConjugateOracle::ConjugateOracle(const QuadraticBlock& block)
    : linear_(block.linear), factor_(block.hessian) {
  if (factor_.info() != Eigen::Success) {
    throw InvariantError("block Hessian is singular; perturb the problem before dualizing");
  }
  const auto [lo, hi] = extreme_eigenvalues(block.hessian);
  if (!(lo > 1e-14 * hi)) {
    throw InvariantError("block Hessian is singular; perturb the problem before dualizing");
  }
}

Vector ConjugateOracle::gradient(const Vector& p) const { return factor_.solve(p - linear_); }

double ConjugateOracle::value(const Vector& p) const { return value_gradient(p).first; }

std::pair<double, Vector> ConjugateOracle::value_gradient(const Vector& p) const {
  const Vector s = p - linear_;
  Vector g = factor_.solve(s);
  return {0.5 * s.dot(g), std::move(g)};
}

DualProblem::DualProblem(MultiBlockProblem primal) : primal_(std::move(primal)) {
  const Index m = primal_.num_blocks();
  for (Index i = 0; i < m; ++i) {
    const auto& b = primal_.block(i);
    if (!(primal_.strong_convexity(i) > 0.0)) {
      throw InvariantError("block " + std::to_string(i) +
                           " has mu_i = 0; perturb the problem before dualizing");
    }
    conjugates_.emplace_back(b);
    Eigen::JacobiSVD<Matrix> svd(b.coupling);
    const double norm = svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
    coupling_norm_.push_back(norm);
    // lambda_min(A A') is zero when A has fewer columns than rows
    double lam_min = 0.0;
    if (b.coupling.cols() >= b.coupling.rows()) {
      lam_min = extreme_eigenvalues(b.coupling * b.coupling.transpose()).first;
      lam_min = std::max(lam_min, 0.0);
    }
    ComponentSpec spec{norm * norm / primal_.strong_convexity(i), lam_min / primal_.smoothness(i)};
    spec.strong_convexity = std::min(spec.strong_convexity, spec.smoothness);
    spec.validate();
    specs_.push_back(spec);
  }
  try {
    optimum_ = kkt_direct_solve(primal_).dual;
  } catch (const InvariantError&) {
    optimum_.reset();
  }
}

double DualProblem::component_value(Index i, const Vector& x) const {
  const auto& b = primal_.block(i);
  return conjugates_[i].value(b.coupling.transpose() * x) -
         x.dot(primal_.rhs()) / static_cast<double>(num_components());
}

void DualProblem::component_gradient(Index i, const Vector& x, Eigen::Ref<Vector> out) const {
  const auto& b = primal_.block(i);
  out = b.coupling * conjugates_[i].gradient(b.coupling.transpose() * x) -
        primal_.rhs() / static_cast<double>(num_components());
}

bool DualProblem::component_hessian(Index i, const Vector&, Matrix& out) const {
  const auto& b = primal_.block(i);
  out = b.coupling * b.hessian.ldlt().solve(b.coupling.transpose());
  return true;
}

std::unique_ptr<DualProblem> build_dual(const MultiBlockProblem& problem) {
  return std::make_unique<DualProblem>(problem);
}

PrimalRecovery recover_primal(const DualProblem& dual, const Vector& x) {
  const auto& primal = dual.primal();
  PrimalRecovery r;
  for (Index i = 0; i < primal.num_blocks(); ++i) {
    r.blocks.push_back(dual.conjugate(i).gradient(primal.block(i).coupling.transpose() * x));
  }
  r.objective = primal.objective(r.blocks);
  r.infeasibility = primal.infeasibility(r.blocks);
  return r;
}

ErrorCertificate error_certificate(const DualProblem& dual, const Vector& x,
                                   const Vector& x_star) {
  const auto& primal = dual.primal();
  const auto y = recover_primal(dual, x);
  const auto y_star = recover_primal(dual, x_star);
  const double dist = (x - x_star).norm();
  ErrorCertificate c;
  for (Index i = 0; i < primal.num_blocks(); ++i) {
    const double ratio = dual.coupling_norm(i) / primal.strong_convexity(i);
    c.block_error.push_back((y.blocks[i] - y_star.blocks[i]).norm());
    c.block_bound.push_back(ratio * dist);
    c.infeasibility_bound += ratio * dual.coupling_norm(i) * dist;
    c.holds = c.holds && certificate_line(c.block_error.back(), c.block_bound.back());
  }
  // measured against the constraint itself; x* satisfies it up to the KKT residual
  c.infeasibility = y.infeasibility;
  c.holds = c.holds && certificate_line(c.infeasibility, c.infeasibility_bound + y_star.infeasibility);
  return c;
}

double perturbation_delta(double eps, Index m, double radius) {
  if (!(eps > 0.0) || !(radius > 0.0) || m == 0) {
    throw InvariantError("perturbation needs eps > 0, D > 0 and m >= 1");
  }
  return eps / (static_cast<double>(m) * radius * radius);
}

MultiBlockProblem perturb(const MultiBlockProblem& problem, double eps, double radius) {
  const double delta = perturbation_delta(eps, problem.num_blocks(), radius);
  std::vector<QuadraticBlock> blocks;
  for (Index i = 0; i < problem.num_blocks(); ++i) {
    QuadraticBlock b = problem.block(i);
    b.hessian.diagonal().array() += delta;
    blocks.push_back(std::move(b));
  }
  return MultiBlockProblem(std::move(blocks), problem.rhs());
}

KktSolution kkt_direct_solve(const MultiBlockProblem& problem) {
  const Index m = problem.num_blocks();
  const auto nd = static_cast<Eigen::Index>(problem.dual_dimension());
  Eigen::Index total = 0;
  std::vector<Eigen::Index> offset;
  for (Index i = 0; i < m; ++i) {
    offset.push_back(total);
    total += problem.block(i).hessian.rows();
  }
  Matrix k = Matrix::Zero(total + nd, total + nd);
  Vector rhs(total + nd);
  for (Index i = 0; i < m; ++i) {
    const auto& b = problem.block(i);
    const auto ni = b.hessian.rows();
    k.block(offset[i], offset[i], ni, ni) = b.hessian;
    k.block(offset[i], total, ni, nd) = -b.coupling.transpose();
    k.block(total, offset[i], nd, ni) = b.coupling;
    rhs.segment(offset[i], ni) = -b.linear;
  }
  rhs.tail(nd) = problem.rhs();
  Eigen::FullPivLU<Matrix> lu(k);
  if (!lu.isInvertible()) throw InvariantError("KKT matrix is singular");
  const Vector sol = lu.solve(rhs);
  KktSolution s;
  for (Index i = 0; i < m; ++i) {
    s.blocks.push_back(sol.segment(offset[i], problem.block(i).hessian.rows()));
  }
  s.dual = sol.tail(nd);
  s.residual = (k * sol - rhs).norm();
  return s;
}

DualSolveResult solve_multiblock_via_dual(const MultiBlockProblem& problem,
                                          const DualSolveOptions& options) {
  const auto dual = build_dual(problem);
  const auto l = dual->smoothness_constants();
  DualSolveResult result;
  result.config = ssnm_parameters(l, dual->total_strong_convexity());
  if (options.eta_scale != 1.0 || options.lambda_scale != 1.0) {
    result.config = scale_ssnm_config(result.config, options.eta_scale, options.lambda_scale, l);
  }
  Evaluator eval;
  const DualProblem& d = *dual;
  eval.objective = [&d](const Vector& x) { return kernels::objective(d, x); };
  eval.infeasibility = [&d](const Vector& x) { return recover_primal(d, x).infeasibility; };
  if (auto opt = dual->known_optimum()) {
    eval.optimum = *opt;
    eval.reference_value = kernels::objective(d, *opt);
    if (options.check_certificates) {
      const Vector x_star = *opt;
      eval.on_record = [&d, &result, x_star](const Vector& x, const TraceRecord&) {
        const auto cert = error_certificate(d, x, x_star);
        result.certificates_held = result.certificates_held && cert.holds;
        ++result.certificates_checked;
      };
    }
  } else {
    const auto ref = reference_solve(d);
    eval.reference_value = ref.value;
    eval.best_seen = true;
  }
  result.trace = run_ssnm(d, result.config, eval, options.run);
  result.primal = recover_primal(d, result.trace.final_iterate);
  return result;
}

namespace {

QuadraticBlock identity_coupled_block(Index n, const Vector& eigenvalues, SeededRng& rng) {
  const Matrix q = random_orthogonal(n, rng);
  QuadraticBlock b;
  b.hessian = q * eigenvalues.asDiagonal() * q.transpose();
  b.hessian = 0.5 * (b.hessian + b.hessian.transpose());
  b.linear.resize(static_cast<Eigen::Index>(n));
  for (Index j = 0; j < n; ++j) b.linear[static_cast<Eigen::Index>(j)] = rng.normal();
  b.coupling = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  return b;
}

MultiBlockProblem identity_coupled(Index m, Index n, std::uint64_t seed,
                                   const std::function<void(Vector&)>& adjust) {
  if (m == 0 || n == 0) throw InvariantError("need m >= 1 and n >= 1");
  SeededRng rng(seed);
  std::vector<QuadraticBlock> blocks;
  for (Index i = 0; i < m; ++i) {
    Vector eig(static_cast<Eigen::Index>(n));
    for (Index j = 0; j < n; ++j) eig[static_cast<Eigen::Index>(j)] = rng.uniform();
    adjust(eig);
    blocks.push_back(identity_coupled_block(n, eig, rng));
  }
  Vector b(static_cast<Eigen::Index>(n));
  for (Index j = 0; j < n; ++j) b[static_cast<Eigen::Index>(j)] = rng.normal();
  return MultiBlockProblem(std::move(blocks), static_cast<double>(m) * b);
}

}  // namespace

MultiBlockProblem make_identity_coupled_problem(Index m, Index n, double mu, std::uint64_t seed) {
  if (!(mu > 0.0 && mu <= 1.0)) throw InvariantError("mu must lie in (0, 1]");
  return identity_coupled(m, n, seed, [mu](Vector& eig) {
    Eigen::Index k;
    eig.minCoeff(&k);
    eig[k] = mu;
  });
}

MultiBlockProblem make_rank_deficient_problem(Index m, Index n, Index rank_drop,
                                              std::uint64_t seed) {
  if (rank_drop == 0 || rank_drop >= n) throw InvariantError("rank drop must lie in [1, n)");
  MultiBlockProblem raw = identity_coupled(m, n, seed, [rank_drop](Vector& eig) {
    std::sort(eig.data(), eig.data() + eig.size());
    eig.head(static_cast<Eigen::Index>(rank_drop)).setZero();
  });
  // flat directions make y* large, and the perturbation's delta scales with
  // 1/|y*|^2; rescale the data (y* is linear in a and b) to |y*| = 1
  const auto kkt = kkt_direct_solve(raw);
  double norm = 0.0;
  for (const auto& y : kkt.blocks) norm += y.squaredNorm();
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) return raw;
  std::vector<QuadraticBlock> blocks;
  for (Index i = 0; i < raw.num_blocks(); ++i) {
    QuadraticBlock b = raw.block(i);
    b.linear /= norm;
    blocks.push_back(std::move(b));
  }
  return MultiBlockProblem(std::move(blocks), raw.rhs() / norm);
}

}  // namespace hetvr
