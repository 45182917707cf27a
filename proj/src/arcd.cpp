#include <cmath>

#include "hetvr/solvers.hpp"

namespace hetvr {

namespace {

// Fills column `eliminated` with minus the sum of the other columns. The
// same summation order is used for the residual, so sum_i p_i is exactly 0.
Vector other_sum(const Matrix& p, Index eliminated) {
  Vector s = Vector::Zero(p.rows());
  for (Index i = 0; i < static_cast<Index>(p.cols()); ++i) {
    if (i != eliminated) s += p.col(i);
  }
  return s;
}

void complete(Matrix& p, Index eliminated) { p.col(eliminated) = -other_sum(p, eliminated); }

Matrix as_blocks(const Vector& flat, Index rows, Index cols) {
  return Eigen::Map<const Matrix>(flat.data(), static_cast<Eigen::Index>(rows),
                                  static_cast<Eigen::Index>(cols));
}

Vector flatten(const Matrix& p) { return Eigen::Map<const Vector>(p.data(), p.size()); }

}  // namespace

double separable_objective(const FiniteSumProblem& blocks, const Matrix& p) {
  double total = 0.0;
  for (Index i = 0; i < blocks.num_components(); ++i) {
    total += blocks.component_value(i, p.col(i));
  }
  return total;
}

ArcdResult run_arcd_eliminated(const FiniteSumProblem& blocks, Index eliminated,
                               const RunOptions& options, std::optional<Matrix> optimum,
                               std::optional<double> optimal_value, OracleCounter* counter) {
  const Index m = blocks.num_components();
  const Index dim = blocks.dimension();
  if (m < 2) throw InvariantError("block elimination needs at least two blocks");
  if (eliminated >= m) throw std::out_of_range("eliminated block index out of range");
  const auto l = blocks.smoothness_constants();
  const auto mu = blocks.strong_convexity_constants();
  for (Index i = 0; i < m; ++i) {
    if (!(mu[i] > 0.0)) {
      throw InvariantError("block " + std::to_string(i) + " is not strongly convex (mu_i = 0)");
    }
  }

  // Block i != j of the eliminated objective is (L_j + L_i)-smooth, and
  // sum_i mu_i |d_i|^2 >= s sum_i (L_j + L_i) |d_i|^2 with s below.
  std::vector<Index> free_blocks;
  std::vector<double> block_l(m, 0.0);
  double sigma = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < m; ++i) {
    if (i == eliminated) continue;
    free_blocks.push_back(i);
    block_l[i] = l[eliminated] + l[i];
    sigma = std::min(sigma, mu[i] / block_l[i]);
  }
  const double nb = static_cast<double>(free_blocks.size());
  // linear coupling of a gradient step and a mirror step, uniform sampling
  const double tau = 2.0 / (1.0 + std::sqrt(4.0 * nb * nb / sigma + 1.0));
  const double eta = 1.0 / (tau * nb * nb);

  Evaluator eval;
  eval.objective = [&blocks, dim, m](const Vector& flat) {
    return separable_objective(blocks, as_blocks(flat, dim, m));
  };
  if (optimum) {
    eval.optimum = flatten(*optimum);
    eval.reference_value = optimal_value ? *optimal_value : separable_objective(blocks, *optimum);
  } else if (optimal_value) {
    eval.reference_value = *optimal_value;
  } else {
    throw InvariantError("block elimination run needs an optimum or an optimal value");
  }
  eval.infeasibility = [dim, m, eliminated](const Vector& flat) {
    const Matrix p = as_blocks(flat, dim, m);
    return (other_sum(p, eliminated) + p.col(eliminated)).norm();
  };

  OracleCounter local(m);
  OracleCounter& c = counter != nullptr ? *counter : local;
  SeededRng rng(options.seed);
  TraceRecorder rec("arcd", m, eval, options.stop);

  Matrix y = Matrix::Zero(dim, m);
  if (options.x0) {
    if (static_cast<Index>(options.x0->size()) != dim * m) {
      throw std::invalid_argument("starting point must stack m blocks");
    }
    y = as_blocks(*options.x0, dim, m);
  }
  complete(y, eliminated);
  ArcdResult out;
  if (rec.empty_budget() || rec.record(0, flatten(y), c)) {
    out.trace = rec.finish(0, flatten(y), c);
    out.blocks = y;
    return out;
  }

  Matrix z = y;
  Matrix x = y;
  Vector gi(dim);
  Vector gj(dim);
  std::uint64_t k = 0;
  while (true) {
    x = tau * z + (1.0 - tau) * y;
    complete(x, eliminated);
    const Index i = free_blocks[rng.below(free_blocks.size())];
    grad_component(blocks, c, i, x.col(i), gi);
    grad_component(blocks, c, eliminated, x.col(eliminated), gj);
    const Vector g = gi - gj;

    y = x;
    y.col(i) -= g / block_l[i];
    complete(y, eliminated);
    z = (z + eta * sigma * x) / (1.0 + eta * sigma);
    z.col(i) -= (eta * nb / (block_l[i] * (1.0 + eta * sigma))) * g;
    ++k;
    if (rec.due(c)) {
      if (rec.record(k, flatten(y), c)) break;
    } else if (rec.budget_exhausted(c, k)) {
      break;
    }
  }
  out.trace = rec.finish(k, flatten(y), c);
  out.blocks = y;
  return out;
}

}  // namespace hetvr
