#include "hetvr/kernels.hpp"

namespace hetvr::kernels::serial {

double objective(const FiniteSumProblem& problem, const Vector& x) {
  double total = 0.0;
  for (Index i = 0; i < problem.num_components(); ++i) total += problem.component_value(i, x);
  return total;
}

void full_gradient(const FiniteSumProblem& problem, const Vector& x, Vector& out) {
  Vector g(problem.dimension());
  out.setZero(problem.dimension());
  for (Index i = 0; i < problem.num_components(); ++i) {
    problem.component_gradient(i, x, g);
    out += g;
  }
}

void gradient_table(const FiniteSumProblem& problem, const Vector& x, bool hat, Matrix& table) {
  table.resize(problem.dimension(), problem.num_components());
  for (Index i = 0; i < problem.num_components(); ++i) {
    auto col = table.col(i);
    problem.component_gradient(i, x, col);
    if (hat) col.noalias() -= problem.component_spec(i).strong_convexity * x;
  }
}

void column_sum(const Matrix& table, Vector& out) {
  out.setZero(table.rows());
  for (Eigen::Index i = 0; i < table.cols(); ++i) out += table.col(i);
}

}  // namespace hetvr::kernels::serial
