#include "hetvr/kernels.hpp"

#include <array>


namespace hetvr::kernels {

namespace {

struct ChunkRange {
  Index begin;
  Index end;
};

ChunkRange chunk(Index c, Index m) { return {c * m / kChunkCount, (c + 1) * m / kChunkCount}; }

void gradient_sum(const FiniteSumProblem& problem, OracleCounter* counter, const Vector& x,
                  Vector& out) {
  const Index m = problem.num_components();
  const Index n = problem.dimension();
  Matrix partial = Matrix::Zero(n, kChunkCount);
#pragma omp parallel
  {
    Vector g(n);
#pragma omp for schedule(static)
    for (Index c = 0; c < kChunkCount; ++c) {
      const auto r = chunk(c, m);
      for (Index i = r.begin; i < r.end; ++i) {
        problem.component_gradient(i, x, g);
        if (counter != nullptr) counter->record_gradient(i);
        partial.col(c) += g;
      }
    }
  }
  out.setZero(n);
  for (Index c = 0; c < kChunkCount; ++c) out += partial.col(c);
}

}  // namespace

double objective(const FiniteSumProblem& problem, const Vector& x) {
  const Index m = problem.num_components();
  std::array<double, kChunkCount> partial{};
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < kChunkCount; ++c) {
    const auto r = chunk(c, m);
    double s = 0.0;
    for (Index i = r.begin; i < r.end; ++i) s += problem.component_value(i, x);
    partial[c] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

void full_gradient(const FiniteSumProblem& problem, const Vector& x, Vector& out) {
  gradient_sum(problem, nullptr, x, out);
}

void full_gradient(const FiniteSumProblem& problem, OracleCounter& counter, const Vector& x,
                   Vector& out) {
  gradient_sum(problem, &counter, x, out);
}

void gradient_table(const FiniteSumProblem& problem, OracleCounter& counter, const Vector& x,
                    bool hat, Matrix& table) {
  const Index m = problem.num_components();
  const Index n = problem.dimension();
  table.resize(n, m);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < m; ++i) {
    auto col = table.col(i);
    problem.component_gradient(i, x, col);
    if (hat) col.noalias() -= problem.component_spec(i).strong_convexity * x;
    counter.record_gradient(i);
  }
}

void column_sum(const Matrix& table, Vector& out) {
  const Index m = static_cast<Index>(table.cols());
  const Index n = static_cast<Index>(table.rows());
  Matrix partial = Matrix::Zero(n, kChunkCount);
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < kChunkCount; ++c) {
    const auto r = chunk(c, m);
    for (Index i = r.begin; i < r.end; ++i) partial.col(c) += table.col(i);
  }
  out.setZero(n);
  for (Index c = 0; c < kChunkCount; ++c) out += partial.col(c);
}

void parallel_for(Index count, const std::function<void(Index)>& body) {
#pragma omp parallel for schedule(dynamic, 1)
  for (Index k = 0; k < count; ++k) body(k);
}

}  // namespace hetvr::kernels
