#ifndef HETVR_KERNELS_HPP
#define HETVR_KERNELS_HPP

#include <functional>

#include "hetvr/problems.hpp"

namespace hetvr::kernels {

// Sums over components are split into a fixed number of contiguous chunks.
// Each chunk is reduced serially and the chunk partials are combined in
// index order, so results do not depend on the OpenMP thread count.
inline constexpr Index kChunkCount = 64;

/// F(x) = sum_i g_i(x). Uncounted (diagnostic use).
double objective(const FiniteSumProblem& problem, const Vector& x);

/// sum_i grad g_i(x). Uncounted.
void full_gradient(const FiniteSumProblem& problem, const Vector& x, Vector& out);

/// sum_i grad g_i(x); charges m gradient calls.
void full_gradient(const FiniteSumProblem& problem, OracleCounter& counter, const Vector& x,
                   Vector& out);

/// Column i of `table` becomes grad g_i(x), or the hat gradient when
/// `hat` is set. Charges m gradient calls.
void gradient_table(const FiniteSumProblem& problem, OracleCounter& counter, const Vector& x,
                    bool hat, Matrix& table);

/// Chunked column sum of a gradient table.
void column_sum(const Matrix& table, Vector& out);

/// Runs body(k) for k in [0, count). Iterations are independent.
void parallel_for(Index count, const std::function<void(Index)>& body);

namespace serial {

// Straight left-to-right loops. Reference versions for tests and benchmarks.
double objective(const FiniteSumProblem& problem, const Vector& x);
void full_gradient(const FiniteSumProblem& problem, const Vector& x, Vector& out);
void gradient_table(const FiniteSumProblem& problem, const Vector& x, bool hat, Matrix& table);
void column_sum(const Matrix& table, Vector& out);

}  // namespace serial

}  // namespace hetvr::kernels

#endif  // HETVR_KERNELS_HPP
