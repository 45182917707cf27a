#include <map>
#include <memory>

#include <benchmark/benchmark.h>

#include "hetvr/kernels.hpp"

namespace {

const hetvr::WeightedGLMProblem& problem(hetvr::Index m, hetvr::Index n) {
  static std::map<std::pair<hetvr::Index, hetvr::Index>, std::unique_ptr<hetvr::WeightedGLMProblem>>
      cache;
  auto& p = cache[{m, n}];
  if (!p) p = hetvr::make_weighted_glm(m, n, 1e-5, hetvr::LossKind::logistic, 7);
  return *p;
}

void BM_full_gradient_parallel(benchmark::State& state) {
  const auto& p = problem(state.range(0), state.range(1));
  hetvr::Vector x = hetvr::Vector::Constant(p.dimension(), 0.1);
  hetvr::Vector g;
  for (auto _ : state) {
    hetvr::kernels::full_gradient(p, x, g);
    benchmark::DoNotOptimize(g.data());
  }
}

void BM_full_gradient_serial(benchmark::State& state) {
  const auto& p = problem(state.range(0), state.range(1));
  hetvr::Vector x = hetvr::Vector::Constant(p.dimension(), 0.1);
  hetvr::Vector g;
  for (auto _ : state) {
    hetvr::kernels::serial::full_gradient(p, x, g);
    benchmark::DoNotOptimize(g.data());
  }
}

void BM_gradient_table_parallel(benchmark::State& state) {
  const auto& p = problem(state.range(0), state.range(1));
  hetvr::Vector x = hetvr::Vector::Constant(p.dimension(), 0.1);
  hetvr::Matrix t;
  hetvr::OracleCounter c(p.num_components());
  for (auto _ : state) {
    hetvr::kernels::gradient_table(p, c, x, true, t);
    benchmark::DoNotOptimize(t.data());
  }
}

void BM_gradient_table_serial(benchmark::State& state) {
  const auto& p = problem(state.range(0), state.range(1));
  hetvr::Vector x = hetvr::Vector::Constant(p.dimension(), 0.1);
  hetvr::Matrix t;
  for (auto _ : state) {
    hetvr::kernels::serial::gradient_table(p, x, true, t);
    benchmark::DoNotOptimize(t.data());
  }
}

void BM_objective_parallel(benchmark::State& state) {
  const auto& p = problem(state.range(0), state.range(1));
  hetvr::Vector x = hetvr::Vector::Constant(p.dimension(), 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(hetvr::kernels::objective(p, x));
}

void BM_objective_serial(benchmark::State& state) {
  const auto& p = problem(state.range(0), state.range(1));
  hetvr::Vector x = hetvr::Vector::Constant(p.dimension(), 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(hetvr::kernels::serial::objective(p, x));
}

}  // namespace

BENCHMARK(BM_full_gradient_parallel)->Args({1000, 50})->Args({10000, 100});
BENCHMARK(BM_full_gradient_serial)->Args({1000, 50})->Args({10000, 100});
BENCHMARK(BM_gradient_table_parallel)->Args({1000, 50})->Args({10000, 100});
BENCHMARK(BM_gradient_table_serial)->Args({1000, 50})->Args({10000, 100});
BENCHMARK(BM_objective_parallel)->Args({10000, 100});
BENCHMARK(BM_objective_serial)->Args({10000, 100});

BENCHMARK_MAIN();
