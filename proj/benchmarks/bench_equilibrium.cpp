#include <nashverify/equilibrium.hpp>

#include <benchmark/benchmark.h>

#include <random>

using namespace nashverify;

namespace {

std::pair<RawScoreVector, StubbornnessVector> instance(std::size_t m) {
  std::mt19937_64 rng(m);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> raw, lambdas;
  for (std::size_t i = 0; i < m; ++i) {
    raw.push_back(unit(rng));
    lambdas.push_back(0.5 + unit(rng));
  }
  return {RawScoreVector(raw), StubbornnessVector(lambdas)};
}

void BM_Solve(benchmark::State& state) {
  const auto [raw, lambdas] = instance(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_equilibrium(raw, lambdas));
}
BENCHMARK(BM_Solve)->DenseRange(2, 6);

void BM_Iterate(benchmark::State& state) {
  const auto [raw, lambdas] = instance(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(iterate_equilibrium(raw, lambdas, 1e-12, 1'000'000));
}
BENCHMARK(BM_Iterate)->DenseRange(2, 6);

}  // namespace
