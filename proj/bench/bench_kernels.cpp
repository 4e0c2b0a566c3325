// OpenMP kernels against the serial reference versions.

#include <benchmark/benchmark.h>

#include <random>

#include "circe/kernels.hpp"
#include "circe/reference.hpp"

namespace {

using circe::Index;
using circe::Matrix;

Matrix random_points(Index n, Index d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  Matrix m(n, d);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

const auto kParams = circe::KernelParams::gaussian(1.0);

void BM_GramParallel(benchmark::State& state) {
  const Matrix x = random_points(state.range(0), 4, 1);
  for (auto _ : state) benchmark::DoNotOptimize(circe::gram_entries(x, x, kParams));
  state.SetComplexityN(state.range(0));
}

void BM_GramReference(benchmark::State& state) {
  const Matrix x = random_points(state.range(0), 4, 1);
  for (auto _ : state) benchmark::DoNotOptimize(circe::reference::gram(x, x, kParams));
  state.SetComplexityN(state.range(0));
}

void BM_TraceParallel(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix a = random_points(n, n, 2);
  const Matrix b = random_points(n, n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(circe::trace_product(a, b));
}

void BM_TraceReference(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix a = random_points(n, n, 2);
  const Matrix b = random_points(n, n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(circe::reference::trace_product(a, b));
}

void BM_GramGradientParallel(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix x = random_points(n, 8, 4);
  const Matrix k = circe::gram_entries(x, x, kParams);
  const Matrix w = random_points(n, n, 5);
  for (auto _ : state) benchmark::DoNotOptimize(circe::gram_gradient(x, k, w, kParams));
}

void BM_GramGradientReference(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix x = random_points(n, 8, 4);
  const Matrix k = circe::gram_entries(x, x, kParams);
  const Matrix w = random_points(n, n, 5);
  for (auto _ : state) benchmark::DoNotOptimize(circe::reference::gram_gradient(x, k, w, kParams));
}

void BM_CosineParallel(benchmark::State& state) {
  const Matrix x = random_points(state.range(0), 2, 6);
  const Matrix freq = random_points(512, 2, 7);
  const circe::Vector phase = circe::Vector::LinSpaced(512, 0.0, 6.0);
  for (auto _ : state) benchmark::DoNotOptimize(circe::cosine_features(x, freq, phase, 0.0625));
}

void BM_CosineReference(benchmark::State& state) {
  const Matrix x = random_points(state.range(0), 2, 6);
  const Matrix freq = random_points(512, 2, 7);
  const circe::Vector phase = circe::Vector::LinSpaced(512, 0.0, 6.0);
  for (auto _ : state) benchmark::DoNotOptimize(circe::reference::cosine_features(x, freq, phase, 0.0625));
}

}  // namespace

BENCHMARK(BM_GramParallel)->RangeMultiplier(2)->Range(128, 2048)->Complexity();
BENCHMARK(BM_GramReference)->RangeMultiplier(2)->Range(128, 2048)->Complexity();
BENCHMARK(BM_TraceParallel)->Arg(256)->Arg(1024);
BENCHMARK(BM_TraceReference)->Arg(256)->Arg(1024);
BENCHMARK(BM_GramGradientParallel)->Arg(256)->Arg(1024);
BENCHMARK(BM_GramGradientReference)->Arg(256)->Arg(1024);
BENCHMARK(BM_CosineParallel)->Arg(256)->Arg(4096);
BENCHMARK(BM_CosineReference)->Arg(256)->Arg(4096);

BENCHMARK_MAIN();
