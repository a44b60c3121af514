#include <benchmark/benchmark.h>

#include "ntkeig/bounds.hpp"
#include "ntkeig/kernel_limit.hpp"
#include "ntkeig/linalg.hpp"
#include "ntkeig/ntk.hpp"
#include "ntkeig/specfun.hpp"
#include "ntkeig/sphere.hpp"

using namespace ntkeig;

static void FunkHeckeClosed(benchmark::State& state) {
  const int r = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(funk_hecke_coeff(r, 8, Activation::ReluDerivative));
}
BENCHMARK(FunkHeckeClosed)->Arg(1)->Arg(15)->Arg(63);

static void FunkHeckeQuadrature(benchmark::State& state) {
  const int r = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(funk_hecke_quadrature(r, 8, Activation::ScaledRelu, 1e-10));
}
BENCHMARK(FunkHeckeQuadrature)->Arg(2)->Arg(16)->Arg(30);

static void GegenbauerHighDegree(benchmark::State& state) {
  const int r = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gegenbauer(r, 1.5, 0.37));
}
BENCHMARK(GegenbauerHighDegree)->Arg(32)->Arg(256)->Arg(2048);

static void LimitingKernelMatrix(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Dataset data = sample_uniform_sphere(5, n, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(limiting_kernel_matrix(Activation::ScaledRelu, data));
  state.SetComplexityN(n);
}
BENCHMARK(LimitingKernelMatrix)->RangeMultiplier(2)->Range(8, 128)->Complexity();

static void MonteCarloKernelBench(benchmark::State& state) {
  const Dataset data = sample_uniform_sphere(3, 8, 2);
  const auto samples = state.range(0);
  for (auto _ : state)
    benchmark::DoNotOptimize(limiting_kernel_mc(Activation::ReluDerivative, data, samples, 3));
  state.SetItemsProcessed(state.iterations() * samples);
}
BENCHMARK(MonteCarloKernelBench)->Arg(10000)->Arg(100000);

static void ShallowNtkStreamed(benchmark::State& state) {
  const int d1 = static_cast<int>(state.range(0));
  const Dataset data = sample_uniform_sphere(3, 8, 4);
  for (auto _ : state) benchmark::DoNotOptimize(shallow_ntk_streamed(3, d1, 5, data));
  state.SetComplexityN(d1);
}
BENCHMARK(ShallowNtkStreamed)->RangeMultiplier(4)->Range(1024, 262144)->Complexity();

static void DeepNtkDecomposed(benchmark::State& state) {
  const DeepParams params = init_deep({3, 256, 128, 64, 1}, 6);
  const Dataset data = sample_uniform_sphere(3, static_cast<int>(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(deep_ntk_decomposed(params, data));
}
BENCHMARK(DeepNtkDecomposed)->Arg(4)->Arg(16)->Arg(64);

static void HarmonicGramBench(benchmark::State& state) {
  const int R = static_cast<int>(state.range(0));
  const Dataset data = sample_uniform_sphere(4, 16, 8);
  for (auto _ : state) benchmark::DoNotOptimize(harmonic_gram(data, R, 1));
}
BENCHMARK(HarmonicGramBench)->Arg(8)->Arg(64)->Arg(512);

static void JacobiEigenvalues(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const KernelMatrix kernel =
      limiting_kernel_matrix(Activation::ReluDerivative, sample_uniform_sphere(6, n, 9));
  for (auto _ : state) benchmark::DoNotOptimize(jacobi_eigenvalues(kernel.entries()));
  state.SetComplexityN(n);
}
BENCHMARK(JacobiEigenvalues)->RangeMultiplier(2)->Range(8, 128)->Complexity();

BENCHMARK_MAIN();
