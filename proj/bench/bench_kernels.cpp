// Serial reference kernels against their OpenMP counterparts, plus the
// end-to-end estimators they feed.

#include <benchmark/benchmark.h>

#include "lipcert/estimators.hpp"
#include "lipcert/kernels.hpp"
#include "lipcert/network.hpp"
#include "lipcert/rng.hpp"

using namespace lipcert;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  RandomStream rng(seed, 0);
  Matrix a(r, c);
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  return a;
}

Matrix random_spd(std::size_t n, std::uint64_t seed) {
  const Matrix g = random_matrix(n, n, seed);
  Matrix s = kernels::serial::gemm_nt(g, g);
  for (std::size_t i = 0; i < n; ++i) s(i, i) += static_cast<double>(n);
  return s;
}

template <Matrix (*Gemm)(const Matrix&, const Matrix&)>
void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Gemm(a, b));
  state.SetComplexityN(state.range(0));
}

template <bool (*Chol)(Matrix&)>
void BM_cholesky(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix s = random_spd(n, 3);
  for (auto _ : state) {
    Matrix a = s;
    benchmark::DoNotOptimize(Chol(a));
  }
  state.SetComplexityN(state.range(0));
}

void BM_fast_depth(benchmark::State& state) {
  const auto dims = hidden_dims(static_cast<std::size_t>(state.range(0)), 50);
  const Network net = random_network(dims, 1);
  EstimateOptions opts;
  opts.verify = false;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_fast(net, opts).L);
  state.SetComplexityN(state.range(0));
}

void BM_sdp_width(benchmark::State& state) {
  const auto dims = hidden_dims(5, static_cast<std::size_t>(state.range(0)));
  const Network net = random_network(dims, 1);
  EstimateOptions opts;
  opts.algo = Algo::sdp;
  opts.verify = false;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_sdp(net, opts).L);
}

}  // namespace

BENCHMARK(BM_gemm<kernels::serial::gemm>)->Name("gemm/serial")->RangeMultiplier(2)->Range(64, 512)->Complexity();
BENCHMARK(BM_gemm<kernels::parallel::gemm>)->Name("gemm/parallel")->RangeMultiplier(2)->Range(64, 512)->Complexity();
BENCHMARK(BM_cholesky<kernels::serial::cholesky_in_place>)
    ->Name("cholesky/serial")
    ->RangeMultiplier(2)
    ->Range(64, 512)
    ->Complexity();
BENCHMARK(BM_cholesky<kernels::parallel::cholesky_in_place>)
    ->Name("cholesky/parallel")
    ->RangeMultiplier(2)
    ->Range(64, 512)
    ->Complexity();
BENCHMARK(BM_fast_depth)->Name("fast/depth")->RangeMultiplier(2)->Range(10, 80)->Complexity(benchmark::oN);
BENCHMARK(BM_sdp_width)->Name("sdp/width")->DenseRange(5, 20, 5);

BENCHMARK_MAIN();
