// Serial reference kernels against the OpenMP kernels on mixer-sized inputs.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mf/kernels/kernels.hpp"

namespace k = mf::kernels;

namespace {

std::vector<double> random_buffer(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

k::Conv2dGeometry conv_geometry(const benchmark::State& state) {
  k::Conv2dGeometry g;
  g.batch = 2;
  g.in_channels = g.out_channels = state.range(0);
  g.height = g.width = state.range(1);
  g.kernel = state.range(2);
  g.padding = (g.kernel - 1) / 2;
  g.groups = state.range(3) ? g.in_channels : 1;
  return g;
}

template <bool Parallel>
void BM_Conv2d(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto in = random_buffer(static_cast<std::size_t>(g.batch * g.in_channels * g.height * g.width), 1);
  const auto w = random_buffer(static_cast<std::size_t>(g.out_channels * g.in_per_group() * g.kernel * g.kernel), 2);
  std::vector<double> out(static_cast<std::size_t>(g.batch * g.out_channels * g.out_height() * g.out_width()));
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv2d_forward(g, in, w, {}, out);
    } else {
      k::reference::conv2d_forward(g, in, w, {}, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_AvgPool(benchmark::State& state) {
  k::Pool2dGeometry g;
  g.batch = 2;
  g.channels = state.range(0);
  g.height = g.width = state.range(1);
  g.kernel = state.range(2);
  g.padding = (g.kernel - 1) / 2;
  const auto in = random_buffer(static_cast<std::size_t>(g.batch * g.channels * g.height * g.width), 3);
  std::vector<double> out(in.size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::avg_pool2d_forward(g, in, out);
    } else {
      k::reference::avg_pool2d_forward(g, in, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const std::int64_t b = 4, m = state.range(0), kk = state.range(1), n = state.range(0);
  const auto a = random_buffer(static_cast<std::size_t>(b * m * kk), 4);
  const auto bb = random_buffer(static_cast<std::size_t>(b * kk * n), 5);
  std::vector<double> out(static_cast<std::size_t>(b * m * n));
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::batched_matmul(b, m, kk, n, a, bb, true, out);
    } else {
      k::reference::batched_matmul(b, m, kk, n, a, bb, true, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

// {channels, extent, kernel, grouped}
void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({64, 28, 3, 0})->Args({64, 28, 7, 1})->Args({128, 14, 3, 0})->Args({320, 14, 7, 1});
}
void pool_args(benchmark::internal::Benchmark* b) { b->Args({64, 56, 3})->Args({320, 14, 7}); }
void matmul_args(benchmark::internal::Benchmark* b) { b->Args({196, 32})->Args({784, 16}); }

}  // namespace

BENCHMARK(BM_Conv2d<false>)->Name("conv2d/reference")->Apply(conv_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2d<true>)->Name("conv2d/openmp")->Apply(conv_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AvgPool<false>)->Name("avg_pool/reference")->Apply(pool_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AvgPool<true>)->Name("avg_pool/openmp")->Apply(pool_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Matmul<false>)->Name("matmul/reference")->Apply(matmul_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Matmul<true>)->Name("matmul/openmp")->Apply(matmul_args)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
