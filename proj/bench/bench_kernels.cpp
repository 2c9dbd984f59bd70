// Serial reference kernels against their OpenMP counterparts on shapes the
// reference model sees with a batch of 12.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "jcas/nn/kernels.hpp"

namespace k = jcas::nn::kernels;
using jcas::nn::Shape;

namespace {

struct Serial {
  static constexpr auto conv = &k::serial::conv2d_forward<float>;
  static constexpr auto conv_in = &k::serial::conv2d_backward_input<float>;
  static constexpr auto conv_w = &k::serial::conv2d_backward_weight<float>;
  static constexpr auto depthwise = &k::serial::depthwise_forward<float>;
  static constexpr auto maxpool = &k::serial::maxpool_forward<float>;
  static constexpr auto matmul = &k::serial::matmul_forward<float>;
};

struct Omp {
  static constexpr auto conv = &k::omp::conv2d_forward<float>;
  static constexpr auto conv_in = &k::omp::conv2d_backward_input<float>;
  static constexpr auto conv_w = &k::omp::conv2d_backward_weight<float>;
  static constexpr auto depthwise = &k::omp::depthwise_forward<float>;
  static constexpr auto maxpool = &k::omp::maxpool_forward<float>;
  static constexpr auto matmul = &k::omp::matmul_forward<float>;
};

std::vector<float> random_vec(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> d(-1, 1);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// state.range: h, w, cin, cout, kernel
template <typename Impl>
void BM_Conv2dForward(benchmark::State& state) {
  const Shape in{12, std::size_t(state.range(0)), std::size_t(state.range(1)), std::size_t(state.range(2))};
  const std::size_t cout = state.range(3), kk = state.range(4);
  const auto g = k::window_geom(in, kk, kk, 1, 1);
  const auto x = random_vec(in.size(), 1), w = random_vec(kk * kk * in.c * cout, 2);
  std::vector<float> y(in.n * g.oh * g.ow * cout);
  for (auto _ : state) {
    Impl::conv(g, cout, x, w, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <typename Impl>
void BM_Conv2dBackward(benchmark::State& state) {
  const Shape in{12, std::size_t(state.range(0)), std::size_t(state.range(1)), std::size_t(state.range(2))};
  const std::size_t cout = state.range(3), kk = state.range(4);
  const auto g = k::window_geom(in, kk, kk, 1, 1);
  const auto x = random_vec(in.size(), 1), w = random_vec(kk * kk * in.c * cout, 2);
  const auto gy = random_vec(in.n * g.oh * g.ow * cout, 3);
  std::vector<float> gx(in.size()), gw(w.size());
  for (auto _ : state) {
    Impl::conv_in(g, cout, gy, w, gx);
    Impl::conv_w(g, cout, x, gy, gw);
    benchmark::DoNotOptimize(gx.data());
    benchmark::DoNotOptimize(gw.data());
  }
}

template <typename Impl>
void BM_Depthwise(benchmark::State& state) {
  const Shape in{12, std::size_t(state.range(0)), std::size_t(state.range(1)), std::size_t(state.range(2))};
  const auto g = k::window_geom(in, 3, 3, 1, 1);
  const auto x = random_vec(in.size(), 1), w = random_vec(9 * in.c, 2);
  std::vector<float> y(in.size());
  for (auto _ : state) {
    Impl::depthwise(g, x, w, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <typename Impl>
void BM_MaxPool(benchmark::State& state) {
  const Shape in{12, std::size_t(state.range(0)), std::size_t(state.range(1)), std::size_t(state.range(2))};
  const auto g = k::window_geom(in, 2, 2, 2, 2);
  const auto x = random_vec(in.size(), 1);
  std::vector<float> y(in.n * g.oh * g.ow * in.c);
  std::vector<std::uint32_t> arg(y.size());
  for (auto _ : state) {
    Impl::maxpool(g, x, y, arg);
    benchmark::DoNotOptimize(y.data());
  }
}

template <typename Impl>
void BM_Dense(benchmark::State& state) {
  const std::size_t rows = 12, in = state.range(0), out = state.range(1);
  const auto x = random_vec(rows * in, 1), w = random_vec(in * out, 2), b = random_vec(out, 3);
  std::vector<float> y(rows * out);
  for (auto _ : state) {
    Impl::matmul(rows, in, out, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

BENCHMARK_TEMPLATE(BM_Conv2dForward, Serial)->Args({32, 64, 16, 32, 3})->Args({64, 128, 1, 32, 5});
BENCHMARK_TEMPLATE(BM_Conv2dForward, Omp)->Args({32, 64, 16, 32, 3})->Args({64, 128, 1, 32, 5});
BENCHMARK_TEMPLATE(BM_Conv2dBackward, Serial)->Args({32, 64, 16, 32, 3});
BENCHMARK_TEMPLATE(BM_Conv2dBackward, Omp)->Args({32, 64, 16, 32, 3});
BENCHMARK_TEMPLATE(BM_Depthwise, Serial)->Args({16, 32, 64});
BENCHMARK_TEMPLATE(BM_Depthwise, Omp)->Args({16, 32, 64});
BENCHMARK_TEMPLATE(BM_MaxPool, Serial)->Args({32, 64, 32});
BENCHMARK_TEMPLATE(BM_MaxPool, Omp)->Args({32, 64, 32});
BENCHMARK_TEMPLATE(BM_Dense, Serial)->Args({1024, 1024});
BENCHMARK_TEMPLATE(BM_Dense, Omp)->Args({1024, 1024});

BENCHMARK_MAIN();
