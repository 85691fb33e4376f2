#include <benchmark/benchmark.h>

#include <random>

#include "mgvsr/layers.hpp"

namespace {

mgvsr::Tensor<float> random_tensor(mgvsr::Shape shape, unsigned seed) {
  mgvsr::Tensor<float> t(std::move(shape));
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> dist(-1.f, 1.f);
  for (float& v : t.data()) v = dist(rng);
  return t;
}

// args: channels in/out, spatial size
void BM_Conv2dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  const auto x = random_tensor({1, c, s, s}, 1);
  const auto w = random_tensor({c, c, 3, 3}, 2);
  const auto b = random_tensor({c}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(mgvsr::ops::conv2d_forward(x, w, b));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(c * c * 9 * s * s));
}
BENCHMARK(BM_Conv2dForward)->Args({8, 16})->Args({8, 64})->Args({16, 32})->Args({16, 64});

void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  const auto x = random_tensor({1, c, s, s}, 1);
  const auto w = random_tensor({c, c, 3, 3}, 2);
  const auto g = random_tensor({1, c, s, s}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(mgvsr::ops::conv2d_backward(x, w, g));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * c * c * 9 * s * s));
}
BENCHMARK(BM_Conv2dBackward)->Args({8, 16})->Args({8, 64})->Args({16, 32})->Args({16, 64});

void BM_PixelShuffle(benchmark::State& state) {
  const auto x = random_tensor({1, 32, 32, 32}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(mgvsr::ops::pixel_shuffle(x, 2));
}
BENCHMARK(BM_PixelShuffle);

}  // namespace
