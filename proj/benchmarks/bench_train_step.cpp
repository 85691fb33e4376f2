#include <benchmark/benchmark.h>

#include "mgvsr/data.hpp"
#include "mgvsr/model.hpp"
#include "mgvsr/train.hpp"

namespace {

const std::vector<mgvsr::VideoClip>& clips() {
  static const auto pool = [] {
    std::vector<mgvsr::VideoClip> v;
    for (std::uint64_t s = 0; s < 4; ++s) v.push_back(mgvsr::generate_clip(s, 12, 128, 128));
    return v;
  }();
  return pool;
}

// One optimizer iteration (gradient + Adam step), batch synthesis excluded.
// args: channels, blocks, LR crop size, frames, batch
void BM_TrainIteration(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  const auto blocks = static_cast<std::size_t>(state.range(1));
  const auto crop = static_cast<std::size_t>(state.range(2));
  const mgvsr::MinibatchShape shape{static_cast<std::size_t>(state.range(4)), static_cast<std::size_t>(state.range(3)),
                                    {crop, crop}};
  auto params = mgvsr::init_params<float>(1, channels, blocks);
  mgvsr::Optimizer<float> opt(mgvsr::OptimKind::adam, params);
  mgvsr::SamplerRng rng(3);
  for (auto _ : state) {
    state.PauseTiming();
    const auto batch = mgvsr::sample_minibatch<float>(clips(), shape, rng);
    state.ResumeTiming();
    auto g = mgvsr::minibatch_gradient(params, batch);
    opt.step(params, g.grads, 1e-4);
  }
}
BENCHMARK(BM_TrainIteration)
    ->Args({8, 1, 8, 4, 4})
    ->Args({8, 1, 16, 8, 4})
    ->Args({16, 2, 16, 8, 4})
    ->Args({8, 1, 24, 8, 4})
    ->Unit(benchmark::kMillisecond);

}  // namespace
