#include <chrono>
#include <cmath>
#include <numeric>

#include "mgvsr/error.hpp"
#include "mgvsr/train.hpp"

namespace mgvsr {

template <typename T>
std::vector<ShapeTiming> bench_shapes(const TinyRvsrParams<T>& params, const std::vector<VideoClip>& clips,
                                      const std::vector<MinibatchShape>& shapes, std::size_t reps,
                                      std::size_t warmup_reps, std::size_t workers) {
  if (reps < 5) throw InvalidArgument("bench_shapes: need at least 5 timed repetitions");
  std::vector<ShapeTiming> out;
  SamplerRng rng(0);
  for (const auto& shape : shapes) {
    TinyRvsrParams<T> model = params;
    Optimizer<T> optimizer(OptimKind::adam, model);
    std::vector<double> times;
    for (std::size_t r = 0; r < warmup_reps + reps; ++r) {
      const Minibatch<T> batch = sample_minibatch<T>(clips, shape, rng);
      const auto start = std::chrono::steady_clock::now();
      BatchGradient<T> g = minibatch_gradient(model, batch, workers);
      optimizer.step(model, g.grads, 1e-6);
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      if (r >= warmup_reps) times.push_back(ms);
    }
    const double mean = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
    double var = 0.0;
    for (double v : times) var += (v - mean) * (v - mean);
    out.push_back({shape, mean, std::sqrt(var / static_cast<double>(times.size() - 1)), times.size()});
  }
  return out;
}

double predicted_time_ms(const MultigridSchedule& schedule, const std::vector<ShapeTiming>& timings) {
  double total = 0.0;
  for (const auto& stage : schedule.stages()) {
    const MinibatchShape shape = stage.shape();
    auto it = std::find_if(timings.begin(), timings.end(), [&](const ShapeTiming& t) { return t.shape == shape; });
    if (it == timings.end()) {
      throw InvalidArgument("no timing for shape " + std::to_string(shape.spatial.height) + "x" +
                            std::to_string(shape.spatial.width) + "&" + std::to_string(shape.temporal) + " batch " +
                            std::to_string(shape.batch));
    }
    total += static_cast<double>(stage.iterations) * it->mean_ms;
  }
  return total;
}

SpeedupReport schedule_speedup(const MultigridSchedule& schedule, const MultigridSchedule& baseline,
                               const std::vector<ShapeTiming>& timings, const RunRecord* schedule_run,
                               const RunRecord* baseline_run) {
  SpeedupReport r;
  r.predicted = predicted_time_ms(baseline, timings) / predicted_time_ms(schedule, timings);
  if (schedule_run && baseline_run) {
    const double denom = schedule_run->total_wall_ms();
    if (denom > 0.0) r.measured = baseline_run->total_wall_ms() / denom;
  }
  return r;
}

std::vector<MinibatchShape> schedule_shapes(const MultigridSchedule& schedule) {
  std::vector<MinibatchShape> shapes;
  for (const auto& stage : schedule.stages()) {
    if (std::find(shapes.begin(), shapes.end(), stage.shape()) == shapes.end()) shapes.push_back(stage.shape());
  }
  return shapes;
}

template std::vector<ShapeTiming> bench_shapes(const TinyRvsrParams<float>&, const std::vector<VideoClip>&,
                                               const std::vector<MinibatchShape>&, std::size_t, std::size_t,
                                               std::size_t);
template std::vector<ShapeTiming> bench_shapes(const TinyRvsrParams<double>&, const std::vector<VideoClip>&,
                                               const std::vector<MinibatchShape>&, std::size_t, std::size_t,
                                               std::size_t);

}  // namespace mgvsr
