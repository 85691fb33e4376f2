#include "mgvsr/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "mgvsr/error.hpp"
#include "mgvsr/format.hpp"
#include "mgvsr/layers.hpp"

namespace mgvsr {
namespace {

using Clock = std::chrono::steady_clock;

// T x N x ... -> T x 1 x ... for sample b.
template <typename T>
Tensor<T> select_sample(const Tensor<T>& clip, std::size_t b) {
  const std::size_t frames = clip.dim(0), n = clip.dim(1);
  const std::size_t inner = clip.size() / (frames * n);
  Shape shape = clip.shape();
  shape[1] = 1;
  Tensor<T> out(shape);
  for (std::size_t t = 0; t < frames; ++t) {
    const T* src = clip.raw() + (t * n + b) * inner;
    std::copy(src, src + inner, out.raw() + t * inner);
  }
  return out;
}

// Runs fn(i) for i in [0, count) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

}  // namespace

template <typename T>
BatchGradient<T> minibatch_gradient(const TinyRvsrParams<T>& params, const Minibatch<T>& batch, std::size_t workers) {
  if (batch.lr.rank() != 5 || batch.hr.rank() != 5 || batch.lr.dim(1) != batch.hr.dim(1)) {
    throw ShapeError("minibatch_gradient: malformed batch");
  }
  const std::size_t n = batch.lr.dim(1);
  const double normalizer = static_cast<double>(batch.hr.size());
  std::vector<TinyRvsrParams<T>> per_sample(n);
  std::vector<double> losses(n, 0.0);
  parallel_for(n, workers, [&](std::size_t b) {
    const Tensor<T> lr = select_sample(batch.lr, b);
    const Tensor<T> hr = select_sample(batch.hr, b);
    auto fwd = forward_sequence(params, lr);
    auto loss = loss_charbonnier(fwd.sr, hr, normalizer);
    losses[b] = loss.value;
    per_sample[b] = backward_sequence(params, fwd.cache, loss.grad);
  });
  BatchGradient<T> out{std::move(per_sample[0]), losses[0]};
  for (std::size_t b = 1; b < n; ++b) {
    auto dst = out.grads.named_tensors();
    const auto src = per_sample[b].named_tensors();
    for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].second += *src[i].second;
    out.loss += losses[b];
  }
  return out;
}

template <typename T>
std::vector<double> flatten(const TinyRvsrParams<T>& params) {
  std::vector<double> flat;
  flat.reserve(params.parameter_count());
  for (const auto& [name, t] : params.named_tensors())
    for (T v : t->data()) flat.push_back(static_cast<double>(v));
  return flat;
}

template <typename T>
void unflatten(const std::vector<double>& flat, TinyRvsrParams<T>& params) {
  if (flat.size() != params.parameter_count()) throw ShapeError("unflatten: length does not match the model");
  std::size_t k = 0;
  for (auto& [name, t] : params.named_tensors())
    for (T& v : t->data()) v = static_cast<T>(flat[k++]);
}

double RunRecord::total_wall_ms() const {
  double total = 0.0;
  for (const auto& r : rows) total += r.wall_ms;
  return total;
}

std::optional<MetricReport> RunRecord::final_metrics() const {
  if (evals.empty()) return std::nullopt;
  return evals.back().report;
}

template <typename T>
MetricReport evaluate_model(const TinyRvsrParams<T>& params, const std::vector<VideoClip>& clips,
                            MetricChannels channels) {
  if (clips.empty()) throw InvalidArgument("evaluate_model: no validation clips");
  std::vector<Tensor<double>> sr_frames, hr_frames;
  for (const auto& clip : clips) {
    const Shape s = clip.lr.shape();
    const Tensor<T> lr = clip.lr.template cast<T>().reshaped({s[0], 1, s[1], s[2], s[3]});
    Tensor<double> sr = predict_sequence(params, lr).template cast<double>();
    for (double& v : sr.data()) v = std::clamp(v, 0.0, 1.0);
    const Shape hs = clip.hr.shape();
    sr = sr.reshaped(hs);
    for (std::size_t t = 0; t < hs[0]; ++t) {
      sr_frames.push_back(sr.slice0(t));
      hr_frames.push_back(clip.hr.slice0(t));
    }
  }
  return evaluate_metrics(stack(sr_frames), stack(hr_frames), channels);
}

MetricReport evaluate_nearest(const std::vector<VideoClip>& clips, MetricChannels channels) {
  if (clips.empty()) throw InvalidArgument("evaluate_nearest: no validation clips");
  std::vector<Tensor<double>> up_frames, hr_frames;
  for (const auto& clip : clips) {
    const Tensor<double> up = ops::nearest_upsample(clip.lr, kUpscale);
    for (std::size_t t = 0; t < clip.frames(); ++t) {
      up_frames.push_back(up.slice0(t));
      hr_frames.push_back(clip.hr.slice0(t));
    }
  }
  return evaluate_metrics(stack(up_frames), stack(hr_frames), channels);
}

template <typename T>
TrainResult<T> train_run(const TrainConfig& cfg, const ClipPool& pool) {
  const MultigridSchedule& sched = cfg.schedule;
  // Validates the lr spec against the schedule before any work.
  (void)lr_at(cfg.lr, sched, 0);
  TrainResult<T> result{{}, cfg.zero_init ? zero_params<T>(cfg.channels, cfg.blocks)
                                          : init_params<T>(cfg.model_seed, cfg.channels, cfg.blocks)};
  Optimizer<T> optimizer(cfg.optimizer, result.params);
  SamplerRng rng(cfg.sampler_seed);
  RunRecord& record = result.record;
  record.rows.reserve(sched.total_iterations());

  for (std::size_t t = 0; t < sched.total_iterations(); ++t) {
    const ShapeAt at = shape_at(sched, t);
    const double lr = lr_at(cfg.lr, sched, t);
    const Minibatch<T> batch = sample_minibatch<T>(pool.train, at.shape, rng);

    const auto start = Clock::now();
    BatchGradient<T> g = minibatch_gradient(result.params, batch, cfg.workers);
    if (!std::isfinite(g.loss)) {
      record.aborted = true;
      record.abort_iteration = t;
      record.abort_reason = "non-finite loss at iteration " + std::to_string(t);
      break;
    }
    optimizer.step(result.params, g.grads, lr);
    const double wall = elapsed_ms(start);

    record.rows.push_back({t, at.stage, at.shape, lr, g.loss, wall});
    const std::size_t done = t + 1;
    const bool last = done == sched.total_iterations();
    if (!pool.validation.empty() && (last || (cfg.eval_interval > 0 && done % cfg.eval_interval == 0))) {
      record.evals.push_back({done, evaluate_model(result.params, pool.validation, cfg.metric_channels)});
    }
  }
  return result;
}

void write_records_csv(std::ostream& os, const RunRecord& record) {
  os << "t,stage,batch,temporal,height,width,lr,loss\n";
  for (const auto& r : record.rows) {
    os << r.t << ',' << r.stage << ',' << r.shape.batch << ',' << r.shape.temporal << ',' << r.shape.spatial.height
       << ',' << r.shape.spatial.width << ',' << format_double(r.lr) << ',' << format_double(r.loss) << '\n';
  }
}

void write_timing_csv(std::ostream& os, const RunRecord& record) {
  os << "t,wall_ms\n";
  for (const auto& r : record.rows) os << r.t << ',' << format_double(r.wall_ms) << '\n';
}

void write_metrics_csv(std::ostream& os, const RunRecord& record) {
  os << "iteration,psnr_db,ssim,frames\n";
  for (const auto& e : record.evals) {
    os << e.iteration << ',' << format_double(e.report.psnr_db) << ',' << format_double(e.report.ssim) << ','
       << e.report.frame_count << '\n';
  }
}

#define MGVSR_INSTANTIATE_TRAIN(T)                                                                             \
  template BatchGradient<T> minibatch_gradient(const TinyRvsrParams<T>&, const Minibatch<T>&, std::size_t);    \
  template std::vector<double> flatten(const TinyRvsrParams<T>&);                                              \
  template void unflatten(const std::vector<double>&, TinyRvsrParams<T>&);                                     \
  template MetricReport evaluate_model(const TinyRvsrParams<T>&, const std::vector<VideoClip>&, MetricChannels); \
  template TrainResult<T> train_run<T>(const TrainConfig&, const ClipPool&);

MGVSR_INSTANTIATE_TRAIN(float)
MGVSR_INSTANTIATE_TRAIN(double)

#undef MGVSR_INSTANTIATE_TRAIN

}  // namespace mgvsr
