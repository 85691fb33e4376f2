#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mgvsr/data.hpp"
#include "mgvsr/metrics.hpp"
#include "mgvsr/model.hpp"
#include "mgvsr/schedule.hpp"
#include "mgvsr/tensor.hpp"

namespace mgvsr {

// ---------------------------------------------------------------------------
// Loss

inline constexpr double kCharbonnierEpsSq = 1e-12;

template <typename T>
struct LossResult {
  double value = 0.0;
  Tensor<T> grad;  // d value / d pred
};

/// mean(sqrt(d^2 + eps^2)) with d = pred - target.
template <typename T>
LossResult<T> loss_charbonnier(const Tensor<T>& pred, const Tensor<T>& target);

/// sum(sqrt(d^2 + eps^2)) / normalizer; lets a batch be split into pieces that
/// each carry their share of the batch mean.
template <typename T>
LossResult<T> loss_charbonnier(const Tensor<T>& pred, const Tensor<T>& target, double normalizer);

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimKind { sgd, sgd_momentum, adam };

OptimKind parse_optim_kind(const std::string& name);
std::string to_string(OptimKind kind);

struct OptimHyper {
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Holds the learning-rate independent state (momentum buffers or Adam
/// moments); the learning rate is supplied per step.
template <typename T>
class Optimizer {
 public:
  Optimizer(OptimKind kind, const TinyRvsrParams<T>& like, OptimHyper hyper = {});

  void step(TinyRvsrParams<T>& params, const TinyRvsrParams<T>& grads, double lr);

  OptimKind kind() const noexcept { return kind_; }
  std::size_t steps() const noexcept { return steps_; }

 private:
  OptimKind kind_;
  OptimHyper hyper_;
  TinyRvsrParams<T> first_;
  TinyRvsrParams<T> second_;
  std::size_t steps_ = 0;
};

/// w <- w - lr * v with v <- momentum * v + g (v starts at zero). momentum = 0
/// is the plain update w <- w - lr * g. Operates on flat vectors.
void sgd_step(std::vector<double>& params, const std::vector<double>& grads, double lr, double momentum,
              std::vector<double>& velocity);

// ---------------------------------------------------------------------------
// Minibatch gradient

template <typename T>
struct BatchGradient {
  TinyRvsrParams<T> grads;
  double loss = 0.0;
};

/// Gradient of the batch-mean Charbonnier loss. Each sample is a separate
/// work unit (spread over `workers` threads) and the per-sample gradients are
/// summed in sample order, so the result does not depend on `workers`.
template <typename T>
BatchGradient<T> minibatch_gradient(const TinyRvsrParams<T>& params, const Minibatch<T>& batch,
                                    std::size_t workers = 1);

// Flat views used by the equivalence harness.
template <typename T>
std::vector<double> flatten(const TinyRvsrParams<T>& params);

template <typename T>
void unflatten(const std::vector<double>& flat, TinyRvsrParams<T>& params);

// ---------------------------------------------------------------------------
// Training loop

struct TrainConfig {
  MultigridSchedule schedule;
  LrSpec lr;  // base_lr is the effective (already batch-scaled) rate
  OptimKind optimizer = OptimKind::adam;
  std::size_t channels = 16;
  std::size_t blocks = 2;
  std::uint64_t model_seed = 0;
  bool zero_init = false;
  std::uint64_t sampler_seed = 0;
  std::size_t eval_interval = 0;  // 0: evaluate at the end only
  std::size_t workers = 1;
  MetricChannels metric_channels = MetricChannels::rgb;
};

struct IterationRow {
  std::size_t t = 0;
  std::size_t stage = 0;
  MinibatchShape shape;
  double lr = 0.0;
  double loss = 0.0;
  double wall_ms = 0.0;  // gradient + update only; batch synthesis excluded
};

struct EvalRow {
  std::size_t iteration = 0;  // number of completed iterations
  MetricReport report;
};

struct RunRecord {
  std::vector<IterationRow> rows;
  std::vector<EvalRow> evals;
  bool aborted = false;
  std::size_t abort_iteration = 0;
  std::string abort_reason;

  double total_wall_ms() const;
  std::optional<MetricReport> final_metrics() const;
};

template <typename T>
struct TrainResult {
  RunRecord record;
  TinyRvsrParams<T> params;
};

/// Runs the schedule: for each t queries shape_at and lr_at, samples a batch of
/// that shape, takes one optimizer step. A non-finite loss stops the run and
/// marks the record aborted with the iteration index.
template <typename T>
TrainResult<T> train_run(const TrainConfig& cfg, const ClipPool& pool);

/// Validation PSNR/SSIM of the model on whole clips (outputs clamped to [0, 1]).
template <typename T>
MetricReport evaluate_model(const TinyRvsrParams<T>& params, const std::vector<VideoClip>& clips,
                            MetricChannels channels = MetricChannels::rgb);

/// Metrics of nearest-neighbour upsampling alone (the untrained residual path).
MetricReport evaluate_nearest(const std::vector<VideoClip>& clips, MetricChannels channels = MetricChannels::rgb);

/// `t,stage,batch,temporal,height,width,lr,loss` (deterministic columns only).
void write_records_csv(std::ostream& os, const RunRecord& record);
/// `t,wall_ms`.
void write_timing_csv(std::ostream& os, const RunRecord& record);
/// `iteration,psnr_db,ssim,frames`.
void write_metrics_csv(std::ostream& os, const RunRecord& record);

// ---------------------------------------------------------------------------
// Throughput

struct ShapeTiming {
  MinibatchShape shape;
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
  std::size_t reps = 0;
};

/// Mean wall time of one training iteration (gradient + optimizer step) per
/// shape. `warmup_reps` leading repetitions are discarded. Batch synthesis is
/// outside the timed region.
template <typename T>
std::vector<ShapeTiming> bench_shapes(const TinyRvsrParams<T>& params, const std::vector<VideoClip>& clips,
                                      const std::vector<MinibatchShape>& shapes, std::size_t reps,
                                      std::size_t warmup_reps = 2, std::size_t workers = 1);

/// Sum over stages of iterations x per-iteration cost of the stage shape.
double predicted_time_ms(const MultigridSchedule& schedule, const std::vector<ShapeTiming>& timings);

struct SpeedupReport {
  double predicted = 0.0;
  std::optional<double> measured;
};

/// baseline time / schedule time, predicted from per-shape timings and (when
/// both run records are given) measured end to end.
SpeedupReport schedule_speedup(const MultigridSchedule& schedule, const MultigridSchedule& baseline,
                               const std::vector<ShapeTiming>& timings, const RunRecord* schedule_run = nullptr,
                               const RunRecord* baseline_run = nullptr);

/// Distinct shapes of a schedule in first-use order.
std::vector<MinibatchShape> schedule_shapes(const MultigridSchedule& schedule);

}  // namespace mgvsr
