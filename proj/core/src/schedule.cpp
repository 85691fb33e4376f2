#include "mgvsr/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "mgvsr/error.hpp"
#include "mgvsr/format.hpp"

namespace mgvsr {
namespace {

constexpr std::size_t kSmallCropWarning = 8;

std::string size_label(const StagePlan& p) {
  std::string s = std::to_string(p.spatial.height);
  if (p.spatial.width != p.spatial.height) s += "x" + std::to_string(p.spatial.width);
  return s + "&" + std::to_string(p.temporal);
}

std::vector<StagePlan> equal_division(std::vector<StagePlan> stages, std::size_t total) {
  if (stages.empty()) throw InvalidArgument("schedule needs at least one stage");
  if (total < stages.size()) {
    throw InvalidArgument("total iterations " + std::to_string(total) + " smaller than stage count " +
                          std::to_string(stages.size()));
  }
  const std::size_t each = total / stages.size();
  for (auto& s : stages) s.iterations = each;
  stages.back().iterations += total - each * stages.size();
  return stages;
}

}  // namespace

SpatialCycle::SpatialCycle(std::vector<SpatialSize> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.empty()) throw InvalidArgument("spatial cycle must have at least one size");
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (sizes_[i].height == 0 || sizes_[i].width == 0) {
      throw InvalidArgument("spatial cycle entry " + std::to_string(i) + " has a zero dimension");
    }
    if (i > 0 && sizes_[i].area() < sizes_[i - 1].area()) {
      throw InvalidArgument("spatial cycle areas must be nondecreasing");
    }
  }
}

TemporalCycle::TemporalCycle(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.empty()) throw InvalidArgument("temporal cycle must have at least one size");
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (sizes_[i] == 0) throw InvalidArgument("temporal cycle entries must be at least 1");
    if (i > 0 && sizes_[i] < sizes_[i - 1]) throw InvalidArgument("temporal cycle must be nondecreasing");
  }
}

MultigridSchedule::MultigridSchedule(std::vector<StagePlan> stages) : stages_(std::move(stages)) {
  if (stages_.empty()) throw InvalidArgument("schedule needs at least one stage");
  starts_.reserve(stages_.size());
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const StagePlan& p = stages_[i];
    if (p.iterations == 0) throw InvalidArgument("stage " + std::to_string(i + 1) + " has zero iterations");
    if (p.batch == 0) throw InvalidArgument("stage " + std::to_string(i + 1) + " has zero batch");
    if (p.temporal == 0) throw InvalidArgument("stage " + std::to_string(i + 1) + " has zero temporal size");
    if (p.spatial.height == 0 || p.spatial.width == 0) {
      throw InvalidArgument("stage " + std::to_string(i + 1) + " has a zero spatial dimension");
    }
    if (p.spatial.height < kSmallCropWarning || p.spatial.width < kSmallCropWarning) {
      warnings_.push_back("stage " + std::to_string(i + 1) + " crop " + std::to_string(p.spatial.height) + "x" +
                          std::to_string(p.spatial.width) + " is smaller than 8x8; accuracy may degrade");
    }
    starts_.push_back(total_);
    total_ += p.iterations;
  }
}

std::string MultigridSchedule::label() const {
  std::string out;
  for (const auto& p : stages_) {
    if (!out.empty()) out += "/";
    out += size_label(p);
  }
  return out;
}

LrMode parse_lr_mode(const std::string& name) {
  if (name == "literal-cosine") return LrMode::literal_cosine;
  if (name == "half-cosine") return LrMode::half_cosine;
  throw InvalidArgument("unknown lr mode '" + name + "' (expected literal-cosine or half-cosine)");
}

std::string to_string(LrMode mode) {
  return mode == LrMode::literal_cosine ? "literal-cosine" : "half-cosine";
}

SpatialCycle derive_spatial_sizes(std::size_t height, std::size_t width) {
  if (height < 2 || width < 2) throw InvalidArgument("derive_spatial_sizes: H and W must be at least 2");
  return SpatialCycle({{std::max<std::size_t>(32, height / 2), std::max<std::size_t>(32, width / 2)},
                       {height, width}});
}

TemporalCycle derive_temporal_sizes(std::size_t frames) {
  if (frames < 1) throw InvalidArgument("derive_temporal_sizes: T must be at least 1");
  const std::size_t first = std::min(frames, std::max<std::size_t>(6, frames / 2));
  const std::size_t second = std::min(frames, std::max(first, 3 * frames / 4));
  return TemporalCycle({first, second, frames});
}

MultigridSchedule compose_hierarchical(const SpatialCycle& spatial, const TemporalCycle& temporal,
                                       std::size_t total_iterations, std::size_t batch) {
  std::vector<StagePlan> stages;
  for (const auto& sp : spatial.sizes())
    for (std::size_t tp : temporal.sizes()) stages.push_back({sp, tp, batch, 0});
  return MultigridSchedule(equal_division(std::move(stages), total_iterations));
}

MultigridSchedule compose_synchronous(const std::vector<std::pair<SpatialSize, std::size_t>>& pairs,
                                      std::size_t total_iterations, std::size_t batch) {
  if (pairs.empty()) throw InvalidArgument("compose_synchronous: no (spatial, temporal) pairs given");
  std::vector<StagePlan> stages;
  for (const auto& [sp, tp] : pairs) stages.push_back({sp, tp, batch, 0});
  return MultigridSchedule(equal_division(std::move(stages), total_iterations));
}

MultigridSchedule compose_fixed(SpatialSize spatial, std::size_t temporal, std::size_t total_iterations,
                                std::size_t batch) {
  return compose_synchronous({{spatial, temporal}}, total_iterations, batch);
}

MultigridSchedule append_stage(const MultigridSchedule& schedule, const StagePlan& plan) {
  if (plan.iterations == 0) throw InvalidArgument("append_stage: appended stage needs at least one iteration");
  std::vector<StagePlan> stages = schedule.stages();
  stages.push_back(plan);
  return MultigridSchedule(std::move(stages));
}

ShapeAt shape_at(const MultigridSchedule& schedule, std::size_t t) {
  if (t >= schedule.total_iterations()) {
    throw OutOfRange("iteration " + std::to_string(t) + " outside [0, " +
                     std::to_string(schedule.total_iterations()) + ")");
  }
  std::size_t lo = 0, hi = schedule.stage_count();
  // Largest index whose start is <= t.
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (schedule.stage_start(mid) <= t) lo = mid; else hi = mid;
  }
  return {schedule.stages()[lo].shape(), lo + 1};
}

double lr_at(const LrSpec& spec, const MultigridSchedule& schedule, std::size_t t) {
  if (!(spec.base_lr > 0.0)) throw InvalidArgument("base learning rate must be positive");
  if (spec.warmup_iters >= schedule.total_iterations()) {
    throw InvalidArgument("warmup length must be smaller than total iterations");
  }
  if (!(spec.warmup_start_factor >= 0.0 && spec.warmup_start_factor <= 1.0)) {
    throw InvalidArgument("warmup start factor must lie in [0, 1]");
  }
  const std::size_t stage = shape_at(schedule, t).stage;
  const std::size_t offset = t - schedule.stage_start(stage - 1);
  const bool final_stage = stage == schedule.stage_count();
  const double period = final_stage ? static_cast<double>(schedule.stages().back().iterations)
                                    : static_cast<double>(schedule.total_iterations());
  const double x = static_cast<double>(offset) / period;
  const double curve = spec.mode == LrMode::literal_cosine ? std::cos(x)
                                                           : 0.5 * (1.0 + std::cos(std::numbers::pi * x));
  double lr = curve * spec.base_lr;
  if (t < spec.warmup_iters) {
    const double ramp = static_cast<double>(t) / static_cast<double>(spec.warmup_iters);
    lr *= spec.warmup_start_factor + (1.0 - spec.warmup_start_factor) * ramp;
  }
  return lr;
}

double scaled_lr(double base_lr, std::size_t base_batch, std::size_t actual_batch) {
  if (base_batch == 0) throw InvalidArgument("scaled_lr: base batch must be positive");
  if (actual_batch == 0) throw InvalidArgument("scaled_lr: actual batch must be positive");
  return base_lr * (static_cast<double>(actual_batch) / static_cast<double>(base_batch));
}

void write_schedule_csv(std::ostream& os, const MultigridSchedule& schedule, const LrSpec& spec,
                        std::size_t stride) {
  if (stride == 0) throw InvalidArgument("stride must be positive");
  os << "t,stage,batch,temporal,height,width,lr\n";
  for (std::size_t t = 0; t < schedule.total_iterations(); t += stride) {
    const ShapeAt at = shape_at(schedule, t);
    os << t << ',' << at.stage << ',' << at.shape.batch << ',' << at.shape.temporal << ','
       << at.shape.spatial.height << ',' << at.shape.spatial.width << ',' << format_double(lr_at(spec, schedule, t))
       << '\n';
  }
}

}  // namespace mgvsr
