#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace mgvsr {

/// Spatial crop size in low-resolution pixels.
struct SpatialSize {
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t area() const noexcept { return height * width; }
  bool operator==(const SpatialSize&) const = default;
};

/// Ordered spatial sizes of a spatial cycle, s = sizes.size() stages.
/// Areas are nondecreasing and every dimension is positive.
class SpatialCycle {
 public:
  explicit SpatialCycle(std::vector<SpatialSize> sizes);

  const std::vector<SpatialSize>& sizes() const noexcept { return sizes_; }
  std::size_t count() const noexcept { return sizes_.size(); }
  bool operator==(const SpatialCycle&) const = default;

 private:
  std::vector<SpatialSize> sizes_;
};

/// Ordered, nondecreasing frame counts of a temporal cycle, f = sizes.size().
class TemporalCycle {
 public:
  explicit TemporalCycle(std::vector<std::size_t> sizes);

  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
  std::size_t count() const noexcept { return sizes_.size(); }
  bool operator==(const TemporalCycle&) const = default;

 private:
  std::vector<std::size_t> sizes_;
};

struct MinibatchShape {
  std::size_t batch = 0;
  std::size_t temporal = 0;
  SpatialSize spatial;

  bool operator==(const MinibatchShape&) const = default;
};

/// One spatial-temporal stage: a fixed minibatch shape held for `iterations` steps.
struct StagePlan {
  SpatialSize spatial;
  std::size_t temporal = 0;
  std::size_t batch = 0;
  std::size_t iterations = 0;

  MinibatchShape shape() const { return {batch, temporal, spatial}; }
  bool operator==(const StagePlan&) const = default;
};

/// Ordered stages partitioning [0, total_iterations). Immutable once built.
class MultigridSchedule {
 public:
  /// Validates the stage list; stages must be nonempty with positive fields.
  explicit MultigridSchedule(std::vector<StagePlan> stages);

  const std::vector<StagePlan>& stages() const noexcept { return stages_; }
  std::size_t stage_count() const noexcept { return stages_.size(); }
  std::size_t total_iterations() const noexcept { return total_; }

  /// First iteration of the 0-based stage `index` (sum of the earlier P_j).
  std::size_t stage_start(std::size_t index) const { return starts_.at(index); }

  /// Non-fatal remarks collected at construction (e.g. very small crops).
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  /// Human-readable "32&7/32&11/..." using crop height as the spatial label.
  std::string label() const;

  bool operator==(const MultigridSchedule& other) const { return stages_ == other.stages_; }

 private:
  std::vector<StagePlan> stages_;
  std::vector<std::size_t> starts_;
  std::size_t total_ = 0;
  std::vector<std::string> warnings_;
};

enum class LrMode { literal_cosine, half_cosine };

LrMode parse_lr_mode(const std::string& name);
std::string to_string(LrMode mode);

/// Base learning rate, annealing curve and initial linear warmup.
struct LrSpec {
  double base_lr = 0.0;
  LrMode mode = LrMode::literal_cosine;
  std::size_t warmup_iters = 0;
  double warmup_start_factor = 0.0;
};

/// Stage lookup result; `stage` is 1-based.
struct ShapeAt {
  MinibatchShape shape;
  std::size_t stage = 0;
};

/// Default two-stage spatial cycle: max(32, H/2) x max(32, W/2), then H x W.
SpatialCycle derive_spatial_sizes(std::size_t height, std::size_t width);

/// Default three-stage temporal cycle: max(6, T/2), 3T/4, T (floored, clamped to
/// [.., T] and made nondecreasing).
TemporalCycle derive_temporal_sizes(std::size_t frames);

/// Places the full temporal cycle inside each spatial stage: s*f stages of equal
/// length, the division remainder going to the final stage.
MultigridSchedule compose_hierarchical(const SpatialCycle& spatial, const TemporalCycle& temporal,
                                       std::size_t total_iterations, std::size_t batch);

/// Changes spatial and temporal size together, one stage per pair.
MultigridSchedule compose_synchronous(const std::vector<std::pair<SpatialSize, std::size_t>>& pairs,
                                      std::size_t total_iterations, std::size_t batch);

/// Single fixed-shape stage (the conventional baseline).
MultigridSchedule compose_fixed(SpatialSize spatial, std::size_t temporal, std::size_t total_iterations,
                                std::size_t batch);

/// Appends one more stage; its shape may exceed every earlier one.
MultigridSchedule append_stage(const MultigridSchedule& schedule, const StagePlan& plan);

ShapeAt shape_at(const MultigridSchedule& schedule, std::size_t t);

/// Restarting cosine learning rate. Each stage restarts at base_lr; non-final
/// stages anneal with the stage offset over I_total, the final stage over its
/// own length. Warmup multiplies by a linear ramp over the first warmup_iters.
double lr_at(const LrSpec& spec, const MultigridSchedule& schedule, std::size_t t);

/// Linear scaling rule: base_lr * actual_batch / base_batch.
double scaled_lr(double base_lr, std::size_t base_batch, std::size_t actual_batch);

/// CSV with header `t,stage,batch,temporal,height,width,lr`; one row every
/// `stride` iterations starting at t = 0.
void write_schedule_csv(std::ostream& os, const MultigridSchedule& schedule, const LrSpec& spec,
                        std::size_t stride = 1);

}  // namespace mgvsr
