#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mgvsr/data.hpp"
#include "mgvsr/metrics.hpp"
#include "mgvsr/schedule.hpp"
#include "mgvsr/train.hpp"

namespace mgvsr {

enum class ScheduleMode { hierarchical, synchronous, fixed };

enum class Precision { f32, f64 };

Precision parse_precision(const std::string& name);
std::string to_string(Precision p);

/// A fully validated experiment description. Unknown keys are rejected and the
/// schedule-critical fields (sizes, total iterations, batch, base lr, lr mode,
/// warmup, base batch) have no defaults. Sizes may be given as `{"derive": ...}`,
/// which is resolved at parse time with the default derivation rules.
struct ExperimentConfig {
  struct Schedule {
    ScheduleMode mode = ScheduleMode::hierarchical;
    std::vector<SpatialSize> spatial;
    std::vector<std::size_t> temporal;
    std::size_t total_iterations = 0;
    std::size_t batch = 0;
    std::vector<StagePlan> extra_stages;
  } schedule;

  struct Lr {
    double base = 0.0;
    LrMode mode = LrMode::literal_cosine;
    std::size_t warmup_iters = 0;
    double warmup_start_factor = 0.0;
    std::size_t base_batch = 0;
  } lr;

  OptimKind optimizer = OptimKind::adam;

  struct Model {
    std::size_t channels = 16;
    std::size_t blocks = 2;
    std::uint64_t seed = 0;
    bool zero_init = false;
  } model;

  DataConfig data;

  struct Run {
    std::size_t eval_interval = 0;
    std::string output_dir;
    Precision precision = Precision::f32;
    std::size_t workers = 1;
    std::uint64_t seed = 0;
    MetricChannels metric_channels = MetricChannels::rgb;
  } run;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Explicit form of the config (derived sizes written out); parses back to an
/// identical config.
nlohmann::json to_json(const ExperimentConfig& cfg);

MultigridSchedule build_schedule(const ExperimentConfig& cfg);

/// Fixed-shape schedule at the final stage's shape with the same iteration count.
MultigridSchedule build_baseline_schedule(const ExperimentConfig& cfg);

/// LrSpec whose base rate is the batch-scaled rate.
LrSpec effective_lr(const ExperimentConfig& cfg);

TrainConfig make_train_config(const ExperimentConfig& cfg);

}  // namespace mgvsr
