#include "mgvsr/config.hpp"

#include <fstream>
#include <set>

#include "mgvsr/error.hpp"

namespace mgvsr {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + where + "." + key + "'");
  }
}

const json& require(const json& obj, const std::string& where, const std::string& key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError("missing required key '" + where + "." + key + "'");
  return *it;
}

std::size_t as_count(const json& v, const std::string& what, std::size_t min = 0) {
  if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min)) {
    throw ConfigError(what + " must be an integer >= " + std::to_string(min));
  }
  return v.get<std::size_t>();
}

double as_real(const json& v, const std::string& what) {
  if (!v.is_number()) throw ConfigError(what + " must be a number");
  return v.get<double>();
}

std::string as_string(const json& v, const std::string& what) {
  if (!v.is_string()) throw ConfigError(what + " must be a string");
  return v.get<std::string>();
}

SpatialSize as_spatial(const json& v, const std::string& what) {
  if (v.is_number_integer()) {
    const std::size_t s = as_count(v, what, 1);
    return {s, s};
  }
  if (!v.is_array() || v.size() != 2) throw ConfigError(what + " must be [height, width] or a single integer");
  return {as_count(v[0], what + "[0]", 1), as_count(v[1], what + "[1]", 1)};
}

bool is_derive(const json& v) { return v.is_object() && v.contains("derive"); }

std::vector<SpatialSize> parse_spatial_list(const json& v) {
  const std::string where = "schedule.spatial";
  if (is_derive(v)) {
    reject_unknown(v, where, {"derive"});
    const SpatialSize base = as_spatial(v.at("derive"), where + ".derive");
    return derive_spatial_sizes(base.height, base.width).sizes();
  }
  if (!v.is_array() || v.empty()) throw ConfigError(where + " must be a nonempty list or {\"derive\": [H, W]}");
  std::vector<SpatialSize> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_spatial(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::size_t> parse_temporal_list(const json& v) {
  const std::string where = "schedule.temporal";
  if (is_derive(v)) {
    reject_unknown(v, where, {"derive"});
    return derive_temporal_sizes(as_count(v.at("derive"), where + ".derive", 1)).sizes();
  }
  if (!v.is_array() || v.empty()) throw ConfigError(where + " must be a nonempty list or {\"derive\": T}");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_count(v[i], where + "[" + std::to_string(i) + "]", 1));
  return out;
}

ScheduleMode parse_mode(const std::string& s) {
  if (s == "hierarchical") return ScheduleMode::hierarchical;
  if (s == "synchronous") return ScheduleMode::synchronous;
  if (s == "fixed") return ScheduleMode::fixed;
  throw ConfigError("schedule.mode must be hierarchical, synchronous or fixed, got '" + s + "'");
}

std::string mode_name(ScheduleMode m) {
  switch (m) {
    case ScheduleMode::hierarchical: return "hierarchical";
    case ScheduleMode::synchronous: return "synchronous";
    case ScheduleMode::fixed: return "fixed";
  }
  return "unknown";
}

json spatial_json(const SpatialSize& s) { return json::array({s.height, s.width}); }

MultigridSchedule compose_cycle(const ExperimentConfig::Schedule& s) {
  switch (s.mode) {
    case ScheduleMode::hierarchical:
      return compose_hierarchical(SpatialCycle(s.spatial), TemporalCycle(s.temporal), s.total_iterations, s.batch);
    case ScheduleMode::synchronous: {
      std::vector<std::pair<SpatialSize, std::size_t>> pairs;
      for (std::size_t i = 0; i < s.spatial.size(); ++i) pairs.emplace_back(s.spatial[i], s.temporal[i]);
      return compose_synchronous(pairs, s.total_iterations, s.batch);
    }
    case ScheduleMode::fixed:
      return compose_fixed(s.spatial.front(), s.temporal.front(), s.total_iterations, s.batch);
  }
  throw ConfigError("unknown schedule mode");
}

void validate(const ExperimentConfig& cfg) {
  const auto& s = cfg.schedule;
  if (s.mode == ScheduleMode::synchronous && s.spatial.size() != s.temporal.size()) {
    throw ConfigError("synchronous schedule needs as many spatial as temporal sizes");
  }
  if (s.mode == ScheduleMode::fixed && (s.spatial.size() != 1 || s.temporal.size() != 1)) {
    throw ConfigError("fixed schedule takes exactly one spatial and one temporal size");
  }
  MultigridSchedule sched = [&] {
    try {
      return build_schedule(cfg);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("schedule: ") + e.what());
    }
  }();
  try {
    (void)lr_at(effective_lr(cfg), sched, 0);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("lr: ") + e.what());
  }
  const auto& d = cfg.data;
  if (d.height % kDegradeFactor != 0 || d.width % kDegradeFactor != 0 || d.height == 0 || d.width == 0) {
    throw ConfigError("data.height and data.width must be positive multiples of 4");
  }
  for (const auto& st : sched.stages()) {
    if (st.spatial.height > d.height / kDegradeFactor || st.spatial.width > d.width / kDegradeFactor) {
      throw ConfigError("crop " + std::to_string(st.spatial.height) + "x" + std::to_string(st.spatial.width) +
                        " does not fit the " + std::to_string(d.height / kDegradeFactor) + "x" +
                        std::to_string(d.width / kDegradeFactor) + " LR frames");
    }
  }
}

}  // namespace

Precision parse_precision(const std::string& name) {
  if (name == "f32") return Precision::f32;
  if (name == "f64") return Precision::f64;
  throw ConfigError("precision must be f32 or f64, got '" + name + "'");
}

std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  try {
    reject_unknown(j, "config", {"schedule", "lr", "optim", "model", "data", "run"});

    const json& s = require(j, "config", "schedule");
    reject_unknown(s, "schedule", {"mode", "spatial", "temporal", "total_iterations", "batch", "extra_stages"});
    cfg.schedule.mode = parse_mode(as_string(require(s, "schedule", "mode"), "schedule.mode"));
    cfg.schedule.spatial = parse_spatial_list(require(s, "schedule", "spatial"));
    cfg.schedule.temporal = parse_temporal_list(require(s, "schedule", "temporal"));
    cfg.schedule.total_iterations = as_count(require(s, "schedule", "total_iterations"), "schedule.total_iterations", 1);
    cfg.schedule.batch = as_count(require(s, "schedule", "batch"), "schedule.batch", 1);
    if (auto it = s.find("extra_stages"); it != s.end()) {
      if (!it->is_array()) throw ConfigError("schedule.extra_stages must be a list");
      for (std::size_t i = 0; i < it->size(); ++i) {
        const std::string where = "schedule.extra_stages[" + std::to_string(i) + "]";
        const json& e = (*it)[i];
        reject_unknown(e, where, {"spatial", "temporal", "iterations", "batch"});
        StagePlan p;
        p.spatial = as_spatial(require(e, where, "spatial"), where + ".spatial");
        p.temporal = as_count(require(e, where, "temporal"), where + ".temporal", 1);
        p.iterations = as_count(require(e, where, "iterations"), where + ".iterations", 1);
        p.batch = e.contains("batch") ? as_count(e.at("batch"), where + ".batch", 1) : cfg.schedule.batch;
        cfg.schedule.extra_stages.push_back(p);
      }
    }

    const json& lr = require(j, "config", "lr");
    reject_unknown(lr, "lr", {"base", "mode", "warmup_iters", "warmup_start_factor", "base_batch"});
    cfg.lr.base = as_real(require(lr, "lr", "base"), "lr.base");
    try {
      cfg.lr.mode = parse_lr_mode(as_string(require(lr, "lr", "mode"), "lr.mode"));
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    cfg.lr.warmup_iters = as_count(require(lr, "lr", "warmup_iters"), "lr.warmup_iters");
    if (lr.contains("warmup_start_factor")) {
      cfg.lr.warmup_start_factor = as_real(lr.at("warmup_start_factor"), "lr.warmup_start_factor");
    }
    cfg.lr.base_batch = as_count(require(lr, "lr", "base_batch"), "lr.base_batch", 1);

    if (auto it = j.find("optim"); it != j.end()) {
      reject_unknown(*it, "optim", {"kind"});
      try {
        cfg.optimizer = parse_optim_kind(as_string(require(*it, "optim", "kind"), "optim.kind"));
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      }
    }

    const json& m = require(j, "config", "model");
    reject_unknown(m, "model", {"channels", "blocks", "seed", "init"});
    cfg.model.channels = as_count(require(m, "model", "channels"), "model.channels", 1);
    cfg.model.blocks = as_count(require(m, "model", "blocks"), "model.blocks");
    cfg.model.seed = as_count(require(m, "model", "seed"), "model.seed");
    if (m.contains("init")) {
      const std::string init = as_string(m.at("init"), "model.init");
      if (init != "kaiming" && init != "zero") throw ConfigError("model.init must be kaiming or zero");
      cfg.model.zero_init = init == "zero";
    }

    const json& d = require(j, "config", "data");
    reject_unknown(d, "data", {"train_clips", "val_clips", "frames", "height", "width", "seed"});
    cfg.data.train_clips = as_count(require(d, "data", "train_clips"), "data.train_clips", 1);
    cfg.data.val_clips = as_count(require(d, "data", "val_clips"), "data.val_clips");
    cfg.data.frames = as_count(require(d, "data", "frames"), "data.frames", 1);
    cfg.data.height = as_count(require(d, "data", "height"), "data.height", 4);
    cfg.data.width = as_count(require(d, "data", "width"), "data.width", 4);
    cfg.data.seed = as_count(require(d, "data", "seed"), "data.seed");

    const json& r = require(j, "config", "run");
    reject_unknown(r, "run", {"eval_interval", "output_dir", "precision", "workers", "seed", "metric_channels"});
    cfg.run.eval_interval = as_count(require(r, "run", "eval_interval"), "run.eval_interval");
    if (r.contains("output_dir")) cfg.run.output_dir = as_string(r.at("output_dir"), "run.output_dir");
    cfg.run.precision = parse_precision(as_string(require(r, "run", "precision"), "run.precision"));
    cfg.run.workers = as_count(require(r, "run", "workers"), "run.workers", 1);
    cfg.run.seed = as_count(require(r, "run", "seed"), "run.seed");
    if (r.contains("metric_channels")) {
      try {
        cfg.run.metric_channels = parse_metric_channels(as_string(r.at("metric_channels"), "run.metric_channels"));
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      }
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON");
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& cfg) {
  json spatial = json::array();
  for (const auto& s : cfg.schedule.spatial) spatial.push_back(spatial_json(s));
  json extra = json::array();
  for (const auto& e : cfg.schedule.extra_stages) {
    extra.push_back({{"spatial", spatial_json(e.spatial)},
                     {"temporal", e.temporal},
                     {"iterations", e.iterations},
                     {"batch", e.batch}});
  }
  json j;
  j["schedule"] = {{"mode", mode_name(cfg.schedule.mode)},
                   {"spatial", spatial},
                   {"temporal", cfg.schedule.temporal},
                   {"total_iterations", cfg.schedule.total_iterations},
                   {"batch", cfg.schedule.batch},
                   {"extra_stages", extra}};
  j["lr"] = {{"base", cfg.lr.base},
             {"mode", to_string(cfg.lr.mode)},
             {"warmup_iters", cfg.lr.warmup_iters},
             {"warmup_start_factor", cfg.lr.warmup_start_factor},
             {"base_batch", cfg.lr.base_batch}};
  j["optim"] = {{"kind", to_string(cfg.optimizer)}};
  j["model"] = {{"channels", cfg.model.channels},
                {"blocks", cfg.model.blocks},
                {"seed", cfg.model.seed},
                {"init", cfg.model.zero_init ? "zero" : "kaiming"}};
  j["data"] = {{"train_clips", cfg.data.train_clips}, {"val_clips", cfg.data.val_clips},
               {"frames", cfg.data.frames},           {"height", cfg.data.height},
               {"width", cfg.data.width},             {"seed", cfg.data.seed}};
  j["run"] = {{"eval_interval", cfg.run.eval_interval},
              {"output_dir", cfg.run.output_dir},
              {"precision", to_string(cfg.run.precision)},
              {"workers", cfg.run.workers},
              {"seed", cfg.run.seed},
              {"metric_channels", cfg.run.metric_channels == MetricChannels::rgb ? "rgb" : "luma"}};
  return j;
}

MultigridSchedule build_schedule(const ExperimentConfig& cfg) {
  MultigridSchedule sched = compose_cycle(cfg.schedule);
  for (const auto& extra : cfg.schedule.extra_stages) sched = append_stage(sched, extra);
  return sched;
}

MultigridSchedule build_baseline_schedule(const ExperimentConfig& cfg) {
  const MultigridSchedule cycle = compose_cycle(cfg.schedule);
  const StagePlan& last = cycle.stages().back();
  return compose_fixed(last.spatial, last.temporal, cfg.schedule.total_iterations, cfg.schedule.batch);
}

LrSpec effective_lr(const ExperimentConfig& cfg) {
  return {scaled_lr(cfg.lr.base, cfg.lr.base_batch, cfg.schedule.batch), cfg.lr.mode, cfg.lr.warmup_iters,
          cfg.lr.warmup_start_factor};
}

TrainConfig make_train_config(const ExperimentConfig& cfg) {
  return TrainConfig{build_schedule(cfg),      effective_lr(cfg),   cfg.optimizer,
                     cfg.model.channels,       cfg.model.blocks,    cfg.model.seed,
                     cfg.model.zero_init,      cfg.run.seed,        cfg.run.eval_interval,
                     cfg.run.workers,          cfg.run.metric_channels};
}

}  // namespace mgvsr
