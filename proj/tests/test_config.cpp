#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mgvsr/config.hpp"
#include "mgvsr/error.hpp"

namespace mgvsr {
namespace {

using nlohmann::json;

json minimal() {
  return json::parse(R"({
    "schedule": {"mode": "hierarchical", "spatial": [8, 16], "temporal": [4, 6, 8],
                 "total_iterations": 600, "batch": 8},
    "lr": {"base": 1e-3, "mode": "literal-cosine", "warmup_iters": 0, "base_batch": 4},
    "model": {"channels": 4, "blocks": 1, "seed": 1},
    "data": {"train_clips": 2, "val_clips": 1, "frames": 8, "height": 64, "width": 64, "seed": 3},
    "run": {"eval_interval": 0, "precision": "f32", "workers": 1, "seed": 5}
  })");
}

TEST(Config, ParsesAndBuildsSchedule) {
  const auto cfg = parse_config(minimal());
  const auto sched = build_schedule(cfg);
  EXPECT_EQ(sched.label(), "8&4/8&6/8&8/16&4/16&6/16&8");
  EXPECT_EQ(sched.total_iterations(), 600u);
  EXPECT_EQ(effective_lr(cfg).base_lr, 2e-3);
  EXPECT_EQ(cfg.optimizer, OptimKind::adam);

  const auto base = build_baseline_schedule(cfg);
  ASSERT_EQ(base.stages().size(), 1u);
  EXPECT_EQ(base.label(), "16&8");
  EXPECT_EQ(base.total_iterations(), 600u);
}

TEST(Config, RoundTripIsStable) {
  json j = minimal();
  j["schedule"]["extra_stages"] = json::parse(R"([{"spatial": [16, 12], "temporal": 5, "iterations": 40}])");
  j["lr"]["warmup_iters"] = 30;
  j["lr"]["warmup_start_factor"] = 0.1;
  j["optim"] = {{"kind", "sgd-momentum"}};
  j["run"]["metric_channels"] = "luma";
  const json once = to_json(parse_config(j));
  EXPECT_EQ(to_json(parse_config(once)), once);
  EXPECT_EQ(once["schedule"]["extra_stages"][0]["batch"], 8);
  EXPECT_EQ(build_schedule(parse_config(once)).total_iterations(), 640u);
}

TEST(Config, DeriveMatchesDerivationRules) {
  json j = minimal();
  j["schedule"]["spatial"] = json::object({{"derive", 64}});
  j["schedule"]["temporal"] = json::object({{"derive", 8}});
  j["data"]["height"] = j["data"]["width"] = 256;
  const auto cfg = parse_config(j);
  EXPECT_EQ(cfg.schedule.spatial, derive_spatial_sizes(64, 64).sizes());
  EXPECT_EQ(cfg.schedule.temporal, (std::vector<std::size_t>{6, 6, 8}));
  // The explicit dump carries no derive marker.
  EXPECT_TRUE(to_json(cfg)["schedule"]["spatial"].is_array());
  EXPECT_EQ(to_json(cfg)["schedule"]["spatial"][0], json::array({32, 32}));

  // The 32-pixel floor turns small bases into a shrinking cycle, which is refused.
  j["schedule"]["spatial"] = json::object({{"derive", 16}});
  EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, RejectsUnknownKeysEverywhere) {
  for (const char* section : {"schedule", "lr", "model", "data", "run"}) {
    json j = minimal();
    j[section]["bogus"] = 1;
    EXPECT_THROW(parse_config(j), ConfigError) << section;
  }
  json top = minimal();
  top["extra"] = {};
  EXPECT_THROW(parse_config(top), ConfigError);
}

TEST(Config, ScheduleCriticalFieldsHaveNoDefaults) {
  const std::vector<std::pair<const char*, const char*>> required = {
      {"schedule", "total_iterations"}, {"schedule", "batch"}, {"schedule", "spatial"}, {"schedule", "temporal"},
      {"lr", "base"},                   {"lr", "mode"},        {"lr", "warmup_iters"},  {"lr", "base_batch"}};
  for (const auto& [section, key] : required) {
    json j = minimal();
    j[section].erase(key);
    EXPECT_THROW(parse_config(j), ConfigError) << section << "." << key;
  }
}

TEST(Config, RejectsInconsistentValues) {
  auto broken = [](auto edit) {
    json j = minimal();
    edit(j);
    return j;
  };
  EXPECT_THROW(parse_config(broken([](json& j) { j["schedule"]["mode"] = "spiral"; })), ConfigError);
  EXPECT_THROW(parse_config(broken([](json& j) { j["schedule"]["mode"] = "synchronous"; })), ConfigError);
  EXPECT_THROW(parse_config(broken([](json& j) { j["schedule"]["mode"] = "fixed"; })), ConfigError);
  EXPECT_THROW(parse_config(broken([](json& j) { j["schedule"]["total_iterations"] = 0; })), ConfigError);
  EXPECT_THROW(parse_config(broken([](json& j) { j["schedule"]["total_iterations"] = 5; })), ConfigError);
  EXPECT_THROW(parse_config(broken([](json& j) { j["schedule"]["batch"] = -2; })), ConfigError);
  EXPECT_THROW(parse_config(broken([](json& j) { j["schedule"]["spatial"] = {8, 32}; })), ConfigError);
  EXPECT_THROW(parse_config(broken([](json& j) { j["data"]["height"] = 62; })), ConfigError);
  EXPECT_THROW(parse_config(broken([](json& j) { j["lr"]["base"] = -1.0; })), ConfigError);
  EXPECT_THROW(parse_config(broken([](json& j) { j["lr"]["mode"] = "step"; })), ConfigError);
  EXPECT_THROW(parse_config(broken([](json& j) { j["run"]["precision"] = "f16"; })), ConfigError);
  EXPECT_THROW(parse_config(broken([](json& j) { j["run"]["workers"] = 0; })), ConfigError);
  EXPECT_THROW(parse_config(broken([](json& j) { j["model"]["init"] = "xavier"; })), ConfigError);
  EXPECT_THROW(parse_config(broken([](json& j) { j["optim"] = {{"kind", "lion"}}; })), ConfigError);
  EXPECT_THROW(parse_config(broken([](json& j) { j["model"]["channels"] = "wide"; })), ConfigError);
}

TEST(Config, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "mgvsr_config_test.json";
  {
    std::ofstream os(path);
    os << minimal().dump();
  }
  EXPECT_EQ(to_json(load_config(path)), to_json(parse_config(minimal())));
  {
    std::ofstream os(path);
    os << "{ not json";
  }
  EXPECT_THROW(load_config(path), ConfigError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_config(path), ConfigError);
}

}  // namespace
}  // namespace mgvsr
