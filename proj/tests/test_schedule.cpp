#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "mgvsr/error.hpp"
#include "mgvsr/schedule.hpp"

namespace mgvsr {
namespace {

SpatialCycle square_cycle(std::vector<std::size_t> sides) {
  std::vector<SpatialSize> sizes;
  for (auto s : sides) sizes.push_back({s, s});
  return SpatialCycle(sizes);
}

MultigridSchedule six_stage() {
  return compose_hierarchical(square_cycle({32, 64}), TemporalCycle({7, 11, 15}), 75000, 64);
}

// Independent restatement of the restarting cosine rule, walking the stages
// linearly instead of by binary search.
double oracle_lr(const MultigridSchedule& s, const LrSpec& spec, std::size_t t) {
  std::size_t start = 0, stage = 0;
  while (t >= start + s.stages()[stage].iterations) start += s.stages()[stage++].iterations;
  const bool last = stage + 1 == s.stage_count();
  const double denom = last ? static_cast<double>(s.stages()[stage].iterations)
                            : static_cast<double>(s.total_iterations());
  const double x = static_cast<double>(t - start) / denom;
  double v = spec.mode == LrMode::literal_cosine ? std::cos(x) : 0.5 * (1.0 + std::cos(std::numbers::pi * x));
  if (t < spec.warmup_iters) {
    const double a = static_cast<double>(t) / static_cast<double>(spec.warmup_iters);
    v *= spec.warmup_start_factor + (1.0 - spec.warmup_start_factor) * a;
  }
  return v * spec.base_lr;
}

TEST(DeriveSizes, Spatial) {
  EXPECT_EQ(derive_spatial_sizes(64, 64), square_cycle({32, 64}));
  EXPECT_EQ(derive_spatial_sizes(32, 32), square_cycle({32, 32}));
  EXPECT_EQ(derive_spatial_sizes(100, 80), SpatialCycle({{50, 40}, {100, 80}}));
  EXPECT_THROW(derive_spatial_sizes(1, 64), InvalidArgument);
  EXPECT_THROW(derive_spatial_sizes(64, 1), InvalidArgument);
}

TEST(DeriveSizes, Temporal) {
  EXPECT_EQ(derive_temporal_sizes(15).sizes(), (std::vector<std::size_t>{7, 11, 15}));
  EXPECT_EQ(derive_temporal_sizes(6).sizes(), (std::vector<std::size_t>{6, 6, 6}));
  EXPECT_EQ(derive_temporal_sizes(14).sizes(), (std::vector<std::size_t>{7, 10, 14}));
  EXPECT_THROW(derive_temporal_sizes(0), InvalidArgument);
  for (std::size_t t = 1; t <= 64; ++t) {
    const auto s = derive_temporal_sizes(t).sizes();
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s.back(), t);
    EXPECT_LE(s[0], s[1]);
    EXPECT_LE(s[1], s[2]);
  }
}

TEST(Compose, HierarchicalSixStages) {
  const auto s = six_stage();
  ASSERT_EQ(s.stage_count(), 6u);
  EXPECT_EQ(s.label(), "32&7/32&11/32&15/64&7/64&11/64&15");
  EXPECT_EQ(s.total_iterations(), 75000u);
  for (const auto& st : s.stages()) {
    EXPECT_EQ(st.iterations, 12500u);
    EXPECT_EQ(st.batch, 64u);
  }
}

TEST(Compose, HierarchicalRemainderGoesLast) {
  const auto s = compose_hierarchical(square_cycle({32, 64}), TemporalCycle({7, 15}), 75002, 64);
  std::vector<std::size_t> iters;
  for (const auto& st : s.stages()) iters.push_back(st.iterations);
  EXPECT_EQ(iters, (std::vector<std::size_t>{18750, 18750, 18750, 18752}));
}

TEST(Compose, SingleCellIsBaseline) {
  const auto s = compose_hierarchical(square_cycle({64}), TemporalCycle({15}), 300000, 16);
  ASSERT_EQ(s.stage_count(), 1u);
  EXPECT_EQ(s, compose_fixed({64, 64}, 15, 300000, 16));
}

TEST(Compose, HierarchicalRejectsTooFewIterations) {
  EXPECT_THROW(compose_hierarchical(square_cycle({32, 64}), TemporalCycle({7, 11, 15}), 5, 4), InvalidArgument);
}

TEST(Compose, Synchronous) {
  const auto two = compose_synchronous({{{32, 32}, 7}, {{64, 64}, 15}}, 75000, 16);
  EXPECT_EQ(two.label(), "32&7/64&15");
  EXPECT_EQ(two.stages()[0].iterations, 37500u);
  EXPECT_EQ(two.stages()[1].iterations, 37500u);

  const auto three = compose_synchronous({{{32, 32}, 7}, {{48, 48}, 11}, {{64, 64}, 15}}, 75000, 16);
  for (const auto& st : three.stages()) EXPECT_EQ(st.iterations, 25000u);

  const auto one = compose_synchronous({{{64, 64}, 15}}, 300000, 16);
  EXPECT_EQ(one, compose_fixed({64, 64}, 15, 300000, 16));

  EXPECT_THROW(compose_synchronous({}, 100, 16), InvalidArgument);
}

TEST(Compose, AppendStage) {
  const auto s = six_stage();
  const auto longer = append_stage(s, {{72, 72}, 17, 64, 20000});
  EXPECT_EQ(longer.total_iterations(), 95000u);
  EXPECT_EQ(longer.label(), "32&7/32&11/32&15/64&7/64&11/64&15/72&17");

  const auto same = append_stage(s, {{64, 64}, 15, 64, 5000});
  EXPECT_EQ(same.total_iterations(), 80000u);
  EXPECT_EQ(same.stages()[5].shape(), same.stages()[6].shape());

  EXPECT_THROW(append_stage(s, {{64, 64}, 15, 64, 0}), InvalidArgument);
}

TEST(Compose, TinyCropsWarn) {
  const auto s = compose_fixed({4, 4}, 3, 10, 2);
  EXPECT_FALSE(s.warnings().empty());
  EXPECT_TRUE(six_stage().warnings().empty());
}

TEST(ShapeAt, Boundaries) {
  const auto s = six_stage();
  auto a = shape_at(s, 0);
  EXPECT_EQ(a.stage, 1u);
  EXPECT_EQ(a.shape, (MinibatchShape{64, 7, {32, 32}}));
  a = shape_at(s, 12499);
  EXPECT_EQ(a.stage, 1u);
  a = shape_at(s, 12500);
  EXPECT_EQ(a.stage, 2u);
  EXPECT_EQ(a.shape, (MinibatchShape{64, 11, {32, 32}}));
  a = shape_at(s, 74999);
  EXPECT_EQ(a.stage, 6u);
  EXPECT_EQ(a.shape, (MinibatchShape{64, 15, {64, 64}}));
  EXPECT_THROW(shape_at(s, 75000), OutOfRange);
}

TEST(LrAt, WorkedValues) {
  const auto s = six_stage();
  const LrSpec spec{8e-4, LrMode::literal_cosine, 0, 0.0};
  for (std::size_t t : {0u, 12500u, 25000u, 37500u, 50000u, 62500u}) EXPECT_EQ(lr_at(spec, s, t), 8e-4);
  EXPECT_NEAR(lr_at(spec, s, 24999), 7.8891e-4, 1e-8);
  EXPECT_NEAR(lr_at(spec, s, 24999), std::cos(12499.0 / 75000.0) * 8e-4, 1e-18);
  // cos(0.99992) = 0.5403696...
  EXPECT_NEAR(lr_at(spec, s, 74999), 4.32296e-4, 1e-9);
  EXPECT_LE(std::abs(lr_at(spec, s, 74999) / (std::cos(12499.0 / 12500.0) * 8e-4) - 1.0), 1e-12);
  EXPECT_THROW(lr_at(spec, s, 75000), OutOfRange);
}

TEST(LrAt, RejectsInvalidSpec) {
  const auto s = six_stage();
  EXPECT_THROW(lr_at({0.0, LrMode::literal_cosine, 0, 0.0}, s, 0), InvalidArgument);
  EXPECT_THROW(lr_at({1e-3, LrMode::literal_cosine, 75000, 0.0}, s, 0), InvalidArgument);
  EXPECT_THROW(lr_at({1e-3, LrMode::literal_cosine, 10, 1.5}, s, 0), InvalidArgument);
}

TEST(LrMode, Names) {
  EXPECT_EQ(parse_lr_mode("literal-cosine"), LrMode::literal_cosine);
  EXPECT_EQ(parse_lr_mode("half-cosine"), LrMode::half_cosine);
  EXPECT_EQ(to_string(LrMode::half_cosine), "half-cosine");
  EXPECT_THROW(parse_lr_mode("cosine"), InvalidArgument);
}

TEST(ScaledLr, LinearRule) {
  EXPECT_DOUBLE_EQ(scaled_lr(2e-4, 16, 64), 8e-4);
  EXPECT_DOUBLE_EQ(scaled_lr(2e-4, 16, 16), 2e-4);
  EXPECT_DOUBLE_EQ(scaled_lr(2e-4, 16, 48), 6e-4);
  EXPECT_THROW(scaled_lr(2e-4, 0, 16), InvalidArgument);
}

// ---- properties over random schedules --------------------------------------

struct RandomCase {
  MultigridSchedule schedule;
  LrSpec spec;
};

RandomCase random_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> count(1, 4), side(4, 64), frames(1, 20), iters(1, 400);
  std::vector<SpatialSize> sp;
  std::size_t prev = 0;
  for (std::size_t i = 0, n = count(rng); i < n; ++i) {
    prev = std::max(prev, side(rng));
    sp.push_back({prev, prev});
  }
  std::vector<std::size_t> tp;
  prev = 0;
  for (std::size_t i = 0, n = count(rng); i < n; ++i) {
    prev = std::max(prev, frames(rng));
    tp.push_back(prev);
  }
  const std::size_t p = sp.size() * tp.size();
  const std::size_t total = p + iters(rng) * p / 2 + iters(rng);
  auto sched = compose_hierarchical(SpatialCycle(sp), TemporalCycle(tp), total, 4);
  const LrMode mode = rng() % 2 ? LrMode::literal_cosine : LrMode::half_cosine;
  return {std::move(sched), {std::uniform_real_distribution<double>(1e-5, 1e-1)(rng), mode, 0, 0.0}};
}

TEST(ScheduleProperty, PartitionAndOrdering) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto [s, spec] = random_case(rng);
    std::size_t sum = 0;
    for (const auto& st : s.stages()) sum += st.iterations;
    ASSERT_EQ(sum, s.total_iterations());
    std::size_t prev_stage = 1;
    for (std::size_t t = 0; t < s.total_iterations(); ++t) {
      const auto at = shape_at(s, t);
      ASSERT_TRUE(at.stage == prev_stage || at.stage == prev_stage + 1);
      ASSERT_GE(t, s.stage_start(at.stage - 1));
      ASSERT_LT(t, s.stage_start(at.stage - 1) + s.stages()[at.stage - 1].iterations);
      prev_stage = at.stage;
    }
    for (std::size_t i = 1; i < s.stage_count(); ++i)
      EXPECT_GE(s.stages()[i].spatial.area(), s.stages()[i - 1].spatial.area());
  }
}

TEST(ScheduleProperty, HierarchicalTemporalResetsPerSpatialStage) {
  const auto s = compose_hierarchical(square_cycle({16, 24, 32}), TemporalCycle({3, 5, 8, 9}), 1200, 2);
  for (std::size_t i = 0; i < s.stage_count(); ++i) {
    if (i % 4 == 0) {
      EXPECT_EQ(s.stages()[i].temporal, 3u);
    } else {
      EXPECT_GE(s.stages()[i].temporal, s.stages()[i - 1].temporal);
      EXPECT_EQ(s.stages()[i].spatial, s.stages()[i - 1].spatial);
    }
  }
}

TEST(ScheduleProperty, LrMatchesOracleRestartsAndDecays) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const auto [s, spec] = random_case(rng);
    const double eta = spec.base_lr;
    for (std::size_t i = 0; i < s.stage_count(); ++i) {
      const std::size_t start = s.stage_start(i), len = s.stages()[i].iterations;
      ASSERT_EQ(lr_at(spec, s, start), eta);
      const bool last = i + 1 == s.stage_count();
      const double floor = spec.mode == LrMode::half_cosine
                               ? 0.0
                               : (last ? std::cos(1.0) : std::cos(static_cast<double>(len) /
                                                                  static_cast<double>(s.total_iterations()))) * eta;
      double prev = std::numeric_limits<double>::infinity();
      for (std::size_t t = start; t < start + len; ++t) {
        const double v = lr_at(spec, s, t);
        ASSERT_NEAR(v, oracle_lr(s, spec, t), 1e-15 * eta);
        ASSERT_LT(v, prev);
        ASSERT_GT(v, 0.0);
        ASSERT_GE(v, floor);
        prev = v;
      }
    }
  }
}

TEST(ScheduleProperty, LinearScalingIsLinear) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<std::size_t> n(1, 256), k(1, 32);
  std::uniform_real_distribution<double> eta(1e-6, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double e = eta(rng);
    const std::size_t b = n(rng), m = k(rng);
    EXPECT_NEAR(scaled_lr(e, b, m * b), static_cast<double>(m) * scaled_lr(e, b, b), 1e-15 * m * e);
  }
}

TEST(ScheduleProperty, WarmupRampAndContinuity) {
  const auto s = six_stage();
  for (double start : {0.0, 0.1, 0.5}) {
    const LrSpec spec{8e-4, LrMode::literal_cosine, 5000, start};
    const LrSpec plain{8e-4, LrMode::literal_cosine, 0, 0.0};
    EXPECT_DOUBLE_EQ(lr_at(spec, s, 0), start * 8e-4);
    for (std::size_t t = 0; t < 6000; t += 37) EXPECT_NEAR(lr_at(spec, s, t), oracle_lr(s, spec, t), 1e-18);
    // Factor reaches exactly 1 at t = W and the restarts stay unaffected.
    EXPECT_EQ(lr_at(spec, s, 5000), lr_at(plain, s, 5000));
    EXPECT_NEAR(lr_at(spec, s, 4999), lr_at(plain, s, 4999), 8e-4 / 5000.0);
    EXPECT_EQ(lr_at(spec, s, 12500), 8e-4);
  }
}

TEST(ScheduleCsv, HeaderRowsAndStride) {
  const auto s = compose_hierarchical(square_cycle({8, 16}), TemporalCycle({2, 4}), 40, 3);
  const LrSpec spec{1e-3, LrMode::literal_cosine, 0, 0.0};
  std::ostringstream all, strided;
  write_schedule_csv(all, s, spec);
  write_schedule_csv(strided, s, spec, 7);
  std::istringstream in(all.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,stage,batch,temporal,height,width,lr");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string t, stage, batch, temporal, h, w, lr;
    std::getline(fields, t, ',');
    std::getline(fields, stage, ',');
    std::getline(fields, batch, ',');
    std::getline(fields, temporal, ',');
    std::getline(fields, h, ',');
    std::getline(fields, w, ',');
    std::getline(fields, lr, ',');
    const auto at = shape_at(s, rows);
    EXPECT_EQ(std::stoul(t), rows);
    EXPECT_EQ(std::stoul(stage), at.stage);
    EXPECT_EQ(std::stoul(batch), 3u);
    EXPECT_EQ(std::stoul(temporal), at.shape.temporal);
    EXPECT_EQ(std::stoul(h), at.shape.spatial.height);
    EXPECT_EQ(std::stod(lr), lr_at(spec, s, rows));
    ++rows;
  }
  EXPECT_EQ(rows, 40u);
  const std::string text = strided.str();
  const auto lines = std::count(text.begin(), text.end(), '\n');
  EXPECT_EQ(lines, 1 + 6);  // t = 0, 7, ..., 35
}

}  // namespace
}  // namespace mgvsr
