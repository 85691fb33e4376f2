// mgvsr: schedule inspection, training, equivalence checks, throughput
// benchmarks and evaluation for multigrid VSR training.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mgvsr/config.hpp"
#include "mgvsr/data.hpp"
#include "mgvsr/equivalence.hpp"
#include "mgvsr/error.hpp"
#include "mgvsr/format.hpp"
#include "mgvsr/model.hpp"
#include "mgvsr/schedule.hpp"
#include "mgvsr/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kDiverged = 3, kCheckFailed = 4, kUsage = 64 };

struct CommonOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> precision;
};

mgvsr::ExperimentConfig load(const CommonOptions& o) {
  if (o.config.empty()) throw mgvsr::ConfigError("--config is required");
  mgvsr::ExperimentConfig cfg = mgvsr::load_config(o.config);
  if (o.seed) cfg.run.seed = *o.seed;
  if (o.workers) {
    if (*o.workers == 0) throw mgvsr::ConfigError("--workers must be at least 1");
    cfg.run.workers = *o.workers;
  }
  if (o.precision) cfg.run.precision = mgvsr::parse_precision(*o.precision);
  if (!o.out.empty()) cfg.run.output_dir = o.out;
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw mgvsr::IoError("cannot write " + path.string());
  os << text;
}

json metric_json(const mgvsr::MetricReport& r) {
  return {{"psnr_db", r.psnr_db}, {"ssim", r.ssim}, {"frames", r.frame_count}};
}

json stages_json(const mgvsr::MultigridSchedule& s) {
  json out = json::array();
  for (std::size_t i = 0; i < s.stage_count(); ++i) {
    const auto& p = s.stages()[i];
    out.push_back({{"stage", i + 1},
                   {"start", s.stage_start(i)},
                   {"iterations", p.iterations},
                   {"batch", p.batch},
                   {"temporal", p.temporal},
                   {"height", p.spatial.height},
                   {"width", p.spatial.width}});
  }
  return out;
}

void print_warnings(const mgvsr::MultigridSchedule& s) {
  for (const auto& w : s.warnings()) std::cerr << "warning: " << w << '\n';
}

// --- schedule --------------------------------------------------------------

int cmd_schedule(const CommonOptions& o, std::size_t stride) {
  const auto cfg = load(o);
  const auto sched = mgvsr::build_schedule(cfg);
  print_warnings(sched);
  const auto lr = mgvsr::effective_lr(cfg);
  if (o.out.empty()) {
    mgvsr::write_schedule_csv(std::cout, sched, lr, stride);
  } else {
    fs::create_directories(o.out);
    std::ofstream os(fs::path(o.out) / "schedule.csv");
    if (!os) throw mgvsr::IoError("cannot write schedule.csv");
    mgvsr::write_schedule_csv(os, sched, lr, stride);
  }
  return kOk;
}

// --- train -----------------------------------------------------------------

template <typename T>
int run_training(const mgvsr::ExperimentConfig& cfg) {
  const fs::path out = cfg.run.output_dir;
  fs::create_directories(out);
  write_file(out / "config.json", mgvsr::to_json(cfg).dump(2) + "\n");

  const mgvsr::TrainConfig tc = mgvsr::make_train_config(cfg);
  print_warnings(tc.schedule);
  const mgvsr::ClipPool pool = mgvsr::make_clip_pool(cfg.data);
  auto result = mgvsr::train_run<T>(tc, pool);
  const auto& rec = result.record;

  std::ostringstream records, timing, metrics;
  mgvsr::write_records_csv(records, rec);
  mgvsr::write_timing_csv(timing, rec);
  mgvsr::write_metrics_csv(metrics, rec);
  write_file(out / "records.csv", records.str());
  write_file(out / "timing.csv", timing.str());
  write_file(out / "metrics.csv", metrics.str());
  mgvsr::save_checkpoint(out / "ckpt", result.params, cfg.model.seed);

  json report;
  report["schedule"] = tc.schedule.label();
  report["stages"] = stages_json(tc.schedule);
  report["total_iterations"] = tc.schedule.total_iterations();
  report["completed_iterations"] = rec.rows.size();
  report["effective_base_lr"] = tc.lr.base_lr;
  report["precision"] = mgvsr::to_string(cfg.run.precision);
  report["workers"] = cfg.run.workers;
  report["aborted"] = rec.aborted;
  if (rec.aborted) {
    report["abort_iteration"] = rec.abort_iteration;
    report["abort_reason"] = rec.abort_reason;
  }
  report["wall_ms_total"] = rec.total_wall_ms();
  if (auto m = rec.final_metrics()) report["final"] = metric_json(*m);
  if (!pool.validation.empty()) {
    report["nearest_upsample"] = metric_json(mgvsr::evaluate_nearest(pool.validation, cfg.run.metric_channels));
  }
  report["warnings"] = tc.schedule.warnings();
  write_file(out / "report.json", report.dump(2) + "\n");

  if (rec.aborted) {
    std::cerr << "error: non_finite: " << rec.abort_reason << '\n';
    return kDiverged;
  }
  if (auto m = rec.final_metrics()) {
    std::cout << "final validation psnr " << m->psnr_db << " dB, ssim " << m->ssim << '\n';
  }
  return kOk;
}

int cmd_train(const CommonOptions& o, bool dry_run) {
  const auto cfg = load(o);
  if (dry_run) {
    const auto sched = mgvsr::build_schedule(cfg);
    print_warnings(sched);
    std::cout << "config ok: " << sched.label() << ", " << sched.total_iterations() << " iterations, lr "
              << mgvsr::effective_lr(cfg).base_lr << '\n';
    return kOk;
  }
  if (cfg.run.output_dir.empty()) throw mgvsr::ConfigError("no output directory (use --out or run.output_dir)");
  return cfg.run.precision == mgvsr::Precision::f32 ? run_training<float>(cfg) : run_training<double>(cfg);
}

// --- equivalence -----------------------------------------------------------

int cmd_equivalence(const CommonOptions& o, std::size_t m, double eta) {
  const auto cfg = load(o);
  if (m == 0) throw mgvsr::ConfigError("--m must be at least 1");
  const auto sched = mgvsr::build_schedule(cfg);
  const mgvsr::MinibatchShape shape = sched.stages().front().shape();
  const mgvsr::ClipPool pool = mgvsr::make_clip_pool(cfg.data);
  mgvsr::SamplerRng rng(cfg.run.seed);
  std::vector<mgvsr::Minibatch<double>> batches;
  for (std::size_t i = 0; i < m; ++i) batches.push_back(mgvsr::sample_minibatch<double>(pool.train, shape, rng));
  const auto params = mgvsr::init_params<double>(cfg.model.seed, cfg.model.channels, cfg.model.blocks);
  const auto problem = mgvsr::make_model_problem(params, std::move(batches));
  const auto report = mgvsr::equivalence_drift(problem, {eta, eta / 2.0, eta / 4.0}, cfg.optimizer);

  json j;
  j["m"] = report.m;
  j["n"] = report.n;
  j["eta"] = report.eta;
  j["frozen_gap"] = report.frozen_gap;
  j["frozen_relative_gap"] = report.frozen_relative_gap;
  j["frozen_tolerance"] = mgvsr::EquivalenceReport::kFrozenTolerance;
  j["frozen_ok"] = report.frozen_ok();
  j["drift"] = json::array();
  for (const auto& d : report.drift) j["drift"].push_back({{"eta", d.eta}, {"gap", d.gap}});
  j["drift_order"] = report.drift_order;
  j["drift_ok"] = report.drift_ok();
  const std::string text = j.dump(2) + "\n";
  if (o.out.empty()) {
    std::cout << text;
  } else {
    fs::create_directories(o.out);
    write_file(fs::path(o.out) / "equivalence.json", text);
  }
  if (!report.frozen_ok() || !report.drift_ok()) {
    std::cerr << "error: check_failed: frozen gap " << report.frozen_relative_gap << ", drift order "
              << report.drift_order << '\n';
    return kCheckFailed;
  }
  return kOk;
}

// --- bench -----------------------------------------------------------------

mgvsr::MinibatchShape parse_shape(const std::string& text, std::size_t batch) {
  // HxW&T or S&T
  const auto amp = text.find('&');
  if (amp == std::string::npos) throw mgvsr::ConfigError("shape '" + text + "' must look like 32&7 or 32x48&7");
  const std::string spatial = text.substr(0, amp);
  const auto x = spatial.find('x');
  try {
    const std::size_t h = std::stoul(spatial.substr(0, x));
    const std::size_t w = x == std::string::npos ? h : std::stoul(spatial.substr(x + 1));
    const std::size_t t = std::stoul(text.substr(amp + 1));
    if (h == 0 || w == 0 || t == 0) throw std::invalid_argument("zero");
    return {batch, t, {h, w}};
  } catch (const std::exception&) {
    throw mgvsr::ConfigError("shape '" + text + "' must look like 32&7 or 32x48&7");
  }
}

template <typename T>
int run_bench(const mgvsr::ExperimentConfig& cfg, const std::vector<std::string>& shape_args, std::size_t reps,
              const std::string& out) {
  const auto sched = mgvsr::build_schedule(cfg);
  const auto baseline = mgvsr::build_baseline_schedule(cfg);
  std::vector<mgvsr::MinibatchShape> shapes;
  if (shape_args.empty()) {
    shapes = mgvsr::schedule_shapes(sched);
    for (const auto& s : mgvsr::schedule_shapes(baseline))
      if (std::find(shapes.begin(), shapes.end(), s) == shapes.end()) shapes.push_back(s);
  } else {
    for (const auto& s : shape_args) shapes.push_back(parse_shape(s, cfg.schedule.batch));
  }
  const mgvsr::ClipPool pool = mgvsr::make_clip_pool(cfg.data);
  for (const auto& s : shapes) {
    if (s.spatial.height > pool.train.front().lr_height() || s.spatial.width > pool.train.front().lr_width()) {
      throw mgvsr::ConfigError("bench shape does not fit the LR frames");
    }
  }
  const auto params = mgvsr::init_params<T>(cfg.model.seed, cfg.model.channels, cfg.model.blocks);
  const auto timings = mgvsr::bench_shapes(params, pool.train, shapes, reps, 2, cfg.run.workers);

  json j;
  j["workers"] = cfg.run.workers;
  j["precision"] = mgvsr::to_string(cfg.run.precision);
  j["reps"] = reps;
  j["shapes"] = json::array();
  for (const auto& t : timings) {
    j["shapes"].push_back({{"batch", t.shape.batch},
                           {"temporal", t.shape.temporal},
                           {"height", t.shape.spatial.height},
                           {"width", t.shape.spatial.width},
                           {"mean_ms", t.mean_ms},
                           {"stddev_ms", t.stddev_ms}});
  }
  if (shape_args.empty()) {
    const auto speed = mgvsr::schedule_speedup(sched, baseline, timings);
    j["schedule"] = sched.label();
    j["baseline"] = baseline.label();
    j["predicted_speedup"] = speed.predicted;
  }
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    fs::create_directories(out);
    write_file(fs::path(out) / "bench.json", text);
  }
  return kOk;
}

int cmd_bench(const CommonOptions& o, const std::vector<std::string>& shapes, std::size_t reps) {
  const auto cfg = load(o);
  if (reps < 5) throw mgvsr::ConfigError("--reps must be at least 5");
  return cfg.run.precision == mgvsr::Precision::f32 ? run_bench<float>(cfg, shapes, reps, o.out)
                                                    : run_bench<double>(cfg, shapes, reps, o.out);
}

// --- eval ------------------------------------------------------------------

int cmd_eval(const CommonOptions& o, const std::string& checkpoint, const std::string& split) {
  const auto cfg = load(o);
  if (split != "val" && split != "train") throw mgvsr::ConfigError("--split must be val or train");
  const mgvsr::Checkpoint ck = mgvsr::load_checkpoint(checkpoint);
  const mgvsr::ClipPool pool = mgvsr::make_clip_pool(cfg.data);
  const auto& clips = split == "val" ? pool.validation : pool.train;
  if (clips.empty()) throw mgvsr::ConfigError("split '" + split + "' has no clips");

  std::ostringstream csv;
  csv << "split,clip,psnr_db,ssim,frames\n";
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto r = mgvsr::evaluate_model(ck.params, {clips[i]}, cfg.run.metric_channels);
    csv << split << ',' << clips[i].seed << ',' << mgvsr::format_double(r.psnr_db) << ','
        << mgvsr::format_double(r.ssim) << ',' << r.frame_count << '\n';
  }
  const auto all = mgvsr::evaluate_model(ck.params, clips, cfg.run.metric_channels);
  csv << split << ",all," << mgvsr::format_double(all.psnr_db) << ',' << mgvsr::format_double(all.ssim) << ','
      << all.frame_count << '\n';
  if (o.out.empty()) {
    std::cout << csv.str();
  } else {
    fs::create_directories(o.out);
    write_file(fs::path(o.out) / "metrics.csv", csv.str());
  }
  return kOk;
}

// --- export ----------------------------------------------------------------

int cmd_export(const CommonOptions& o, std::size_t clip_index) {
  const auto cfg = load(o);
  if (o.out.empty()) throw mgvsr::ConfigError("--out is required");
  const mgvsr::ClipPool pool = mgvsr::make_clip_pool(cfg.data);
  if (clip_index >= pool.train.size()) throw mgvsr::ConfigError("--clip outside the training pool");
  mgvsr::export_clip(o.out, pool.train[clip_index]);
  return kOk;
}

void add_common(CLI::App* cmd, CommonOptions& o, bool with_run_overrides) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)")->required();
  cmd->add_option("--out", o.out, "Output directory");
  if (with_run_overrides) {
    cmd->add_option("--seed", o.seed, "Override run.seed (minibatch sampling)");
    cmd->add_option("--workers", o.workers, "Override run.workers");
    cmd->add_option("--precision", o.precision, "Override run.precision")->check(CLI::IsMember({"f32", "f64"}));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multigrid and large-minibatch training for recurrent video super-resolution"};
  app.require_subcommand(1);

  CommonOptions schedule_opts, train_opts, equiv_opts, bench_opts, eval_opts, export_opts;
  std::size_t stride = 1;
  bool dry_run = false;
  std::size_t m = 4;
  double eta = 2e-3;
  std::vector<std::string> shapes;
  std::size_t reps = 5;
  std::string checkpoint;
  std::string split = "val";
  std::size_t clip_index = 0;

  auto* schedule = app.add_subcommand("schedule", "Dump the per-iteration schedule as CSV");
  add_common(schedule, schedule_opts, false);
  schedule->add_option("--stride", stride, "Emit every N-th iteration")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "Train the model and write records, metrics and a checkpoint");
  add_common(train, train_opts, true);
  train->add_flag("--dry-run", dry_run, "Validate the config without training");

  auto* equiv = app.add_subcommand("equivalence", "Check the large-minibatch linear scaling equivalence");
  add_common(equiv, equiv_opts, true);
  equiv->add_option("--m", m, "Number of small minibatches merged into one");
  equiv->add_option("--eta", eta, "Largest learning rate of the drift series (eta, eta/2, eta/4)")
      ->check(CLI::PositiveNumber);

  auto* bench = app.add_subcommand("bench", "Time one training iteration per minibatch shape");
  add_common(bench, bench_opts, true);
  bench->add_option("--shapes", shapes, "Shapes like 32&7 or 32x48&7 (default: schedule shapes)")->delimiter(',');
  bench->add_option("--reps", reps, "Timed repetitions per shape (>= 5)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the synthetic clips");
  add_common(eval, eval_opts, false);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  eval->add_option("--split", split, "val or train");

  auto* exporter = app.add_subcommand("export-clip", "Write one training clip as PPM frames and raw tensors");
  add_common(exporter, export_opts, false);
  exporter->add_option("--clip", clip_index, "Index into the training pool");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: usage: " << msg << '\n';
    return kUsage;
  }

  try {
    if (*schedule) return cmd_schedule(schedule_opts, stride);
    if (*train) return cmd_train(train_opts, dry_run);
    if (*equiv) return cmd_equivalence(equiv_opts, m, eta);
    if (*bench) return cmd_bench(bench_opts, shapes, reps);
    if (*eval) return cmd_eval(eval_opts, checkpoint, split);
    if (*exporter) return cmd_export(export_opts, clip_index);
  } catch (const mgvsr::ConfigError& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
    return kConfig;
  } catch (const mgvsr::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
