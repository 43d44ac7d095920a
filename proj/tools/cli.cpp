#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <limits>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "gsroad/dataset.hpp"
#include "gsroad/error.hpp"
#include "gsroad/io.hpp"
#include "gsroad/parallel.hpp"
#include "gsroad/synth.hpp"

#ifndef GSROAD_GIT_REVISION
#define GSROAD_GIT_REVISION "unknown"
#endif
#ifndef GSROAD_VERSION
#define GSROAD_VERSION "0.0.0"
#endif

namespace gsroad::cli {
namespace {

using json = nlohmann::json;

json metrics_json(const SceneMetrics& m) {
  return {{"scene", m.scene},
          {"psnr", m.psnr},
          {"miou", m.miou},
          {"elevation_rmse", m.elevation_rmse},
          {"matched_fraction", m.matched_fraction},
          {"coverage", m.coverage}};
}

std::optional<fs::path> find_analytic_gt(const fs::path& path) {
  if (fs::exists(path / "meta.json")) return path;
  if (fs::exists(path / "analytic_gt" / "meta.json")) return path / "analytic_gt";
  return std::nullopt;
}

void write_bev(const fs::path& dir, const BevMaps& bev, const std::vector<ClassInfo>& palette) {
  fs::create_directories(dir);
  write_png(dir / "rgb.png", quantize(bev.rgb));

  std::vector<std::array<std::uint8_t, 3>> colors;
  for (const auto& c : palette) colors.push_back(c.color);
  const auto none = static_cast<std::uint8_t>(colors.size());
  colors.push_back({0, 0, 0});
  ImageU8 indices(bev.grid.width, bev.grid.height, 1);
  for (std::size_t p = 0; p < indices.data.size(); ++p) {
    const int l = bev.labels.data[p];
    indices.data[p] = l >= 0 && l < static_cast<int>(palette.size()) ? static_cast<std::uint8_t>(l) : none;
  }
  write_png_indexed(dir / "semantic.png", indices, colors);

  write_float_grid(dir / "elevation.f32", bev.elevation);
  const json sidecar = {{"width", bev.grid.width},
                        {"height", bev.grid.height},
                        {"origin", {bev.grid.origin.x(), bev.grid.origin.y()}},
                        {"resolution", bev.grid.resolution},
                        {"dtype", "float32"},
                        {"byte_order", "little"},
                        {"layout", "row-major, row j at y = origin.y + j * resolution"},
                        {"nodata", "NaN"},
                        {"semantic_none_index", none}};
  write_text(dir / "elevation.json", sidecar.dump(2) + "\n");
}

std::string scene_name_for(const fs::path& checkpoint) {
  const fs::path manifest = checkpoint.parent_path() / "manifest.json";
  if (fs::exists(manifest)) {
    try {
      const json j = json::parse(read_text(manifest));
      if (j.contains("scene")) return j["scene"].get<std::string>();
    } catch (const json::exception&) {
    }
  }
  const fs::path parent = fs::absolute(checkpoint).parent_path();
  return parent.filename().string();
}

}  // namespace

ReconstructResult cmd_reconstruct(const ReconstructOptions& o) {
  SceneData data = load_scene_directory(o.scene_dir);

  TrainConfig cfg;
  if (o.config) {
    try {
      cfg = config_from_json(json::parse(read_text(*o.config)), cfg);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::InputError, o.config->string() + ": " + e.what());
    }
  }
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.seed) cfg.seed = *o.seed;
  if (!o.shuffle) cfg.shuffle = false;
  if (o.use_lidar) cfg.use_lidar = true;
  cfg.validate();
  if (cfg.use_lidar && !data.has_lidar()) {
    throw Error(ErrorCode::InputError, "--use-lidar given but " + (o.scene_dir / "lidar").string() +
                                           " is missing or empty");
  }

  LayoutOptions layout;
  layout.resolution = o.resolution;
  layout.expand = o.expand;
  layout.layout = o.layout;
  layout.class_count = static_cast<int>(data.palette.size());
  SurfelScene scene = build_layout(data.poses, layout);
  scene.palette = data.palette;
  init_from_poses(scene, data.poses, o.init_mode);
  spdlog::info("scene '{}': {} surfels on a {}x{} lattice, {} frames", data.name, scene.size(), scene.lattice.cols,
               scene.lattice.rows, data.frames->size());

  std::optional<GroundTruthBev> gt;
  const auto gt_dir = o.gt_dir ? std::optional<fs::path>(*o.gt_dir) : find_analytic_gt(o.scene_dir);
  if (gt_dir) gt = load_analytic_gt(*gt_dir);

  fs::create_directories(o.out_dir);
  std::ofstream log(o.out_dir / "metrics.jsonl");
  if (!log) throw Error(ErrorCode::InputError, "cannot write " + (o.out_dir / "metrics.jsonl").string());

  Trainer trainer(scene, data, cfg);
  TrainState state = trainer.initial_state();
  trainer.on_step = [&](const StepRecord& r) {
    if (o.log_steps) log << to_json(r).dump() << "\n";
    if (r.step % 200 == 0) spdlog::info("step {}/{} loss {:.5f}", r.step, state.total_steps, r.total);
  };
  trainer.on_epoch = [&](EpochRecord& r) {
    if (gt) {
      const SceneMetrics m = evaluate_scene(scene, *gt, 0.1, o.chunk);
      r.psnr = m.psnr;
      r.miou = m.miou;
      r.elevation_rmse = m.elevation_rmse;
    }
    log << to_json(r).dump() << "\n";
    log.flush();
  };
  trainer.run(state);

  ReconstructResult result;
  result.checkpoint.scene = scene;
  for (const auto& cam : data.cameras) result.checkpoint.exposures.push_back({cam.name, cam.exposure_a, cam.exposure_b});
  result.checkpoint.state = state;
  result.checkpoint.config = to_json(cfg).dump();
  save_checkpoint(o.out_dir / "checkpoint.bin", result.checkpoint);

  const BevGrid grid = gt ? gt->grid : BevGrid::covering(scene.lattice, o.resolution);
  result.bev = render_bev_chunked(scene, grid, o.chunk, cfg.render);
  write_bev(o.out_dir / "bev", result.bev, scene.palette);

  if (gt) {
    SceneMetrics m = evaluate_scene(scene, *gt, 0.1, o.chunk);
    m.scene = data.name;
    json j = metrics_json(m);
    j["type"] = "final";
    log << j.dump() << "\n";
    result.metrics = m;
  }

  json manifest = {{"tool", "gsroad"},
                   {"version", GSROAD_VERSION},
                   {"git_revision", GSROAD_GIT_REVISION},
                   {"command", "reconstruct"},
                   {"scene", data.name},
                   {"seed", cfg.seed},
                   {"config", to_json(cfg)},
                   {"layout",
                    {{"resolution", o.resolution},
                     {"layout", o.layout == Layout::Layout1 ? 1 : 2},
                     {"expand", o.expand},
                     {"init_mode", std::string(to_string(o.init_mode))},
                     {"surfels", scene.size()}}},
                   {"inputs", {{"scene_dir", fs::absolute(o.scene_dir).lexically_normal().string()},
                               {"scene_hash", hash_directory(o.scene_dir)}}},
                   {"outputs", {"checkpoint.bin", "bev/rgb.png", "bev/semantic.png", "bev/elevation.f32",
                                "bev/elevation.json", "metrics.jsonl"}}};
  if (o.config) manifest["inputs"]["config_hash"] = to_hex(fnv1a_file(*o.config));
  if (gt_dir) manifest["inputs"]["gt_hash"] = hash_directory(*gt_dir);
  json exposures = json::array();
  for (const auto& e : result.checkpoint.exposures) exposures.push_back({{"camera", e.name}, {"a", e.a}, {"b", e.b}});
  manifest["exposure"] = exposures;
  write_text(o.out_dir / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

std::vector<SceneMetrics> cmd_evaluate(const EvaluateOptions& o) {
  if (o.checkpoints.empty()) throw Error(ErrorCode::InputError, "no checkpoints given");
  std::optional<GroundTruthBev> analytic;
  std::optional<SceneData> lidar_scene;
  if (const auto dir = find_analytic_gt(o.ground_truth)) {
    analytic = load_analytic_gt(*dir);
  } else if (fs::exists(o.ground_truth / "manifest.json")) {
    lidar_scene = load_scene_directory(o.ground_truth);
    if (!lidar_scene->has_lidar()) {
      throw Error(ErrorCode::MissingGT, o.ground_truth.string() + " has neither analytic_gt/ nor LiDAR sweeps");
    }
  } else {
    throw Error(ErrorCode::MissingGT, "no ground truth found at " + o.ground_truth.string());
  }

  std::vector<std::pair<fs::path, SceneMetrics>> rows;
  for (const auto& path : o.checkpoints) {
    const Checkpoint ckpt = load_checkpoint(path);
    SceneMetrics m;
    if (analytic) {
      m = evaluate_scene(ckpt.scene, *analytic, o.elevation_radius, o.chunk);
    } else {
      const GroundTruthBev gt = build_gt(*lidar_scene, BevGrid::covering(ckpt.scene.lattice, ckpt.scene.lattice.resolution));
      m = evaluate_scene(ckpt.scene, gt, o.elevation_radius, o.chunk);
    }
    m.scene = scene_name_for(path);
    rows.emplace_back(path, m);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.second.scene != b.second.scene ? a.second.scene < b.second.scene : a.first < b.first;
  });

  std::vector<SceneMetrics> out;
  SceneMetrics mean;
  mean.scene = "mean";
  for (const auto& [path, m] : rows) {
    out.push_back(m);
    mean.psnr += m.psnr;
    mean.miou += m.miou;
    mean.elevation_rmse += m.elevation_rmse;
    mean.matched_fraction += m.matched_fraction;
    mean.coverage += m.coverage;
  }
  const double n = static_cast<double>(rows.size());
  mean.psnr /= n;
  mean.miou /= n;
  mean.elevation_rmse /= n;
  mean.matched_fraction /= n;
  mean.coverage /= n;
  out.push_back(mean);

  if (!o.report.empty()) {
    json report = {{"rows", json::array()}};
    for (std::size_t i = 0; i + 1 < out.size(); ++i) {
      json r = metrics_json(out[i]);
      r["checkpoint"] = rows[i].first.string();
      report["rows"].push_back(r);
    }
    report["mean"] = metrics_json(mean);
    if (o.report.has_parent_path()) fs::create_directories(o.report.parent_path());
    write_text(o.report, report.dump(2) + "\n");
  }
  return out;
}

void cmd_synth(const fs::path& spec_file, std::optional<std::uint64_t> seed, const fs::path& out_dir) {
  if (!fs::exists(spec_file)) throw Error(ErrorCode::InputError, "spec file not found: " + spec_file.string());
  SyntheticSpec spec = parse_synthetic_spec(read_text(spec_file));
  if (seed) spec.seed = *seed;
  const SyntheticScene scene = generate(spec);
  spdlog::info("writing '{}': {} poses x {} cameras to {}", spec.name, scene.data.poses.size(),
               scene.data.cameras.size(), out_dir.string());
  write_synthetic(scene, out_dir);
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Road surface reconstruction with a meshgrid of Gaussian surfels"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  std::string log_level = "info";
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  ReconstructOptions rec;
  int layout = 1;
  std::string init_mode = "full";
  int epochs = 0;
  std::uint64_t rec_seed = 0;
  bool no_shuffle = false;
  bool no_step_log = false;
  std::string config_path, gt_path;
  auto* r = app.add_subcommand("reconstruct", "Train a surfel scene and export BEV maps");
  r->add_option("scene_dir", rec.scene_dir, "Scene directory")->required();
  r->add_option("-o,--out", rec.out_dir, "Output directory")->required();
  r->add_option("--config", config_path, "Training config JSON");
  r->add_option("--resolution", rec.resolution, "Lattice spacing in meters")->check(CLI::PositiveNumber);
  r->add_option("--layout", layout, "Surfel layout")->check(CLI::IsMember({1, 2}));
  r->add_option("--init-mode", init_mode, "full, z_only or none");
  r->add_flag("--use-lidar", rec.use_lidar, "Supervise elevation with the scene's LiDAR sweeps");
  auto* epochs_opt = r->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
  auto* seed_opt = r->add_option("--seed", rec_seed, "Random seed");
  r->add_option("--expand", rec.expand, "Road mask half-width around the trajectory, meters")->check(CLI::PositiveNumber);
  r->add_flag("--no-shuffle", no_shuffle, "Visit frames in order");
  r->add_option("--chunk", rec.chunk, "BEV render chunk size in pixels")->check(CLI::PositiveNumber);
  r->add_option("--gt", gt_path, "analytic_gt directory for per-epoch metrics");
  r->add_flag("--no-step-log", no_step_log, "Log only epoch records to metrics.jsonl");

  EvaluateOptions ev;
  std::vector<std::string> ckpts;
  std::string gt_dir, report;
  auto* e = app.add_subcommand("evaluate", "Score checkpoints against ground truth");
  e->add_option("checkpoints", ckpts, "Checkpoint files")->required();
  e->add_option("--gt", gt_dir, "analytic_gt directory or scene directory")->required();
  e->add_option("--report", report, "JSON report path");
  e->add_option("--radius", ev.elevation_radius, "Elevation match radius, meters")->check(CLI::PositiveNumber);
  e->add_option("--chunk", ev.chunk, "BEV render chunk size in pixels")->check(CLI::PositiveNumber);

  std::string spec_file, synth_out;
  std::uint64_t synth_seed = 0;
  auto* s = app.add_subcommand("synth", "Generate a synthetic scene directory");
  s->add_option("spec", spec_file, "Synthetic scene spec file")->required();
  s->add_option("-o,--out", synth_out, "Output directory")->required();
  auto* synth_seed_opt = s->add_option("--seed", synth_seed, "Seed (overrides the spec file)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    set_thread_count(threads);
    if (*r) {
      rec.layout = layout == 2 ? Layout::Layout2 : Layout::Layout1;
      rec.init_mode = parse_init_mode(init_mode);
      if (*epochs_opt) rec.epochs = epochs;
      if (*seed_opt) rec.seed = rec_seed;
      rec.shuffle = !no_shuffle;
      rec.log_steps = !no_step_log;
      if (!config_path.empty()) rec.config = config_path;
      if (!gt_path.empty()) rec.gt_dir = gt_path;
      const ReconstructResult res = cmd_reconstruct(rec);
      if (res.metrics) {
        std::cout << "psnr " << res.metrics->psnr << " miou " << res.metrics->miou << " elevation_rmse "
                  << res.metrics->elevation_rmse << "\n";
      }
    } else if (*e) {
      for (const auto& c : ckpts) ev.checkpoints.emplace_back(c);
      ev.ground_truth = gt_dir;
      ev.report = report;
      const auto rows = cmd_evaluate(ev);
      std::printf("%-24s %10s %8s %14s %9s\n", "scene", "psnr", "miou", "elevation_rmse", "coverage");
      for (const auto& m : rows) {
        std::printf("%-24s %10.4f %8.4f %14.5f %9.4f\n", m.scene.c_str(), m.psnr, m.miou, m.elevation_rmse, m.coverage);
      }
    } else if (*s) {
      cmd_synth(spec_file, *synth_seed_opt ? std::optional<std::uint64_t>(synth_seed) : std::nullopt, synth_out);
    }
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return is_numerical(err.code()) ? 2 : 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace gsroad::cli
