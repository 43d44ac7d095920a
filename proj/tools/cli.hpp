#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gsroad/checkpoint.hpp"
#include "gsroad/evaluation.hpp"
#include "gsroad/initializer.hpp"
#include "gsroad/rasterizer.hpp"
#include "gsroad/scene.hpp"
#include "gsroad/trainer.hpp"

namespace gsroad::cli {

namespace fs = std::filesystem;

struct ReconstructOptions {
  fs::path scene_dir;
  fs::path out_dir;
  std::optional<fs::path> config;  // JSON training config, applied before the flags below
  double resolution = 0.05;
  Layout layout = Layout::Layout1;
  InitMode init_mode = InitMode::Full;
  bool use_lidar = false;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  double expand = 10.0;
  bool shuffle = true;
  int chunk = 2000;
  /// Analytic ground truth for per-epoch metrics; defaults to scene_dir/analytic_gt when present.
  std::optional<fs::path> gt_dir;
  bool log_steps = true;
};

struct ReconstructResult {
  Checkpoint checkpoint;
  BevMaps bev;
  std::optional<SceneMetrics> metrics;
};

/// Layout, initialization, training and BEV export. Writes checkpoint.bin, bev/, metrics.jsonl
/// and manifest.json under out_dir.
ReconstructResult cmd_reconstruct(const ReconstructOptions& options);

struct EvaluateOptions {
  std::vector<fs::path> checkpoints;
  /// analytic_gt directory, a synthetic scene directory holding one, or a scene directory with LiDAR.
  fs::path ground_truth;
  fs::path report;
  double elevation_radius = 0.1;
  int chunk = 2000;
};

/// Scores each checkpoint; rows come back sorted by scene name, followed by the mean row.
std::vector<SceneMetrics> cmd_evaluate(const EvaluateOptions& options);

/// Generates the synthetic scene described by spec_file into out_dir. `seed` overrides the file.
void cmd_synth(const fs::path& spec_file, std::optional<std::uint64_t> seed, const fs::path& out_dir);

/// Full command-line entry point. Returns the process exit code: 0 success, 1 input error,
/// 2 numerical failure.
int run(int argc, const char* const* argv);

}  // namespace gsroad::cli
