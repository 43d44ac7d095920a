#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gsroad/dataset.hpp"
#include "gsroad/losses.hpp"
#include "gsroad/optimizer.hpp"
#include "gsroad/rasterizer.hpp"
#include "gsroad/scene.hpp"

namespace gsroad {

struct TrainConfig {
  double lr_alpha = 1e-4;
  double lr_scale = 1e-4;
  double lr_rot = 1e-4;
  /// z learning rate at the first and last step, before the scene-size factor is applied.
  double lr_z_start = 1.6e-4;
  double lr_z_end = 1.6e-6;
  double lr_color = 0.008;
  double lr_semantics = 0.1;
  double lr_exposure = 0.001;
  /// Multiplies both z learning rates; <= 0 derives it from the lattice extent.
  double scene_size_factor = 0.0;
  int epochs = 1;
  AdamConfig adam;
  std::uint64_t seed = 0;
  bool shuffle = true;
  bool use_lidar = false;
  double lidar_radius = 0.1;
  LossWeights weights;
  /// Camera whose exposure stays fixed at its initial value; -1 learns every camera.
  int reference_camera = 0;
  RenderSettings render;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Applies the keys present in `j` on top of `cfg`; unknown keys are an InputError.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig cfg = {});

/// Scene-size factor for the z learning rate: half the larger lattice extent, in meters.
double scene_size_factor(const Lattice& lattice);

/// Exponential decay from lr_z_start to lr_z_end (both times `factor`) over total_steps.
double lr_z_at(std::uint64_t step, std::uint64_t total_steps, const TrainConfig& cfg, double factor = 1.0);

/// Frame visiting order for one epoch: a seeded Fisher-Yates shuffle, or identity.
std::vector<std::size_t> epoch_order(std::size_t frame_count, std::uint64_t seed, int epoch, bool shuffle);

struct StepRecord {
  std::uint64_t step = 0;
  int epoch = 0;
  std::size_t frame = 0;
  bool skipped = false;
  LossParts parts;
  double total = 0.0;
  double lr_z = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  std::size_t steps = 0;
  std::size_t skipped = 0;
  LossParts mean_parts;
  double mean_total = 0.0;
  /// Filled by the caller's epoch hook when ground truth is available.
  std::optional<double> psnr;
  std::optional<double> miou;
  std::optional<double> elevation_rmse;

  bool operator==(const EpochRecord& o) const;
};

struct TrainState {
  std::uint64_t step = 0;         // completed optimizer steps
  std::uint64_t total_steps = 0;  // epochs * frame count
  double z_factor = 1.0;
  double initial_z_center = 0.0;
  double initial_z_range = 0.0;
  AdamState z;
  AdamState log_scale;
  AdamState opacity_logit;
  AdamState quaternion;
  AdamState color;
  AdamState semantics;
  AdamState exposure_a;
  AdamState exposure_b;
  std::vector<EpochRecord> history;
  /// Running sums for the epoch in progress.
  EpochRecord current;

  bool operator==(const TrainState& o) const;
};

nlohmann::json to_json(const StepRecord& r);
nlohmann::json to_json(const EpochRecord& r);

/// Optimizes `scene` and the cameras' exposure against the frames of `data`.
class Trainer {
 public:
  Trainer(SurfelScene& scene, SceneData& data, const TrainConfig& cfg);

  /// Fresh optimizer state for this scene and configuration.
  TrainState initial_state() const;

  /// Runs steps until `state.step` reaches `stop_at` (default: the end of training).
  void run(TrainState& state, std::optional<std::uint64_t> stop_at = std::nullopt);

  /// One optimizer step on frame `frame_index` (advances state.step).
  StepRecord step(TrainState& state, std::size_t frame_index);

  std::function<void(const StepRecord&)> on_step;
  /// Called after each epoch; may fill the record's metric fields.
  std::function<void(EpochRecord&)> on_epoch;

 private:
  void check_divergence(const TrainState& state) const;

  SurfelScene& scene_;
  SceneData& data_;
  TrainConfig cfg_;
  NeighborTable neighbors_;
  std::optional<ElevationTargets> targets_;
  GradientBuffer grads_;
  RenderOutput render_;
  std::vector<double> d_color_;
  std::vector<double> d_sem_;
};

}  // namespace gsroad
