#pragma once

#include <array>
#include <span>
#include <vector>

#include "gsroad/geometry.hpp"
#include "gsroad/image.hpp"
#include "gsroad/scene.hpp"

namespace gsroad {

struct LossWeights {
  double lambda_c = 1.0;
  double lambda_s = 0.06;
  double lambda_smooth = 0.003;
  double lambda_z = 0.02;

  /// Weights used when LiDAR elevation supervision is active (smoothness raised to 1).
  LossWeights with_lidar() const {
    LossWeights w = *this;
    w.lambda_smooth = 1.0;
    return w;
  }
};

struct LossParts {
  double color = 0.0;
  double semantic = 0.0;
  double smooth = 0.0;
  double elevation = 0.0;
};

/// Masked per-channel mean absolute error. `rendered` holds 3 values per pixel.
/// Writes d(loss)/d(rendered) into `grad` (same size) when it is non-empty.
/// Throws Error(EmptyMask) when no pixel is masked.
double color_loss(std::span<const double> rendered, const ImageF& target, const ImageU8& mask, std::span<double> grad);

/// Masked mean cross-entropy between softmax(rendered logits) and one-hot labels.
/// `logits` holds class_count values per pixel.
double semantic_loss(std::span<const double> logits, int class_count, const LabelImage& labels, const ImageU8& mask,
                     std::span<double> grad);

/// Lattice neighbor maps in the four directions (see neighbor_indices).
struct NeighborTable {
  std::array<std::vector<std::int32_t>, 4> index;

  static NeighborTable build(const SurfelScene& scene);
};

/// (1/K) sum_i sum_{j in N(i)} (z_i - z_j)^2 with K = 4. Accumulates d/dz into `grad_z` when non-empty.
double smooth_loss(std::span<const double> z, const NeighborTable& neighbors, std::span<double> grad_z);

/// Per-surfel LiDAR elevation targets: nearest cloud point in xy within a radius.
struct ElevationTargets {
  std::vector<double> target;         // NaN where unmatched
  std::vector<std::uint8_t> matched;  // 1 where a point was found
  std::size_t matched_count = 0;

  static ElevationTargets build(const SurfelScene& scene, const PointCloud& cloud, double radius = 0.1);
};

/// Sum over matched surfels of (z_i - target_i)^2; 0 when nothing matched. Accumulates d/dz into
/// `grad_z` when non-empty.
double elevation_loss(std::span<const double> z, const ElevationTargets& targets, std::span<double> grad_z);

/// Convenience form that matches the cloud on the fly.
double elevation_loss(const SurfelScene& scene, const PointCloud& cloud, double radius = 0.1);

/// Weighted sum. The elevation term is included only when `use_lidar` is set, in which case the
/// smoothness weight is raised to 1. Throws Error(NonFiniteLoss) naming the offending component.
double total_loss(const LossParts& parts, const LossWeights& weights, bool use_lidar);

/// Effective weights for a run: `weights`, or weights.with_lidar() when LiDAR is used.
LossWeights effective_weights(const LossWeights& weights, bool use_lidar);

}  // namespace gsroad
