#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gsroad/dataset.hpp"
#include "gsroad/image.hpp"
#include "gsroad/rasterizer.hpp"
#include "gsroad/scene.hpp"

namespace gsroad {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over masked pixels (all channels), peak 1; kPsnrCap when MSE is 0.
double psnr(const ImageD& pred, const ImageD& gt, const ImageU8& mask);

/// Mean IoU over the classes present in `gt` within the mask. Predictions outside
/// [0, class_count) count toward the union of the true class only.
double miou(const LabelImage& pred, const LabelImage& gt, const ImageU8& mask, int class_count);

struct ElevationScore {
  double rmse = 0.0;
  std::size_t matched = 0;
  double matched_fraction = 0.0;
};

/// RMSE of z_surfel - z_gt over surfels with a GT point within `radius` in xy (nearest wins).
/// Throws Error(NoMatches) when nothing matches.
ElevationScore elevation_rmse(const SurfelScene& scene, std::span<const Vec3> gt_points, double radius = 0.1);

struct GroundTruthBev {
  BevGrid grid;
  ImageD rgb;          // 3 channels in [0,1]
  LabelImage labels;   // class ids, -1 where invalid
  ImageU8 valid;       // 1 where at least one GT sample landed
  std::vector<Vec3> elevation_points;
};

/// Ground truth from LiDAR sweeps: points are time-associated to a pose, projected into that
/// pose's camera images, given the mean observed color and the mode label (ties to the lowest
/// id), filtered to road classes, and rasterized onto `grid` (mean color, mode label).
GroundTruthBev build_gt(const SceneData& data, const BevGrid& grid, double max_gap = 0.1);

/// analytic_gt/ layout written by the synthetic generator.
void write_analytic_gt(const std::filesystem::path& dir, const GroundTruthBev& gt, const std::vector<ClassInfo>& palette);
GroundTruthBev load_analytic_gt(const std::filesystem::path& dir);

struct SceneMetrics {
  std::string scene;
  double psnr = 0.0;
  double miou = 0.0;
  double elevation_rmse = 0.0;
  double matched_fraction = 0.0;
  /// Fraction of GT-valid BEV pixels that the reconstruction covers.
  double coverage = 0.0;
};

/// Renders the scene's BEV on the GT grid and scores it.
SceneMetrics evaluate_scene(const SurfelScene& scene, const GroundTruthBev& gt, double elevation_radius = 0.1,
                            int chunk = 2000);

}  // namespace gsroad
