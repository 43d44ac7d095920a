#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gsroad/dataset.hpp"
#include "gsroad/evaluation.hpp"
#include "gsroad/geometry.hpp"
#include "gsroad/spatial_index.hpp"

namespace gsroad {

enum class SurfaceKind { Plane, Inclined, Bumps, Crowned };
enum class TrajectoryKind { Straight, Arc, SCurve };

struct SyntheticSpec {
  std::string name = "synthetic";
  std::uint64_t seed = 0;

  SurfaceKind surface = SurfaceKind::Plane;
  double base_height = 0.0;
  double slope_x = 0.0;  // inclined: z = base + slope_x x + slope_y y
  double slope_y = 0.0;
  double bump_amplitude = 0.1;  // bumps: z = base + A sin(2 pi x / L) cos(2 pi y / L)
  double bump_wavelength = 8.0;
  double crown = 0.02;  // crowned: z = base - crown (y - crown_center)^2
  double crown_center = 0.0;

  TrajectoryKind trajectory = TrajectoryKind::Straight;
  double length = 30.0;  // meters along the path
  double speed = 1.0;    // m/s
  double frame_rate = 10.0;
  double heading_deg = 0.0;
  double start_x = 0.0;
  double start_y = 0.0;
  double arc_radius = 40.0;
  double s_amplitude = 2.0;
  double s_period = 30.0;

  double road_half_width = 3.5;
  double edge_line_offset = 0.3;  // inner edge of the solid edge line, from the road border
  double line_width = 0.15;
  double dash_length = 3.0;
  double dash_gap = 3.0;
  double dash_phase = 0.0;     // along-path shift of the dash pattern
  double zebra_start = 12.0;   // along-path start of the crosswalk
  double zebra_length = 4.0;
  double zebra_stripe = 0.5;
  double texture_noise = 0.04;
  double noise_cell = 0.4;

  int camera_count = 6;
  double fov_deg = 90.0;
  int image_width = 160;
  int image_height = 120;
  double camera_height = 1.6;
  double camera_pitch_deg = 20.0;
  int supersample = 2;

  /// Per-camera exposure corruption. Empty with random_exposure set: drawn uniformly within the
  /// ranges, with camera 0 left at identity as the photometric reference.
  std::vector<std::pair<double, double>> exposure;
  bool random_exposure = true;
  double exposure_a_range = 0.2;
  double exposure_b_range = 0.05;

  bool lidar = false;
  double lidar_density = 100.0;  // accumulated points per m^2
  double lidar_noise = 0.01;     // z standard deviation, m
  double lidar_range = 10.0;

  double gt_resolution = 0.05;
  double gt_max_range = 8.0;

  void validate() const;
};

/// Parses `key = value` lines ('#' comments). Throws Error(InvalidSpec) naming the line and field.
SyntheticSpec parse_synthetic_spec(const std::string& text);
std::string format_synthetic_spec(const SyntheticSpec& spec);

/// Analytic world: surface, road texture, and semantic regions.
class SyntheticWorld {
 public:
  explicit SyntheticWorld(const SyntheticSpec& spec);

  const SyntheticSpec& spec() const { return spec_; }
  double height(double x, double y) const;
  Vec2 gradient(double x, double y) const;
  Vec3 normal(double x, double y) const;
  /// Bound on |grad z| over the scene, used by the ray marcher.
  double slope_bound() const { return slope_bound_; }

  /// Along-path and signed lateral coordinates of a ground point.
  Vec2 road_coords(double x, double y) const;
  int label_at(double x, double y) const;
  Vec3 color_at(double x, double y) const;

  /// Ray from `origin` along `dir` (world). Returns the hit parameter t, or nullopt for sky.
  std::optional<double> intersect(const Vec3& origin, const Vec3& dir, double t_max = 80.0) const;

  /// Centerline point and unit tangent at path parameter s.
  std::pair<Vec2, Vec2> path(double s) const;

 private:
  double noise(double x, double y, std::uint64_t channel) const;

  SyntheticSpec spec_;
  Vec2 start_ = Vec2::Zero();
  Vec2 heading_ = Vec2::UnitX();
  Vec2 left_ = Vec2::UnitY();
  // Dense centerline samples, used for along/lateral lookup on the S-curve.
  std::vector<Vec2> centerline_;
  std::vector<Vec2> tangent_;
  std::vector<double> arclen_;
  double step_ = 0.02;
  double slope_bound_ = 0.0;
  GridIndex2D index_;
};

inline constexpr int kSkyClass = 6;
inline constexpr int kTerrainClass = 5;

/// A generated scene: training data with lazily synthesized frames, the injected exposures,
/// and the analytic ground truth.
struct SyntheticScene {
  SyntheticSpec spec;
  SceneData data;
  std::vector<std::pair<double, double>> injected_exposure;
  GroundTruthBev gt;
  std::shared_ptr<const SyntheticWorld> world;
};

SyntheticScene generate(const SyntheticSpec& spec);

/// Renders one camera image of the analytic world (used by the lazy frame source).
LabeledImage synthesize_frame(const SyntheticWorld& world, const Pose& pose, const CameraModel& cam,
                              double exposure_a, double exposure_b, const std::vector<int>& road_classes);

/// Writes the scene directory plus analytic_gt/ and the spec used.
void write_synthetic(const SyntheticScene& scene, const std::filesystem::path& dir);

/// Camera rig shared by all synthetic scenes: yaws 0, +-55, +-110, 180 degrees.
std::vector<CameraModel> synthetic_rig(const SyntheticSpec& spec);
std::vector<Pose> synthetic_poses(const SyntheticWorld& world);

}  // namespace gsroad
