#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gsroad/geometry.hpp"
#include "gsroad/image.hpp"
#include "gsroad/scene.hpp"

namespace gsroad {

struct RenderSettings {
  /// Added to the diagonal of every projected 2x2 covariance, in px^2.
  double lowpass = 0.3;
  /// Splats touch pixels within this many standard deviations (Mahalanobis radius).
  double cutoff_sigma = 3.0;
  /// A pixel stops accepting contributions once its transmittance drops below this.
  double min_transmittance = 1e-4;
  /// Projected covariances with determinant at or below this are skipped.
  double min_determinant = 1e-12;
  /// Keep per-pixel contribution lists for the backward pass.
  bool retain_contributions = true;
  /// Also composite surfel elevation through the same weights.
  bool render_elevation = false;
  /// Height of the row bands that form the unit of parallel work.
  int band_rows = 16;
};

/// Sub-rectangle of a camera's pixel grid.
struct PixelWindow {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;

  static PixelWindow full(const CameraModel& cam) { return {0, 0, cam.width, cam.height}; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

/// A surfel after projection into one camera.
struct ProjectedSurfel {
  std::uint32_t surfel = 0;
  Vec2 mean = Vec2::Zero();
  double depth = 0.0;
  Vec3 p_cam = Vec3::Zero();
  Mat23 jacobian = Mat23::Zero();
  Mat2 cov2d = Mat2::Identity();
  /// Inverse covariance (a, b, c): q = a dx^2 + 2 b dx dy + c dy^2.
  Vec3 conic = Vec3::Zero();
  double alpha = 0.0;
  int x_min = 0;
  int x_max = -1;
  int y_min = 0;
  int y_max = -1;
};

struct Contribution {
  std::uint32_t slot = 0;   // index into RenderOutput::projected
  std::uint32_t local = 0;  // index into the owning band's slot list
  double g = 0.0;           // Gaussian falloff at the pixel
  double transmittance = 0.0;  // before this contribution
};

struct RenderOutput {
  PixelWindow window;
  int class_count = 0;
  double exposure_a = 0.0;
  double exposure_b = 0.0;
  WorldToCamera world_to_camera;

  std::vector<double> raw_color;      // composite before exposure, 3 per pixel
  std::vector<double> color;          // exp(a) * raw + b, 3 per pixel
  std::vector<double> semantics;      // class_count per pixel
  std::vector<double> alpha_accum;    // 1 per pixel
  std::vector<double> transmittance;  // final transmittance, 1 per pixel
  std::vector<double> elevation;      // composited z (unnormalized), when enabled

  std::vector<std::vector<Contribution>> contributing;  // per pixel, front to back
  std::vector<ProjectedSurfel> projected;               // sorted by (depth, surfel index)
  std::vector<std::vector<std::uint32_t>> band_slots;   // per band, slots in depth order
  int band_rows = 16;
  std::size_t singular_count = 0;

  int width() const { return window.width; }
  int height() const { return window.height; }
  std::size_t pixel_count() const { return window.pixel_count(); }
};

/// Per-parameter gradients laid out like SurfelScene, plus per-camera exposure gradients.
struct GradientBuffer {
  std::vector<double> z;
  std::vector<double> log_scale;
  std::vector<double> opacity_logit;
  std::vector<double> quaternion;
  std::vector<double> color;
  std::vector<double> semantics;
  std::vector<double> exposure_a;
  std::vector<double> exposure_b;

  void resize(const SurfelScene& scene, std::size_t camera_count);
  void zero();
};

/// Ground rectangle around a camera: +-lateral along its projected x axis, [0, forward]
/// along its projected z axis.
struct CullBox {
  double lateral = 20.0;
  double forward = 40.0;
};

std::vector<std::uint32_t> cull_frustum(const SurfelScene& scene, const Pose& cam_pose_world, const CameraModel& cam,
                                        const CullBox& box = {});

std::vector<std::uint32_t> all_surfels(const SurfelScene& scene);

/// Projects, sorts, and composites the given surfels into `out` (whose buffers are reused).
void render_into(const SurfelScene& scene, const Pose& vehicle_pose, const CameraModel& cam,
                 std::span<const std::uint32_t> culled, const RenderSettings& settings, const PixelWindow& window,
                 RenderOutput& out);

RenderOutput render(const SurfelScene& scene, const Pose& vehicle_pose, const CameraModel& cam,
                    std::span<const std::uint32_t> culled, const RenderSettings& settings = {});

/// Accumulates d(loss)/d(parameters) into `grads` given d(loss)/d(color) (post-exposure, 3 per
/// pixel) and d(loss)/d(semantics) (class_count per pixel; may be empty).
void render_backward(const SurfelScene& scene, const CameraModel& cam, std::size_t camera_index,
                     const RenderOutput& output, std::span<const double> d_color, std::span<const double> d_sem,
                     GradientBuffer& grads);

/// Raster geometry of a bird's-eye-view map. Pixel (i, j) is centered at origin + (i, j) * resolution.
struct BevGrid {
  Vec2 origin = Vec2::Zero();
  double resolution = 0.05;
  int width = 0;
  int height = 0;

  static BevGrid covering(const Lattice& lattice, double resolution);
  Vec2 pixel_center(int i, int j) const { return origin + Vec2(i * resolution, j * resolution); }
  bool operator==(const BevGrid& o) const {
    return origin == o.origin && resolution == o.resolution && width == o.width && height == o.height;
  }
};

struct BevMaps {
  BevGrid grid;
  ImageD rgb;          // 3 channels, raw composite (no exposure)
  LabelImage labels;   // argmax of composited semantics, -1 where nothing rendered
  ImageD elevation;    // composited z normalized by accumulated alpha, NaN where nothing rendered
  ImageD alpha;        // accumulated alpha
};

/// Orthographic camera whose pixel grid equals `grid`.
CameraModel bev_camera(const BevGrid& grid, double top_height);

/// Renders the BEV in chunk x chunk tiles and stitches them; identical to a monolithic render.
BevMaps render_bev_chunked(const SurfelScene& scene, const BevGrid& grid, int chunk = 2000,
                           const RenderSettings& settings = {});

}  // namespace gsroad
