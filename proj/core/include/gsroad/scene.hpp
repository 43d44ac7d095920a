#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gsroad/geometry.hpp"

namespace gsroad {

enum class Layout {
  Layout1,  // one surfel per masked lattice vertex
  Layout2,  // vertices plus the centers of fully-masked cells (quincunx)
};

enum class Direction { Up, Down, Left, Right };
inline constexpr std::array<Direction, 4> kAllDirections = {Direction::Up, Direction::Down, Direction::Left,
                                                             Direction::Right};

inline constexpr std::int32_t kEmptyCell = -1;

struct ClassInfo {
  int id = 0;
  std::string name;
  std::array<std::uint8_t, 3> color{0, 0, 0};

  bool operator==(const ClassInfo&) const = default;
};

/// Activated view of one surfel's parameters.
struct GaussianSurfel {
  Vec3 center = Vec3::Zero();
  Vec3 color = Vec3::Constant(0.5);
  Vec2 scale = Vec2::Ones();
  double opacity = 0.5;
  Vec4 rotation = Vec4(1, 0, 0, 0);  // wxyz
  std::vector<double> semantics;     // class logits
};

/// Regular xy lattice on which surfels are placed. Vertex (row, col) sits at
/// origin + (col, row) * resolution; the cell owning a vertex is the square of side
/// `resolution` centered on it.
struct Lattice {
  Vec2 origin = Vec2::Zero();
  double resolution = 0.05;
  int rows = 0;
  int cols = 0;
  /// rows*cols map from vertex cell to surfel index or kEmptyCell.
  std::vector<std::int32_t> vertex_index;
  /// (rows-1)*(cols-1) map from cell-center slot to surfel index (Layout-2 only).
  std::vector<std::int32_t> center_index;

  Vec2 vertex_position(int row, int col) const {
    return origin + Vec2(col * resolution, row * resolution);
  }
  Vec2 center_position(int row, int col) const {
    return origin + Vec2((col + 0.5) * resolution, (row + 0.5) * resolution);
  }
  /// Vertex cell containing xy (may be out of range).
  std::array<int, 2> cell_of(const Vec2& xy) const;
  bool in_range(int row, int col) const { return row >= 0 && row < rows && col >= 0 && col < cols; }
  double extent_x() const { return (cols - 1) * resolution; }
  double extent_y() const { return (rows - 1) * resolution; }

  bool operator==(const Lattice& other) const;
};

/// Structure-of-arrays storage for the surfel meshgrid and every learnable parameter.
/// x/y are fixed after construction; only z among the center coordinates is learnable.
struct SurfelScene {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> z;
  std::vector<double> log_scale;      // 2 per surfel, s = exp(log_scale)
  std::vector<double> opacity_logit;  // alpha = sigmoid(opacity_logit)
  std::vector<double> quaternion;     // 4 per surfel, wxyz
  std::vector<double> color;          // 3 per surfel
  std::vector<double> semantics;      // class_count per surfel

  int class_count = 0;
  Layout layout = Layout::Layout1;
  Lattice lattice;
  std::vector<std::uint8_t> road_mask;  // rows*cols
  std::vector<ClassInfo> palette;

  std::size_t size() const { return z.size(); }
  bool empty() const { return z.empty(); }

  Vec3 center(std::size_t i) const { return {x[i], y[i], z[i]}; }
  Vec2 scale(std::size_t i) const;
  double opacity(std::size_t i) const;
  Vec4 rotation(std::size_t i) const;
  Vec3 rgb(std::size_t i) const { return {color[3 * i], color[3 * i + 1], color[3 * i + 2]}; }
  std::span<const double> logits(std::size_t i) const {
    return {semantics.data() + i * class_count, static_cast<std::size_t>(class_count)};
  }

  GaussianSurfel surfel(std::size_t i) const;
  void set_surfel(std::size_t i, const GaussianSurfel& s);

  /// Counts of parameters in each learnable class, in GradientBuffer order.
  std::size_t parameter_count() const;
  bool operator==(const SurfelScene& other) const;
};

struct LayoutOptions {
  double resolution = 0.05;
  double expand = 10.0;
  Layout layout = Layout::Layout1;
  int class_count = 1;
  double initial_opacity = 0.9;
  double initial_color = 0.5;
};

/// Builds the road mask from the trajectory and places surfels on the masked lattice.
SurfelScene build_layout(std::span<const Pose> poses, const LayoutOptions& options);

/// Rasterized trajectory dilated into the road mask; exposed for tests and tooling.
std::vector<std::uint8_t> road_mask_from_trajectory(std::span<const Pose> poses, const Lattice& lattice,
                                                    int dilation_cells);

/// For each surfel, the index of its lattice neighbor in `direction`, or its own index when
/// the neighbor falls outside the road mask.
std::vector<std::int32_t> neighbor_indices(const SurfelScene& scene, Direction direction);

/// Sigma = R diag(sx^2, sy^2, 0) R^T.
Mat3 covariance_3d(const GaussianSurfel& surfel);

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Default palette: the road-surface classes first, then background classes.
std::vector<ClassInfo> default_palette();
std::vector<int> default_road_classes();

}  // namespace gsroad
