#include "gsroad/scene.hpp"

#include <algorithm>
#include <cmath>

#include "gsroad/error.hpp"

namespace gsroad {

std::array<int, 2> Lattice::cell_of(const Vec2& xy) const {
  const Vec2 rel = (xy - origin) / resolution;
  return {static_cast<int>(std::floor(rel.y() + 0.5)), static_cast<int>(std::floor(rel.x() + 0.5))};
}

bool Lattice::operator==(const Lattice& other) const {
  return origin == other.origin && resolution == other.resolution && rows == other.rows && cols == other.cols &&
         vertex_index == other.vertex_index && center_index == other.center_index;
}

bool SurfelScene::operator==(const SurfelScene& o) const {
  return x == o.x && y == o.y && z == o.z && log_scale == o.log_scale && opacity_logit == o.opacity_logit &&
         quaternion == o.quaternion && color == o.color && semantics == o.semantics && class_count == o.class_count &&
         layout == o.layout && lattice == o.lattice && road_mask == o.road_mask && palette == o.palette;
}

Vec2 SurfelScene::scale(std::size_t i) const { return {std::exp(log_scale[2 * i]), std::exp(log_scale[2 * i + 1])}; }

double SurfelScene::opacity(std::size_t i) const { return sigmoid(opacity_logit[i]); }

Vec4 SurfelScene::rotation(std::size_t i) const {
  return {quaternion[4 * i], quaternion[4 * i + 1], quaternion[4 * i + 2], quaternion[4 * i + 3]};
}

GaussianSurfel SurfelScene::surfel(std::size_t i) const {
  GaussianSurfel s;
  s.center = center(i);
  s.color = rgb(i);
  s.scale = scale(i);
  s.opacity = opacity(i);
  s.rotation = rotation(i);
  const auto l = logits(i);
  s.semantics.assign(l.begin(), l.end());
  return s;
}

void SurfelScene::set_surfel(std::size_t i, const GaussianSurfel& s) {
  x[i] = s.center.x();
  y[i] = s.center.y();
  z[i] = s.center.z();
  for (int c = 0; c < 3; ++c) color[3 * i + c] = s.color[c];
  log_scale[2 * i] = std::log(s.scale.x());
  log_scale[2 * i + 1] = std::log(s.scale.y());
  opacity_logit[i] = logit(s.opacity);
  for (int c = 0; c < 4; ++c) quaternion[4 * i + c] = s.rotation[c];
  for (int c = 0; c < class_count; ++c) {
    semantics[i * class_count + c] = c < static_cast<int>(s.semantics.size()) ? s.semantics[c] : 0.0;
  }
}

std::size_t SurfelScene::parameter_count() const { return size() * (1 + 2 + 1 + 4 + 3 + class_count); }

namespace {

// Square-kernel binary dilation, separable: rows then columns, each via prefix sums.
std::vector<std::uint8_t> dilate(const std::vector<std::uint8_t>& in, int rows, int cols, int radius) {
  if (radius <= 0) return in;
  std::vector<std::uint8_t> tmp(in.size(), 0), out(in.size(), 0);
  std::vector<int> prefix(static_cast<std::size_t>(std::max(rows, cols)) + 1);
  for (int r = 0; r < rows; ++r) {
    prefix[0] = 0;
    for (int c = 0; c < cols; ++c) prefix[c + 1] = prefix[c] + in[static_cast<std::size_t>(r) * cols + c];
    for (int c = 0; c < cols; ++c) {
      const int lo = std::max(0, c - radius), hi = std::min(cols - 1, c + radius);
      tmp[static_cast<std::size_t>(r) * cols + c] = prefix[hi + 1] - prefix[lo] > 0;
    }
  }
  for (int c = 0; c < cols; ++c) {
    prefix[0] = 0;
    for (int r = 0; r < rows; ++r) prefix[r + 1] = prefix[r] + tmp[static_cast<std::size_t>(r) * cols + c];
    for (int r = 0; r < rows; ++r) {
      const int lo = std::max(0, r - radius), hi = std::min(rows - 1, r + radius);
      out[static_cast<std::size_t>(r) * cols + c] = prefix[hi + 1] - prefix[lo] > 0;
    }
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> road_mask_from_trajectory(std::span<const Pose> poses, const Lattice& lattice,
                                                    int dilation_cells) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(lattice.rows) * lattice.cols, 0);
  auto mark = [&](const Vec2& p) {
    const auto [r, c] = lattice.cell_of(p);
    if (lattice.in_range(r, c)) mask[static_cast<std::size_t>(r) * lattice.cols + c] = 1;
  };
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Vec2 a = poses[i].translation.head<2>();
    mark(a);
    if (i + 1 < poses.size()) {
      const Vec2 b = poses[i + 1].translation.head<2>();
      const int steps = static_cast<int>(std::ceil((b - a).norm() / (0.5 * lattice.resolution)));
      for (int s = 1; s < steps; ++s) mark(a + (b - a) * (static_cast<double>(s) / steps));
    }
  }
  return dilate(mask, lattice.rows, lattice.cols, dilation_cells);
}

SurfelScene build_layout(std::span<const Pose> poses, const LayoutOptions& options) {
  if (poses.empty()) throw Error(ErrorCode::EmptyScene, "no poses to build a layout from");
  if (!(options.resolution > 0.0)) throw Error(ErrorCode::InputError, "resolution must be positive");
  if (!(options.expand >= 0.0)) throw Error(ErrorCode::InputError, "expand must be non-negative");
  if (options.class_count < 1) throw Error(ErrorCode::InputError, "class count must be at least 1");

  Vec2 lo = poses.front().translation.head<2>(), hi = lo;
  for (const auto& p : poses) {
    lo = lo.cwiseMin(p.translation.head<2>());
    hi = hi.cwiseMax(p.translation.head<2>());
  }
  const Vec2 extent = (hi - lo).array() + 2.0 * options.expand;
  if (extent.x() < options.resolution || extent.y() < options.resolution) {
    throw Error(ErrorCode::DegenerateExtent, "trajectory extent " + std::to_string(extent.x()) + " x " +
                                                 std::to_string(extent.y()) + " m is below one cell");
  }

  SurfelScene scene;
  scene.class_count = options.class_count;
  scene.layout = options.layout;
  Lattice& lat = scene.lattice;
  lat.origin = lo.array() - options.expand;
  lat.resolution = options.resolution;
  lat.cols = static_cast<int>(std::floor(extent.x() / options.resolution + 1e-9)) + 1;
  lat.rows = static_cast<int>(std::floor(extent.y() / options.resolution + 1e-9)) + 1;

  const int dilation = static_cast<int>(std::ceil(options.expand / options.resolution - 1e-9));
  scene.road_mask = road_mask_from_trajectory(poses, lat, dilation);

  const auto cells = static_cast<std::size_t>(lat.rows) * lat.cols;
  lat.vertex_index.assign(cells, kEmptyCell);
  std::vector<Vec2> positions;
  for (int r = 0; r < lat.rows; ++r) {
    for (int c = 0; c < lat.cols; ++c) {
      const auto cell = static_cast<std::size_t>(r) * lat.cols + c;
      if (!scene.road_mask[cell]) continue;
      lat.vertex_index[cell] = static_cast<std::int32_t>(positions.size());
      positions.push_back(lat.vertex_position(r, c));
    }
  }
  if (options.layout == Layout::Layout2 && lat.rows > 1 && lat.cols > 1) {
    lat.center_index.assign(static_cast<std::size_t>(lat.rows - 1) * (lat.cols - 1), kEmptyCell);
    auto masked = [&](int r, int c) { return scene.road_mask[static_cast<std::size_t>(r) * lat.cols + c] != 0; };
    for (int r = 0; r + 1 < lat.rows; ++r) {
      for (int c = 0; c + 1 < lat.cols; ++c) {
        if (!(masked(r, c) && masked(r, c + 1) && masked(r + 1, c) && masked(r + 1, c + 1))) continue;
        lat.center_index[static_cast<std::size_t>(r) * (lat.cols - 1) + c] = static_cast<std::int32_t>(positions.size());
        positions.push_back(lat.center_position(r, c));
      }
    }
  }

  const std::size_t n = positions.size();
  scene.x.resize(n);
  scene.y.resize(n);
  scene.z.assign(n, 0.0);
  scene.log_scale.assign(2 * n, std::log(options.resolution));
  scene.opacity_logit.assign(n, logit(options.initial_opacity));
  scene.quaternion.assign(4 * n, 0.0);
  scene.color.assign(3 * n, options.initial_color);
  scene.semantics.assign(n * options.class_count, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    scene.x[i] = positions[i].x();
    scene.y[i] = positions[i].y();
    scene.quaternion[4 * i] = 1.0;
  }
  return scene;
}

std::vector<std::int32_t> neighbor_indices(const SurfelScene& scene, Direction direction) {
  const Lattice& lat = scene.lattice;
  int dr = 0, dc = 0;
  switch (direction) {
    case Direction::Up: dr = -1; break;
    case Direction::Down: dr = 1; break;
    case Direction::Left: dc = -1; break;
    case Direction::Right: dc = 1; break;
  }

  std::vector<std::int32_t> out(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) out[i] = static_cast<std::int32_t>(i);

  for (int r = 0; r < lat.rows; ++r) {
    for (int c = 0; c < lat.cols; ++c) {
      const std::int32_t self = lat.vertex_index[static_cast<std::size_t>(r) * lat.cols + c];
      if (self == kEmptyCell) continue;
      const int nr = r + dr, nc = c + dc;
      if (!lat.in_range(nr, nc)) continue;
      const std::int32_t other = lat.vertex_index[static_cast<std::size_t>(nr) * lat.cols + nc];
      if (other != kEmptyCell) out[self] = other;
    }
  }

  if (!lat.center_index.empty()) {
    const int crows = lat.rows - 1, ccols = lat.cols - 1;
    for (int r = 0; r < crows; ++r) {
      for (int c = 0; c < ccols; ++c) {
        const std::int32_t self = lat.center_index[static_cast<std::size_t>(r) * ccols + c];
        if (self == kEmptyCell) continue;
        const int nr = r + dr, nc = c + dc;
        if (nr < 0 || nr >= crows || nc < 0 || nc >= ccols) continue;
        const std::int32_t other = lat.center_index[static_cast<std::size_t>(nr) * ccols + nc];
        if (other != kEmptyCell) out[self] = other;
      }
    }
  }
  return out;
}

Mat3 covariance_3d(const GaussianSurfel& surfel) {
  const Mat3 r = quaternion_to_rotation(surfel.rotation);
  const Vec3 s2(surfel.scale.x() * surfel.scale.x(), surfel.scale.y() * surfel.scale.y(), 0.0);
  return r * s2.asDiagonal() * r.transpose();
}

std::vector<ClassInfo> default_palette() {
  return {
      {0, "road", {128, 64, 128}},
      {1, "lane_line", {255, 255, 255}},
      {2, "crosswalk", {220, 220, 0}},
      {3, "road_marking", {250, 170, 30}},
      {4, "sidewalk_edge", {244, 35, 232}},
      {5, "terrain", {107, 142, 35}},
      {6, "sky", {70, 130, 180}},
  };
}

std::vector<int> default_road_classes() { return {0, 1, 2, 3, 4}; }

}  // namespace gsroad
