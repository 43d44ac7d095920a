#include "gsroad/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gsroad/error.hpp"

namespace gsroad {
namespace {

constexpr std::int64_t kMaxCells = std::int64_t{1} << 24;

}  // namespace

GridIndex2D::GridIndex2D(std::span<const Vec2> points, double cell_size)
    : points_(points.begin(), points.end()), cell_(cell_size) {
  if (!(cell_size > 0.0)) throw Error(ErrorCode::InputError, "grid cell size must be positive");
  if (points_.empty()) return;

  Vec2 lo = points_.front(), hi = points_.front();
  for (const auto& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  origin_ = lo;
  auto extent_cells = [&] {
    nx_ = static_cast<std::int64_t>(std::floor((hi.x() - lo.x()) / cell_)) + 1;
    ny_ = static_cast<std::int64_t>(std::floor((hi.y() - lo.y()) / cell_)) + 1;
  };
  extent_cells();
  while (nx_ * ny_ > kMaxCells) {
    cell_ *= 2.0;
    extent_cells();
  }

  std::vector<std::uint32_t> counts(static_cast<std::size_t>(nx_ * ny_) + 1, 0);
  std::vector<std::uint32_t> cell_of(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto c = static_cast<std::uint32_t>(cell_y(points_[i].y()) * nx_ + cell_x(points_[i].x()));
    cell_of[i] = c;
    ++counts[c + 1];
  }
  for (std::size_t c = 1; c < counts.size(); ++c) counts[c] += counts[c - 1];
  cell_start_ = counts;
  cell_items_.resize(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) cell_items_[counts[cell_of[i]]++] = static_cast<std::uint32_t>(i);
}

std::int64_t GridIndex2D::cell_x(double x) const {
  return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((x - origin_.x()) / cell_)), 0, nx_ - 1);
}

std::int64_t GridIndex2D::cell_y(double y) const {
  return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((y - origin_.y()) / cell_)), 0, ny_ - 1);
}

void GridIndex2D::scan_cell(std::int64_t cx, std::int64_t cy, const Vec2& q, double& best_d2,
                            std::size_t& best) const {
  const auto c = static_cast<std::size_t>(cy * nx_ + cx);
  for (auto k = cell_start_[c]; k < cell_start_[c + 1]; ++k) {
    const std::size_t idx = cell_items_[k];
    const double d2 = (points_[idx] - q).squaredNorm();
    if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
      best_d2 = d2;
      best = idx;
    }
  }
}

std::size_t GridIndex2D::nearest(const Vec2& q) const {
  if (points_.empty()) throw Error(ErrorCode::InputError, "nearest query on an empty index");

  // Unclamped cell of the query; rings are measured from it.
  const auto qx = static_cast<std::int64_t>(std::floor((q.x() - origin_.x()) / cell_));
  const auto qy = static_cast<std::int64_t>(std::floor((q.y() - origin_.y()) / cell_));
  const std::int64_t gap_x = std::max<std::int64_t>({0, -qx, qx - (nx_ - 1)});
  const std::int64_t gap_y = std::max<std::int64_t>({0, -qy, qy - (ny_ - 1)});
  const std::int64_t r_min = std::max(gap_x, gap_y);
  const std::int64_t r_max = std::max({std::abs(qx), std::abs(qx - (nx_ - 1)), std::abs(qy), std::abs(qy - (ny_ - 1))});

  double best_d2 = std::numeric_limits<double>::infinity();
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (std::int64_t r = r_min; r <= r_max; ++r) {
    const std::int64_t x0 = std::max<std::int64_t>(qx - r, 0), x1 = std::min<std::int64_t>(qx + r, nx_ - 1);
    const std::int64_t y0 = std::max<std::int64_t>(qy - r, 0), y1 = std::min<std::int64_t>(qy + r, ny_ - 1);
    if (qy - r >= 0)
      for (auto x = x0; x <= x1; ++x) scan_cell(x, qy - r, q, best_d2, best);
    if (r > 0 && qy + r < ny_)
      for (auto x = x0; x <= x1; ++x) scan_cell(x, qy + r, q, best_d2, best);
    const std::int64_t ys = std::max(y0, qy - r + 1), ye = std::min(y1, qy + r - 1);
    if (qx - r >= 0)
      for (auto y = ys; y <= ye; ++y) scan_cell(qx - r, y, q, best_d2, best);
    if (r > 0 && qx + r < nx_)
      for (auto y = ys; y <= ye; ++y) scan_cell(qx + r, y, q, best_d2, best);

    // Every point in ring r+1 or beyond is at least r cells away.
    const double bound = static_cast<double>(r) * cell_;
    if (best_d2 < bound * bound) break;
  }
  return best;
}

std::optional<std::size_t> GridIndex2D::nearest_within(const Vec2& q, double radius) const {
  if (points_.empty()) return std::nullopt;
  const double r2 = radius * radius;
  const auto x0 = static_cast<std::int64_t>(std::floor((q.x() - radius - origin_.x()) / cell_));
  const auto x1 = static_cast<std::int64_t>(std::floor((q.x() + radius - origin_.x()) / cell_));
  const auto y0 = static_cast<std::int64_t>(std::floor((q.y() - radius - origin_.y()) / cell_));
  const auto y1 = static_cast<std::int64_t>(std::floor((q.y() + radius - origin_.y()) / cell_));
  if (x1 < 0 || y1 < 0 || x0 >= nx_ || y0 >= ny_) return std::nullopt;

  double best_d2 = std::numeric_limits<double>::infinity();
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (auto y = std::max<std::int64_t>(y0, 0); y <= std::min(y1, ny_ - 1); ++y)
    for (auto x = std::max<std::int64_t>(x0, 0); x <= std::min(x1, nx_ - 1); ++x) scan_cell(x, y, q, best_d2, best);
  if (best_d2 <= r2) return best;
  return std::nullopt;
}

}  // namespace gsroad
