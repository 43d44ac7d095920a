#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gsroad/geometry.hpp"

namespace gsroad {

/// Uniform bucket grid over 2D points. Supports exact nearest-neighbor queries (ring search)
/// and nearest-within-radius queries. Ties are broken by the lowest point index.
class GridIndex2D {
 public:
  GridIndex2D() = default;
  GridIndex2D(std::span<const Vec2> points, double cell_size);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  double cell_size() const { return cell_; }

  /// Index of the closest point; the index must not be empty.
  std::size_t nearest(const Vec2& query) const;
  /// Closest point with distance <= radius, if any.
  std::optional<std::size_t> nearest_within(const Vec2& query, double radius) const;

 private:
  std::int64_t cell_x(double x) const;
  std::int64_t cell_y(double y) const;
  void scan_cell(std::int64_t cx, std::int64_t cy, const Vec2& q, double& best_d2, std::size_t& best) const;

  std::vector<Vec2> points_;
  double cell_ = 1.0;
  Vec2 origin_ = Vec2::Zero();
  std::int64_t nx_ = 0;
  std::int64_t ny_ = 0;
  std::vector<std::uint32_t> cell_start_;  // CSR offsets, size nx*ny+1
  std::vector<std::uint32_t> cell_items_;  // point indices sorted ascending within each cell
};

}  // namespace gsroad
