#pragma once

#include <span>
#include <string_view>

#include "gsroad/geometry.hpp"
#include "gsroad/scene.hpp"
#include "gsroad/spatial_index.hpp"

namespace gsroad {

enum class InitMode {
  Full,   // elevation from the nearest pose's tangent plane
  ZOnly,  // elevation copied from the nearest pose height
  None,   // keep z = 0 and identity rotation (ablation)
};

InitMode parse_init_mode(std::string_view text);
std::string_view to_string(InitMode mode);

/// Nearest-pose lookup on the xy projection of a trajectory.
class PoseIndex {
 public:
  PoseIndex(std::span<const Pose> poses, double cell_size);
  std::size_t nearest(const Vec2& query_xy) const { return grid_.nearest(query_xy); }

 private:
  GridIndex2D grid_;
};

/// Index of the pose with minimum xy distance to query_xy; ties go to the lowest index.
std::size_t nearest_pose_xy(std::span<const Pose> poses, const Vec2& query_xy);

/// Sets every surfel's elevation and rotation from its nearest vehicle pose. Throws
/// Error(NearVerticalPose) when a used pose has |n33| <= 1e-3.
void init_from_poses(SurfelScene& scene, std::span<const Pose> poses, InitMode mode);

/// Elevation predicted by the tangent plane of `pose` at xy.
double plane_elevation(const Pose& pose, const Vec2& xy);

}  // namespace gsroad
