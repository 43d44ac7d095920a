#include "gsroad/initializer.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "gsroad/error.hpp"
#include "gsroad/parallel.hpp"

namespace gsroad {
namespace {

constexpr double kMinUpZ = 1e-3;

std::vector<Vec2> xy_of(std::span<const Pose> poses) {
  std::vector<Vec2> out;
  out.reserve(poses.size());
  for (const auto& p : poses) out.push_back(p.translation.head<2>());
  return out;
}

}  // namespace

InitMode parse_init_mode(std::string_view text) {
  if (text == "full") return InitMode::Full;
  if (text == "z_only") return InitMode::ZOnly;
  if (text == "none") return InitMode::None;
  throw Error(ErrorCode::InputError, "unknown init mode '" + std::string(text) + "' (expected full|z_only|none)");
}

std::string_view to_string(InitMode mode) {
  switch (mode) {
    case InitMode::Full: return "full";
    case InitMode::ZOnly: return "z_only";
    case InitMode::None: return "none";
  }
  return "full";
}

PoseIndex::PoseIndex(std::span<const Pose> poses, double cell_size) {
  const auto pts = xy_of(poses);
  grid_ = GridIndex2D(pts, cell_size);
}

std::size_t nearest_pose_xy(std::span<const Pose> poses, const Vec2& query_xy) {
  if (poses.empty()) throw Error(ErrorCode::EmptyScene, "no poses");
  std::size_t best = 0;
  double best_d2 = (poses[0].translation.head<2>() - query_xy).squaredNorm();
  for (std::size_t i = 1; i < poses.size(); ++i) {
    const double d2 = (poses[i].translation.head<2>() - query_xy).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

double plane_elevation(const Pose& pose, const Vec2& xy) {
  const Vec3 n = pose.up();
  const Vec3& t = pose.translation;
  return t.z() - (n.x() * (xy.x() - t.x()) + n.y() * (xy.y() - t.y())) / n.z();
}

void init_from_poses(SurfelScene& scene, std::span<const Pose> poses, InitMode mode) {
  if (poses.empty()) throw Error(ErrorCode::EmptyScene, "no poses to initialize from");
  if (mode == InitMode::None) {
    for (std::size_t i = 0; i < scene.size(); ++i) {
      scene.z[i] = 0.0;
      scene.quaternion[4 * i] = 1.0;
      scene.quaternion[4 * i + 1] = scene.quaternion[4 * i + 2] = scene.quaternion[4 * i + 3] = 0.0;
    }
    return;
  }
  for (std::size_t k = 0; k < poses.size(); ++k) {
    if (!(std::abs(poses[k].up().z()) > kMinUpZ)) {
      throw Error(ErrorCode::NearVerticalPose,
                  "pose " + std::to_string(k) + " has |n33| = " + std::to_string(std::abs(poses[k].up().z())));
    }
  }

  const PoseIndex index(poses, 4.0 * scene.lattice.resolution);
  std::vector<Vec4> quats;
  quats.reserve(poses.size());
  for (const auto& p : poses) quats.push_back(p.quaternion());

  constexpr std::size_t kBlock = 4096;
  parallel_for((scene.size() + kBlock - 1) / kBlock, [&](std::size_t b) {
    const std::size_t end = std::min(scene.size(), (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      const Vec2 xy(scene.x[i], scene.y[i]);
      const std::size_t k = index.nearest(xy);
      scene.z[i] = mode == InitMode::Full ? plane_elevation(poses[k], xy) : poses[k].translation.z();
      for (int c = 0; c < 4; ++c) scene.quaternion[4 * i + c] = quats[k][c];
    }
  });
}

}  // namespace gsroad
