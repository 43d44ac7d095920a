#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "gsroad/image.hpp"

namespace gsroad {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

// Conventions: world is z-up. The vehicle frame is x-forward, y-left, z-up with its origin at
// the rear-axle ground point. Camera frames are z-forward, x-right, y-down. Pixel (i, j) has
// its center at image coordinate (i, j). Quaternions are stored (w, x, y, z).

/// Rotation for a quaternion; the input is normalized first.
Mat3 quaternion_to_rotation(const Vec4& wxyz);
Vec4 rotation_to_quaternion(const Mat3& rotation);

/// Rigid SE(3) transform mapping local coordinates into the parent frame.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double timestamp = 0.0;

  static Pose from_quaternion(const Vec4& wxyz, const Vec3& translation, double timestamp = 0.0);

  Vec4 quaternion() const { return rotation_to_quaternion(rotation); }
  /// Third rotation column: the vehicle up axis n3.
  Vec3 up() const { return rotation.col(2); }
  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;
  Mat4 matrix() const;
  /// Orthonormal with det +1 within tol.
  bool is_valid(double tol = 1e-6) const;
};

enum class ProjectionKind { Perspective, Orthographic };

struct CameraModel {
  std::string name;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  /// Camera pose in the vehicle frame (camera -> vehicle).
  Pose extrinsic;
  /// Photometric correction exp(a) * c + b, one pair per physical camera.
  double exposure_a = 0.0;
  double exposure_b = 0.0;
  ProjectionKind kind = ProjectionKind::Perspective;
  /// Meters per pixel, orthographic cameras only.
  double ortho_scale = 0.05;

  bool is_orthographic() const { return kind == ProjectionKind::Orthographic; }
};

/// The world-to-camera transform W.
struct WorldToCamera {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 inverse_apply(const Vec3& p) const { return rotation.transpose() * (p - translation); }
  Mat4 matrix() const;
};

Pose camera_pose_in_world(const Pose& vehicle, const CameraModel& cam);
WorldToCamera world_to_camera_transform(const Pose& vehicle, const CameraModel& cam);
Vec3 world_to_camera(const Pose& vehicle, const CameraModel& cam, const Vec3& p_world);
Vec3 camera_to_world(const Pose& vehicle, const CameraModel& cam, const Vec3& p_cam);

inline constexpr double kNearPlane = 0.1;

struct ProjectedPoint {
  Vec2 pixel = Vec2::Zero();
  double depth = 0.0;
  /// d(u, v) / d(p_cam).
  Mat23 jacobian = Mat23::Zero();
};

/// Pinhole projection; throws Error(BehindCamera) when p_cam.z <= kNearPlane.
ProjectedPoint project_perspective(const CameraModel& cam, const Vec3& p_cam);
/// Orthographic projection looking along -z of the camera frame; depth = -z.
ProjectedPoint project_orthographic(const CameraModel& cam, const Vec3& p_cam);
/// Dispatches on cam.kind; nullopt instead of throwing for points behind the near plane.
std::optional<ProjectedPoint> try_project(const CameraModel& cam, const Vec3& p_cam);

/// A labeled camera frame. mask marks road pixels that participate in the losses.
struct LabeledImage {
  ImageF rgb;
  LabelImage labels;
  ImageU8 mask;
  int camera_id = 0;
  int pose_id = 0;
};

/// Builds the loss mask from a label map and a road-class whitelist.
ImageU8 mask_from_labels(const LabelImage& labels, const std::vector<int>& road_classes);

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> colors;  // empty or points.size()
  std::vector<int> labels;   // empty or points.size()

  std::size_t size() const { return points.size(); }
  bool has_colors() const { return !colors.empty(); }
  bool has_labels() const { return !labels.empty(); }
  bool is_consistent() const;
};

}  // namespace gsroad
