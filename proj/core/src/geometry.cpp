#include "gsroad/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "gsroad/error.hpp"

namespace gsroad {

Mat3 quaternion_to_rotation(const Vec4& wxyz) {
  const Vec4 q = wxyz / wxyz.norm();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),  //
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),   //
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Vec4 rotation_to_quaternion(const Mat3& rotation) {
  Eigen::Quaterniond q(rotation);
  q.normalize();
  Vec4 out(q.w(), q.x(), q.y(), q.z());
  // Canonical hemisphere keeps serialized poses stable.
  if (out[0] < 0) out = -out;
  return out;
}

Pose Pose::from_quaternion(const Vec4& wxyz, const Vec3& t, double ts) {
  Pose p;
  p.rotation = quaternion_to_rotation(wxyz);
  p.translation = t;
  p.timestamp = ts;
  return p;
}

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  inv.timestamp = timestamp;
  return inv;
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  out.timestamp = timestamp;
  return out;
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

bool Pose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho_err = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho_err <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

Mat4 WorldToCamera::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose camera_pose_in_world(const Pose& vehicle, const CameraModel& cam) { return vehicle * cam.extrinsic; }

WorldToCamera world_to_camera_transform(const Pose& vehicle, const CameraModel& cam) {
  const Pose inv = camera_pose_in_world(vehicle, cam).inverse();
  return {inv.rotation, inv.translation};
}

Vec3 world_to_camera(const Pose& vehicle, const CameraModel& cam, const Vec3& p_world) {
  return world_to_camera_transform(vehicle, cam).apply(p_world);
}

Vec3 camera_to_world(const Pose& vehicle, const CameraModel& cam, const Vec3& p_cam) {
  return camera_pose_in_world(vehicle, cam).apply(p_cam);
}

ProjectedPoint project_perspective(const CameraModel& cam, const Vec3& p_cam) {
  if (!(p_cam.z() > kNearPlane)) {
    throw Error(ErrorCode::BehindCamera, "point depth " + std::to_string(p_cam.z()) + " is inside the near plane");
  }
  const double inv_z = 1.0 / p_cam.z();
  ProjectedPoint out;
  out.pixel = {cam.fx * p_cam.x() * inv_z + cam.cx, cam.fy * p_cam.y() * inv_z + cam.cy};
  out.depth = p_cam.z();
  out.jacobian << cam.fx * inv_z, 0.0, -cam.fx * p_cam.x() * inv_z * inv_z,  //
      0.0, cam.fy * inv_z, -cam.fy * p_cam.y() * inv_z * inv_z;
  return out;
}

ProjectedPoint project_orthographic(const CameraModel& cam, const Vec3& p_cam) {
  const double inv_s = 1.0 / cam.ortho_scale;
  ProjectedPoint out;
  out.pixel = {p_cam.x() * inv_s + cam.cx, p_cam.y() * inv_s + cam.cy};
  out.depth = -p_cam.z();
  out.jacobian << inv_s, 0.0, 0.0, 0.0, inv_s, 0.0;
  return out;
}

std::optional<ProjectedPoint> try_project(const CameraModel& cam, const Vec3& p_cam) {
  if (cam.is_orthographic()) return project_orthographic(cam, p_cam);
  if (!(p_cam.z() > kNearPlane)) return std::nullopt;
  return project_perspective(cam, p_cam);
}

ImageU8 mask_from_labels(const LabelImage& labels, const std::vector<int>& road_classes) {
  ImageU8 mask(labels.width, labels.height, 1, 0);
  for (std::size_t i = 0; i < labels.data.size(); ++i) {
    mask.data[i] = std::find(road_classes.begin(), road_classes.end(), labels.data[i]) != road_classes.end();
  }
  return mask;
}

bool PointCloud::is_consistent() const {
  return (colors.empty() || colors.size() == points.size()) && (labels.empty() || labels.size() == points.size());
}

}  // namespace gsroad
