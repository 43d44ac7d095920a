#pragma once

// Independent reference implementations used by the unit and acceptance tests. Nothing here
// calls into the rasterizer or the lattice index; the math is re-derived from scratch.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gsroad/geometry.hpp"
#include "gsroad/losses.hpp"
#include "gsroad/rasterizer.hpp"
#include "gsroad/scene.hpp"

namespace gsroad::testing {

/// Unit quaternion (w, x, y, z) to rotation, textbook form.
inline Mat3 oracle_rotation(Vec4 q) {
  q /= q.norm();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

struct NaiveImage {
  int width = 0;
  int height = 0;
  int classes = 0;
  std::vector<double> color;  // after exposure
  std::vector<double> semantics;
  std::vector<double> alpha;
};

/// Direct per-pixel evaluation of the splatting sum: every pixel walks every surfel in
/// (depth, index) order and composites c = sum c_k a_k prod (1 - a_i).
inline NaiveImage naive_render(const SurfelScene& scene, const Pose& vehicle, const CameraModel& cam,
                               const RenderSettings& st = {}) {
  const Mat3 rc = vehicle.rotation * cam.extrinsic.rotation;  // camera -> world
  const Vec3 tc = vehicle.rotation * cam.extrinsic.translation + vehicle.translation;
  const Mat3 w = rc.transpose();

  struct Splat {
    double depth;
    std::size_t index;
    Vec2 mean;
    Mat2 inv;
    double alpha;
  };
  std::vector<Splat> splats;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Vec3 p = w * (Vec3(scene.x[i], scene.y[i], scene.z[i]) - tc);
    Eigen::Matrix<double, 2, 3> j = Eigen::Matrix<double, 2, 3>::Zero();
    Vec2 mean;
    double depth;
    if (cam.is_orthographic()) {
      const double k = 1.0 / cam.ortho_scale;
      mean = Vec2(k * p.x() + cam.cx, k * p.y() + cam.cy);
      j(0, 0) = k;
      j(1, 1) = k;
      depth = -p.z();
    } else {
      if (p.z() <= kNearPlane) continue;
      mean = Vec2(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy);
      j << cam.fx / p.z(), 0, -cam.fx * p.x() / (p.z() * p.z()), 0, cam.fy / p.z(), -cam.fy * p.y() / (p.z() * p.z());
      depth = p.z();
    }
    const Mat3 r = oracle_rotation(Vec4(scene.quaternion[4 * i], scene.quaternion[4 * i + 1],
                                        scene.quaternion[4 * i + 2], scene.quaternion[4 * i + 3]));
    const double sx = std::exp(scene.log_scale[2 * i]), sy = std::exp(scene.log_scale[2 * i + 1]);
    const Mat3 sigma = r * Vec3(sx * sx, sy * sy, 0.0).asDiagonal() * r.transpose();
    Mat2 cov = j * w * sigma * w.transpose() * j.transpose();
    cov += st.lowpass * Mat2::Identity();
    if (!(cov.determinant() > st.min_determinant)) continue;
    splats.push_back({depth, i, mean, cov.inverse(), 1.0 / (1.0 + std::exp(-scene.opacity_logit[i]))});
  }
  std::sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.index < b.index;
  });

  NaiveImage out;
  out.width = cam.width;
  out.height = cam.height;
  out.classes = scene.class_count;
  const std::size_t n = static_cast<std::size_t>(cam.width) * cam.height;
  out.color.assign(3 * n, 0.0);
  out.semantics.assign(n * scene.class_count, 0.0);
  out.alpha.assign(n, 0.0);
  const double cutoff2 = st.cutoff_sigma * st.cutoff_sigma;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const std::size_t pix = static_cast<std::size_t>(y) * cam.width + x;
      double t = 1.0;
      Vec3 c = Vec3::Zero();
      for (const Splat& s : splats) {
        if (t < st.min_transmittance) break;
        const Vec2 d = Vec2(x, y) - s.mean;
        const double q = d.dot(s.inv * d);
        if (q > cutoff2) continue;
        const double a = s.alpha * std::exp(-0.5 * q);
        c += a * t * Vec3(scene.color[3 * s.index], scene.color[3 * s.index + 1], scene.color[3 * s.index + 2]);
        for (int k = 0; k < scene.class_count; ++k) {
          out.semantics[pix * scene.class_count + k] += a * t * scene.semantics[s.index * scene.class_count + k];
        }
        out.alpha[pix] += a * t;
        t *= 1.0 - a;
      }
      for (int ch = 0; ch < 3; ++ch) out.color[3 * pix + ch] = std::exp(cam.exposure_a) * c[ch] + cam.exposure_b;
    }
  }
  return out;
}

/// Brute-force directional neighbor: for surfel i, the surfel sitting exactly one lattice step
/// away in `dir`, found by scanning every surfel; i itself when there is none.
inline std::vector<std::int32_t> brute_force_neighbors(const SurfelScene& scene, Direction dir) {
  const double res = scene.lattice.resolution;
  double dx = 0.0, dy = 0.0;
  switch (dir) {
    case Direction::Up: dy = -res; break;
    case Direction::Down: dy = res; break;
    case Direction::Left: dx = -res; break;
    case Direction::Right: dx = res; break;
  }
  const double tol = 0.25 * res;
  std::vector<std::int32_t> out(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    out[i] = static_cast<std::int32_t>(i);
    const double tx = scene.x[i] + dx, ty = scene.y[i] + dy;
    for (std::size_t j = 0; j < scene.size(); ++j) {
      if (std::abs(scene.x[j] - tx) < tol && std::abs(scene.y[j] - ty) < tol) {
        out[i] = static_cast<std::int32_t>(j);
        break;
      }
    }
  }
  return out;
}

/// Layout-1 scene over an explicit rows x cols mask (no trajectory involved).
inline SurfelScene scene_from_mask(int rows, int cols, const std::vector<std::uint8_t>& mask, double res = 0.05,
                                   int class_count = 1) {
  SurfelScene s;
  s.class_count = class_count;
  s.lattice.origin = Vec2(-1.0, 2.0);
  s.lattice.resolution = res;
  s.lattice.rows = rows;
  s.lattice.cols = cols;
  s.lattice.vertex_index.assign(static_cast<std::size_t>(rows) * cols, kEmptyCell);
  s.road_mask = mask;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const std::size_t cell = static_cast<std::size_t>(r) * cols + c;
      if (!mask[cell]) continue;
      s.lattice.vertex_index[cell] = static_cast<std::int32_t>(s.x.size());
      const Vec2 p = s.lattice.vertex_position(r, c);
      s.x.push_back(p.x());
      s.y.push_back(p.y());
      s.z.push_back(0.0);
    }
  }
  const std::size_t n = s.x.size();
  s.log_scale.assign(2 * n, std::log(res));
  s.opacity_logit.assign(n, 0.0);
  s.quaternion.assign(4 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) s.quaternion[4 * i] = 1.0;
  s.color.assign(3 * n, 0.5);
  s.semantics.assign(n * class_count, 0.0);
  return s;
}

/// Camera looking straight down from `height` above (cx, cy), image x along world +x.
inline std::pair<Pose, CameraModel> downward_camera(const Vec2& center, double height, int width, int px_height,
                                                    double fx) {
  CameraModel cam;
  cam.name = "down";
  cam.width = width;
  cam.height = px_height;
  cam.fx = cam.fy = fx;
  cam.cx = 0.5 * width - 0.5;
  cam.cy = 0.5 * px_height - 0.5;
  // Camera x = world +x, camera y = world -y, camera z = world -z.
  cam.extrinsic.rotation << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  cam.extrinsic.translation = Vec3(0, 0, height);
  Pose vehicle;
  vehicle.translation = Vec3(center.x(), center.y(), 0.0);
  return {vehicle, cam};
}

/// Random perturbation of every learnable parameter in place.
inline void randomize_parameters(SurfelScene& s, std::mt19937_64& rng, double z_spread = 0.05) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s.z[i] = z_spread * u(rng);
    s.log_scale[2 * i] += 0.3 * u(rng);
    s.log_scale[2 * i + 1] += 0.3 * u(rng);
    s.opacity_logit[i] = 1.5 * u(rng);
    Vec4 q(1.0, 0.2 * u(rng), 0.2 * u(rng), 0.6 * u(rng));
    q.normalize();
    for (int k = 0; k < 4; ++k) s.quaternion[4 * i + k] = q[k];
    for (int k = 0; k < 3; ++k) s.color[3 * i + k] = 0.5 + 0.45 * u(rng);
    for (int k = 0; k < s.class_count; ++k) s.semantics[i * s.class_count + k] = 2.0 * u(rng);
  }
}

}  // namespace gsroad::testing
