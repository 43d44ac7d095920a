#include "gsroad/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "gsroad/error.hpp"
#include "gsroad/parallel.hpp"

namespace gsroad {

void GradientBuffer::resize(const SurfelScene& scene, std::size_t camera_count) {
  const std::size_t n = scene.size();
  z.assign(n, 0.0);
  log_scale.assign(2 * n, 0.0);
  opacity_logit.assign(n, 0.0);
  quaternion.assign(4 * n, 0.0);
  color.assign(3 * n, 0.0);
  semantics.assign(n * scene.class_count, 0.0);
  exposure_a.assign(camera_count, 0.0);
  exposure_b.assign(camera_count, 0.0);
}

void GradientBuffer::zero() {
  for (auto* v : {&z, &log_scale, &opacity_logit, &quaternion, &color, &semantics, &exposure_a, &exposure_b}) {
    std::fill(v->begin(), v->end(), 0.0);
  }
}

std::vector<std::uint32_t> all_surfels(const SurfelScene& scene) {
  std::vector<std::uint32_t> out(scene.size());
  std::iota(out.begin(), out.end(), 0u);
  return out;
}

std::vector<std::uint32_t> cull_frustum(const SurfelScene& scene, const Pose& cam_pose_world, const CameraModel& cam,
                                        const CullBox& box) {
  std::vector<std::uint32_t> out;
  const Vec2 o = cam_pose_world.translation.head<2>();
  Vec2 ex = cam_pose_world.rotation.col(0).head<2>();
  Vec2 ez = cam_pose_world.rotation.col(2).head<2>();
  // A camera looking straight down has no forward direction on the ground; use image-up.
  if (ez.norm() < 1e-6) ez = -cam_pose_world.rotation.col(1).head<2>();
  const bool box_ok = ex.norm() > 1e-6 && ez.norm() > 1e-6;
  Mat2 basis;
  if (box_ok) {
    basis.col(0) = ex.normalized();
    basis.col(1) = ez.normalized();
  }
  const bool solvable = box_ok && std::abs(basis.determinant()) > 1e-6;
  const Mat2 inv = solvable ? Mat2(basis.inverse()) : Mat2::Zero();
  const double radius2 = box.forward * box.forward;
  (void)cam;

  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Vec2 d = Vec2(scene.x[i], scene.y[i]) - o;
    if (solvable) {
      const Vec2 st = inv * d;
      if (std::abs(st.x()) <= box.lateral && st.y() >= 0.0 && st.y() <= box.forward) {
        out.push_back(static_cast<std::uint32_t>(i));
      }
    } else if (d.squaredNorm() <= radius2) {
      out.push_back(static_cast<std::uint32_t>(i));
    }
  }
  return out;
}

namespace {

struct ProjectionContext {
  const SurfelScene& scene;
  const CameraModel& cam;
  const WorldToCamera& w2c;
  const RenderSettings& settings;
  const PixelWindow& window;
};

// Projects surfel i; returns nullopt when it is behind the camera, singular, or off-window.
// `singular` is set when the covariance determinant is below the floor.
std::optional<ProjectedSurfel> project_surfel(const ProjectionContext& ctx, std::uint32_t i, bool& singular) {
  singular = false;
  const SurfelScene& s = ctx.scene;
  const Vec3 p_cam = ctx.w2c.apply(s.center(i));
  const auto proj = try_project(ctx.cam, p_cam);
  if (!proj) return std::nullopt;

  const Mat3 r = quaternion_to_rotation(s.rotation(i));
  const Vec2 scale = s.scale(i);
  Eigen::Matrix<double, 3, 2> b;
  b.col(0) = r.col(0) * scale.x();
  b.col(1) = r.col(1) * scale.y();
  const Mat23 t = proj->jacobian * ctx.w2c.rotation;
  const Mat2 a = t * b;
  Mat2 cov = a * a.transpose();
  cov(0, 0) += ctx.settings.lowpass;
  cov(1, 1) += ctx.settings.lowpass;
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
  if (!(det > ctx.settings.min_determinant)) {
    singular = true;
    return std::nullopt;
  }

  ProjectedSurfel out;
  out.surfel = i;
  out.mean = proj->pixel;
  out.depth = proj->depth;
  out.p_cam = p_cam;
  out.jacobian = proj->jacobian;
  out.cov2d = cov;
  out.conic = Vec3(cov(1, 1) / det, -cov(0, 1) / det, cov(0, 0) / det);
  out.alpha = s.opacity(i);

  // Exact bounding box of the cutoff ellipse, padded against rounding at the boundary.
  const double k = ctx.settings.cutoff_sigma;
  const double rx = k * std::sqrt(cov(0, 0)) + 1e-9;
  const double ry = k * std::sqrt(cov(1, 1)) + 1e-9;
  const PixelWindow& w = ctx.window;
  const double lo_x = std::max(out.mean.x() - rx, static_cast<double>(w.x0));
  const double hi_x = std::min(out.mean.x() + rx, static_cast<double>(w.x0 + w.width - 1));
  const double lo_y = std::max(out.mean.y() - ry, static_cast<double>(w.y0));
  const double hi_y = std::min(out.mean.y() + ry, static_cast<double>(w.y0 + w.height - 1));
  if (!(lo_x <= hi_x && lo_y <= hi_y)) return std::nullopt;
  out.x_min = static_cast<int>(std::ceil(lo_x));
  out.x_max = static_cast<int>(std::floor(hi_x));
  out.y_min = static_cast<int>(std::ceil(lo_y));
  out.y_max = static_cast<int>(std::floor(hi_y));
  if (out.x_min > out.x_max || out.y_min > out.y_max) return std::nullopt;
  return out;
}

void project_all(const ProjectionContext& ctx, std::span<const std::uint32_t> culled,
                 std::vector<ProjectedSurfel>& projected, std::size_t& singular_count) {
  std::vector<std::optional<ProjectedSurfel>> slots(culled.size());
  std::vector<std::uint8_t> singular(culled.size(), 0);
  constexpr std::size_t kBlock = 1024;
  parallel_for((culled.size() + kBlock - 1) / kBlock, [&](std::size_t blk) {
    const std::size_t end = std::min(culled.size(), (blk + 1) * kBlock);
    for (std::size_t k = blk * kBlock; k < end; ++k) {
      bool sing = false;
      slots[k] = project_surfel(ctx, culled[k], sing);
      singular[k] = sing;
    }
  });
  projected.clear();
  singular_count = 0;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    singular_count += singular[k];
    if (slots[k]) projected.push_back(*slots[k]);
  }
  std::sort(projected.begin(), projected.end(), [](const ProjectedSurfel& a, const ProjectedSurfel& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.surfel < b.surfel;
  });
}

void allocate(RenderOutput& out, const PixelWindow& window, int class_count, const RenderSettings& settings) {
  const std::size_t n = window.pixel_count();
  out.window = window;
  out.class_count = class_count;
  out.raw_color.assign(3 * n, 0.0);
  out.color.assign(3 * n, 0.0);
  out.semantics.assign(n * class_count, 0.0);
  out.alpha_accum.assign(n, 0.0);
  out.transmittance.assign(n, 1.0);
  if (settings.render_elevation) {
    out.elevation.assign(n, 0.0);
  } else {
    out.elevation.clear();
  }
  if (settings.retain_contributions) {
    out.contributing.resize(n);
    for (auto& c : out.contributing) c.clear();
  } else {
    out.contributing.clear();
  }
}

// Front-to-back compositing of out.projected into out's buffers, band by band.
void composite(const SurfelScene& scene, const RenderSettings& settings, RenderOutput& out) {
  const PixelWindow& w = out.window;
  const int band_rows = std::max(1, settings.band_rows);
  out.band_rows = band_rows;
  const int bands = (w.height + band_rows - 1) / band_rows;
  out.band_slots.assign(static_cast<std::size_t>(bands), {});
  for (std::size_t slot = 0; slot < out.projected.size(); ++slot) {
    const auto& p = out.projected[slot];
    const int b0 = (p.y_min - w.y0) / band_rows;
    const int b1 = (p.y_max - w.y0) / band_rows;
    for (int b = b0; b <= b1; ++b) out.band_slots[b].push_back(static_cast<std::uint32_t>(slot));
  }

  const int C = out.class_count;
  const double cutoff2 = settings.cutoff_sigma * settings.cutoff_sigma;
  const double min_t = settings.min_transmittance;
  const bool retain = settings.retain_contributions;
  const bool elevation = settings.render_elevation;

  parallel_for(static_cast<std::size_t>(bands), [&](std::size_t b) {
    const int row0 = w.y0 + static_cast<int>(b) * band_rows;
    const int row1 = std::min(row0 + band_rows, w.y0 + w.height) - 1;
    const auto& slots = out.band_slots[b];
    for (std::size_t local = 0; local < slots.size(); ++local) {
      const auto& p = out.projected[slots[local]];
      const std::size_t i = p.surfel;
      const double* rgb = &scene.color[3 * i];
      const double* logits = C > 0 ? &scene.semantics[i * C] : nullptr;
      const double zi = scene.z[i];
      const int y_lo = std::max(p.y_min, row0), y_hi = std::min(p.y_max, row1);
      for (int y = y_lo; y <= y_hi; ++y) {
        const double dy = y - p.mean.y();
        for (int x = p.x_min; x <= p.x_max; ++x) {
          const std::size_t pix = static_cast<std::size_t>(y - w.y0) * w.width + (x - w.x0);
          const double t = out.transmittance[pix];
          if (t < min_t) continue;
          const double dx = x - p.mean.x();
          const double q = p.conic[0] * dx * dx + 2.0 * p.conic[1] * dx * dy + p.conic[2] * dy * dy;
          if (q > cutoff2) continue;
          const double g = std::exp(-0.5 * q);
          const double a = p.alpha * g;
          const double wgt = a * t;
          double* c = &out.raw_color[3 * pix];
          c[0] += wgt * rgb[0];
          c[1] += wgt * rgb[1];
          c[2] += wgt * rgb[2];
          double* s = C > 0 ? &out.semantics[pix * C] : nullptr;
          for (int k = 0; k < C; ++k) s[k] += wgt * logits[k];
          out.alpha_accum[pix] += wgt;
          if (elevation) out.elevation[pix] += wgt * zi;
          if (retain) {
            out.contributing[pix].push_back({slots[local], static_cast<std::uint32_t>(local), g, t});
          }
          out.transmittance[pix] = t * (1.0 - a);
        }
      }
    }
  });
}

void apply_exposure(RenderOutput& out) {
  const double gain = std::exp(out.exposure_a);
  for (std::size_t k = 0; k < out.raw_color.size(); ++k) out.color[k] = gain * out.raw_color[k] + out.exposure_b;
}

}  // namespace

void render_into(const SurfelScene& scene, const Pose& vehicle_pose, const CameraModel& cam,
                 std::span<const std::uint32_t> culled, const RenderSettings& settings, const PixelWindow& window,
                 RenderOutput& out) {
  if (window.width <= 0 || window.height <= 0) throw Error(ErrorCode::InputError, "empty render window");
  out.world_to_camera = world_to_camera_transform(vehicle_pose, cam);
  out.exposure_a = cam.exposure_a;
  out.exposure_b = cam.exposure_b;
  allocate(out, window, scene.class_count, settings);
  const ProjectionContext ctx{scene, cam, out.world_to_camera, settings, window};
  project_all(ctx, culled, out.projected, out.singular_count);
  composite(scene, settings, out);
  apply_exposure(out);
}

RenderOutput render(const SurfelScene& scene, const Pose& vehicle_pose, const CameraModel& cam,
                    std::span<const std::uint32_t> culled, const RenderSettings& settings) {
  RenderOutput out;
  render_into(scene, vehicle_pose, cam, culled, settings, PixelWindow::full(cam), out);
  return out;
}

namespace {

// Per-slot gradient layout inside a band: mean(2) conic(3) alpha(1) color(3) semantics(C).
constexpr int kMean = 0;
constexpr int kConic = 2;
constexpr int kAlpha = 5;
constexpr int kColor = 6;
constexpr int kSem = 9;

// d(R)/d(q) for the unit-quaternion rotation formula, q = (w, x, y, z).
std::array<Mat3, 4> rotation_derivatives(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  std::array<Mat3, 4> d;
  d[0] << 0, -z, y, z, 0, -x, -y, x, 0;
  d[1] << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
  d[2] << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
  d[3] << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
  for (auto& m : d) m *= 2.0;
  return d;
}

}  // namespace

void render_backward(const SurfelScene& scene, const CameraModel& cam, std::size_t camera_index,
                     const RenderOutput& output, std::span<const double> d_color, std::span<const double> d_sem,
                     GradientBuffer& grads) {
  const std::size_t npix = output.pixel_count();
  const int C = output.class_count;
  if (d_color.size() != 3 * npix) throw Error(ErrorCode::InputError, "d_color size mismatch");
  const bool has_sem = !d_sem.empty() && C > 0;
  if (has_sem && d_sem.size() != npix * C) throw Error(ErrorCode::InputError, "d_sem size mismatch");
  if (output.contributing.size() != npix) {
    throw Error(ErrorCode::InputError, "render output was produced without retained contributions");
  }
  if (grads.z.size() != scene.size()) throw Error(ErrorCode::InputError, "gradient buffer not sized for scene");

  const PixelWindow& w = output.window;
  const int stride = kSem + C;
  const std::size_t bands = output.band_slots.size();
  const int band_rows = output.band_rows;
  const double gain = std::exp(output.exposure_a);

  std::vector<std::vector<double>> partial(bands);
  std::vector<double> band_da(bands, 0.0), band_db(bands, 0.0);

  parallel_for(bands, [&](std::size_t b) {
    auto& part = partial[b];
    part.assign(output.band_slots[b].size() * stride, 0.0);
    std::vector<double> acc_s(C), d_s(C);
    const int row0 = static_cast<int>(b) * band_rows;
    const int row1 = std::min(row0 + band_rows, w.height);
    double da = 0.0, db = 0.0;
    for (int ry = row0; ry < row1; ++ry) {
      for (int rx = 0; rx < w.width; ++rx) {
        const std::size_t pix = static_cast<std::size_t>(ry) * w.width + rx;
        const double* dc = &d_color[3 * pix];
        for (int c = 0; c < 3; ++c) {
          da += gain * output.raw_color[3 * pix + c] * dc[c];
          db += dc[c];
        }
        const auto& contrib = output.contributing[pix];
        if (contrib.empty()) continue;
        const Vec3 d_raw(gain * dc[0], gain * dc[1], gain * dc[2]);
        if (has_sem) std::copy_n(&d_sem[pix * C], C, d_s.begin());
        Vec3 acc_c = Vec3::Zero();
        std::fill(acc_s.begin(), acc_s.end(), 0.0);
        const double px = rx + w.x0, py = ry + w.y0;
        for (auto it = contrib.rbegin(); it != contrib.rend(); ++it) {
          const auto& p = output.projected[it->slot];
          const std::size_t i = p.surfel;
          const double a = p.alpha * it->g;
          const double t = it->transmittance;
          const double wgt = a * t;
          double* g = &part[static_cast<std::size_t>(it->local) * stride];
          const Vec3 ci(scene.color[3 * i], scene.color[3 * i + 1], scene.color[3 * i + 2]);
          g[kColor] += wgt * d_raw[0];
          g[kColor + 1] += wgt * d_raw[1];
          g[kColor + 2] += wgt * d_raw[2];
          double d_a = t * (ci - acc_c).dot(d_raw);
          acc_c = a * ci + (1.0 - a) * acc_c;
          if (has_sem) {
            const double* li = &scene.semantics[i * C];
            for (int k = 0; k < C; ++k) {
              g[kSem + k] += wgt * d_s[k];
              d_a += t * (li[k] - acc_s[k]) * d_s[k];
              acc_s[k] = a * li[k] + (1.0 - a) * acc_s[k];
            }
          }
          g[kAlpha] += it->g * d_a;
          const double d_q = -0.5 * it->g * p.alpha * d_a;
          const double dx = px - p.mean.x(), dy = py - p.mean.y();
          g[kConic] += d_q * dx * dx;
          g[kConic + 1] += d_q * 2.0 * dx * dy;
          g[kConic + 2] += d_q * dy * dy;
          g[kMean] += d_q * -2.0 * (p.conic[0] * dx + p.conic[1] * dy);
          g[kMean + 1] += d_q * -2.0 * (p.conic[1] * dx + p.conic[2] * dy);
        }
      }
    }
    band_da[b] = da;
    band_db[b] = db;
  });

  // Merge band partials in band order so results do not depend on the thread count.
  const std::size_t nproj = output.projected.size();
  std::vector<double> per_slot(nproj * stride, 0.0);
  for (std::size_t b = 0; b < bands; ++b) {
    const auto& slots = output.band_slots[b];
    const auto& part = partial[b];
    for (std::size_t l = 0; l < slots.size(); ++l) {
      double* dst = &per_slot[static_cast<std::size_t>(slots[l]) * stride];
      const double* src = &part[l * stride];
      for (int k = 0; k < stride; ++k) dst[k] += src[k];
    }
  }
  double total_da = 0.0, total_db = 0.0;
  for (std::size_t b = 0; b < bands; ++b) {
    total_da += band_da[b];
    total_db += band_db[b];
  }
  grads.exposure_a.at(camera_index) += total_da;
  grads.exposure_b.at(camera_index) += total_db;

  const Mat3& rw = output.world_to_camera.rotation;
  const bool perspective = !cam.is_orthographic();
  parallel_for(nproj, [&](std::size_t slot) {
    const double* g = &per_slot[slot * stride];
    const auto& p = output.projected[slot];
    const std::size_t i = p.surfel;

    for (int c = 0; c < 3; ++c) grads.color[3 * i + c] += g[kColor + c];
    for (int k = 0; k < C; ++k) grads.semantics[i * C + k] += g[kSem + k];
    grads.opacity_logit[i] += g[kAlpha] * p.alpha * (1.0 - p.alpha);

    // Conic -> 2D covariance.
    Mat2 m;
    m << p.conic[0], p.conic[1], p.conic[1], p.conic[2];
    Mat2 g_conic;
    g_conic << g[kConic], 0.5 * g[kConic + 1], 0.5 * g[kConic + 1], g[kConic + 2];
    const Mat2 g_cov = -m * g_conic * m;

    // Covariance = A A^T + lowpass, A = T B, T = J Rw, B = [r0 sx, r1 sy].
    const Vec4 qraw = scene.rotation(i);
    const double qnorm = qraw.norm();
    const Vec4 qhat = qraw / qnorm;
    const Mat3 r = quaternion_to_rotation(qraw);
    const Vec2 s = scene.scale(i);
    Eigen::Matrix<double, 3, 2> bm;
    bm.col(0) = r.col(0) * s.x();
    bm.col(1) = r.col(1) * s.y();
    const Mat23 t = p.jacobian * rw;
    const Mat2 a = t * bm;
    const Mat2 g_a = 2.0 * g_cov * a;
    const Mat23 g_t = g_a * bm.transpose();
    const Eigen::Matrix<double, 3, 2> g_b = t.transpose() * g_a;

    grads.log_scale[2 * i] += r.col(0).dot(g_b.col(0)) * s.x();
    grads.log_scale[2 * i + 1] += r.col(1).dot(g_b.col(1)) * s.y();

    Mat3 g_r = Mat3::Zero();
    g_r.col(0) = g_b.col(0) * s.x();
    g_r.col(1) = g_b.col(1) * s.y();
    const auto dr = rotation_derivatives(qhat);
    Vec4 g_qhat;
    for (int c = 0; c < 4; ++c) g_qhat[c] = (g_r.array() * dr[c].array()).sum();
    const Vec4 g_q = (g_qhat - qhat * qhat.dot(g_qhat)) / qnorm;
    for (int c = 0; c < 4; ++c) grads.quaternion[4 * i + c] += g_q[c];

    // Mean and Jacobian -> camera-space position -> world z.
    const Mat23 g_j = g_t * rw.transpose();
    Vec3 g_pcam = p.jacobian.transpose() * Vec2(g[kMean], g[kMean + 1]);
    if (perspective) {
      const double x = p.p_cam.x(), y = p.p_cam.y(), z = p.p_cam.z();
      const double iz = 1.0 / z, iz2 = iz * iz, iz3 = iz2 * iz;
      g_pcam.x() += g_j(0, 2) * -cam.fx * iz2;
      g_pcam.y() += g_j(1, 2) * -cam.fy * iz2;
      g_pcam.z() += g_j(0, 0) * -cam.fx * iz2 + g_j(0, 2) * 2.0 * cam.fx * x * iz3 + g_j(1, 1) * -cam.fy * iz2 +
                    g_j(1, 2) * 2.0 * cam.fy * y * iz3;
    }
    grads.z[i] += rw.col(2).dot(g_pcam);
  });
}

BevGrid BevGrid::covering(const Lattice& lattice, double resolution) {
  BevGrid g;
  g.origin = lattice.origin;
  g.resolution = resolution;
  g.width = static_cast<int>(std::floor(lattice.extent_x() / resolution + 1e-9)) + 1;
  g.height = static_cast<int>(std::floor(lattice.extent_y() / resolution + 1e-9)) + 1;
  return g;
}

CameraModel bev_camera(const BevGrid& grid, double top_height) {
  CameraModel cam;
  cam.name = "bev";
  cam.kind = ProjectionKind::Orthographic;
  cam.ortho_scale = grid.resolution;
  cam.width = grid.width;
  cam.height = grid.height;
  cam.cx = 0.0;
  cam.cy = 0.0;
  cam.extrinsic.translation = Vec3(grid.origin.x(), grid.origin.y(), top_height);
  return cam;
}

BevMaps render_bev_chunked(const SurfelScene& scene, const BevGrid& grid, int chunk, const RenderSettings& settings) {
  if (grid.width <= 0 || grid.height <= 0) throw Error(ErrorCode::InputError, "empty BEV grid");
  if (chunk <= 0) throw Error(ErrorCode::InputError, "chunk size must be positive");

  double top = 0.0;
  for (double z : scene.z) top = std::max(top, z);
  const CameraModel cam = bev_camera(grid, top + 100.0);
  const Pose identity;

  RenderSettings tile_settings = settings;
  tile_settings.retain_contributions = false;
  tile_settings.render_elevation = true;

  // Project once over the whole grid; tiles reuse the global depth order.
  const WorldToCamera w2c = world_to_camera_transform(identity, cam);
  const PixelWindow full = PixelWindow::full(cam);
  const ProjectionContext ctx{scene, cam, w2c, tile_settings, full};
  std::vector<ProjectedSurfel> projected;
  std::size_t singular = 0;
  const auto indices = all_surfels(scene);
  project_all(ctx, indices, projected, singular);

  BevMaps maps;
  maps.grid = grid;
  maps.rgb = ImageD(grid.width, grid.height, 3, 0.0);
  maps.labels = LabelImage(grid.width, grid.height, 1, -1);
  maps.elevation = ImageD(grid.width, grid.height, 1, std::numeric_limits<double>::quiet_NaN());
  maps.alpha = ImageD(grid.width, grid.height, 1, 0.0);

  const int C = scene.class_count;
  RenderOutput out;
  for (int ty = 0; ty < grid.height; ty += chunk) {
    for (int tx = 0; tx < grid.width; tx += chunk) {
      const PixelWindow win{tx, ty, std::min(chunk, grid.width - tx), std::min(chunk, grid.height - ty)};
      out.world_to_camera = w2c;
      out.exposure_a = 0.0;
      out.exposure_b = 0.0;
      allocate(out, win, C, tile_settings);
      out.projected.clear();
      for (const auto& p : projected) {
        if (p.x_max < win.x0 || p.x_min > win.x0 + win.width - 1) continue;
        if (p.y_max < win.y0 || p.y_min > win.y0 + win.height - 1) continue;
        ProjectedSurfel q = p;
        q.x_min = std::max(q.x_min, win.x0);
        q.x_max = std::min(q.x_max, win.x0 + win.width - 1);
        q.y_min = std::max(q.y_min, win.y0);
        q.y_max = std::min(q.y_max, win.y0 + win.height - 1);
        out.projected.push_back(q);
      }
      composite(scene, tile_settings, out);

      for (int y = 0; y < win.height; ++y) {
        for (int x = 0; x < win.width; ++x) {
          const std::size_t pix = static_cast<std::size_t>(y) * win.width + x;
          const int gx = win.x0 + x, gy = win.y0 + y;
          for (int c = 0; c < 3; ++c) maps.rgb(gx, gy, c) = out.raw_color[3 * pix + c];
          const double acc = out.alpha_accum[pix];
          maps.alpha(gx, gy) = acc;
          if (acc > 0.0) {
            maps.elevation(gx, gy) = out.elevation[pix] / acc;
            if (C > 0) {
              const double* s = &out.semantics[pix * C];
              maps.labels(gx, gy) = static_cast<int>(std::max_element(s, s + C) - s);
            }
          }
        }
      }
    }
  }
  return maps;
}

}  // namespace gsroad
