#include "gsroad/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "gsroad/error.hpp"
#include "gsroad/io.hpp"
#include "gsroad/spatial_index.hpp"

namespace gsroad {

using nlohmann::json;

double psnr(const ImageD& pred, const ImageD& gt, const ImageU8& mask) {
  if (!pred.same_shape(gt.width, gt.height) || pred.channels != gt.channels || !mask.same_shape(gt.width, gt.height)) {
    throw Error(ErrorCode::InputError, "psnr: image shapes differ");
  }
  double sum = 0.0;
  std::size_t n = 0;
  const int ch = gt.channels;
  for (std::size_t p = 0; p < gt.pixel_count(); ++p) {
    if (!mask.data[p]) continue;
    for (int c = 0; c < ch; ++c) {
      const double d = pred.data[p * ch + c] - gt.data[p * ch + c];
      sum += d * d;
    }
    n += ch;
  }
  if (n == 0) throw Error(ErrorCode::EmptyMask, "psnr: no masked pixels");
  const double mse = sum / static_cast<double>(n);
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double miou(const LabelImage& pred, const LabelImage& gt, const ImageU8& mask, int class_count) {
  if (!pred.same_shape(gt.width, gt.height) || !mask.same_shape(gt.width, gt.height)) {
    throw Error(ErrorCode::InputError, "miou: label map shapes differ");
  }
  std::vector<std::size_t> inter(class_count, 0), pred_n(class_count, 0), gt_n(class_count, 0);
  std::size_t n = 0;
  for (std::size_t p = 0; p < gt.pixel_count(); ++p) {
    if (!mask.data[p]) continue;
    ++n;
    const int g = gt.data[p], q = pred.data[p];
    if (g < 0 || g >= class_count) {
      throw Error(ErrorCode::InputError, "miou: ground-truth label " + std::to_string(g) + " outside class range");
    }
    ++gt_n[g];
    if (q >= 0 && q < class_count) {
      ++pred_n[q];
      if (q == g) ++inter[g];
    }
  }
  if (n == 0) throw Error(ErrorCode::EmptyMask, "miou: no masked pixels");
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < class_count; ++c) {
    if (gt_n[c] == 0) continue;
    ++present;
    sum += static_cast<double>(inter[c]) / static_cast<double>(gt_n[c] + pred_n[c] - inter[c]);
  }
  return sum / present;
}

ElevationScore elevation_rmse(const SurfelScene& scene, std::span<const Vec3> gt_points, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InputError, "elevation radius must be positive");
  ElevationScore out;
  if (gt_points.empty() || scene.empty()) throw Error(ErrorCode::NoMatches, "no ground-truth points or no surfels");
  std::vector<Vec2> xy;
  xy.reserve(gt_points.size());
  for (const auto& p : gt_points) xy.push_back(p.head<2>());
  const GridIndex2D index(xy, radius);
  double sum = 0.0;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const auto hit = index.nearest_within(Vec2(scene.x[i], scene.y[i]), radius);
    if (!hit) continue;
    const double d = scene.z[i] - gt_points[*hit].z();
    sum += d * d;
    ++out.matched;
  }
  if (out.matched == 0) throw Error(ErrorCode::NoMatches, "no surfel has a ground-truth point within radius");
  out.rmse = std::sqrt(sum / static_cast<double>(out.matched));
  out.matched_fraction = static_cast<double>(out.matched) / static_cast<double>(scene.size());
  return out;
}

namespace {

int mode_label(const std::map<int, int>& counts) {
  int best = -1, best_n = 0;
  for (const auto& [label, n] : counts) {  // ascending ids, so ties keep the lowest
    if (n > best_n) {
      best = label;
      best_n = n;
    }
  }
  return best;
}

}  // namespace

GroundTruthBev build_gt(const SceneData& data, const BevGrid& grid, double max_gap) {
  if (!data.frames) throw Error(ErrorCode::InputError, "build_gt needs camera frames");
  const std::size_t npix = static_cast<std::size_t>(grid.width) * grid.height;
  std::vector<Vec3> color_sum(npix, Vec3::Zero());
  std::vector<int> color_n(npix, 0);
  std::vector<std::map<int, int>> label_counts(npix);

  GroundTruthBev gt;
  gt.grid = grid;
  for (const auto& sweep : data.sweeps) {
    const std::size_t k = associate_timestamp(data.poses, sweep.timestamp, max_gap);
    const Pose& pose = data.poses[k];
    std::vector<LabeledImage> images;
    for (std::size_t c = 0; c < data.cameras.size(); ++c) {
      images.push_back(data.frames->load(data.frame_index(k, static_cast<int>(c))));
    }
    for (const auto& local : sweep.points) {
      const Vec3 pw = pose.apply(local);
      Vec3 sum = Vec3::Zero();
      int seen = 0;
      std::map<int, int> votes;
      for (std::size_t c = 0; c < data.cameras.size(); ++c) {
        const CameraModel& cam = data.cameras[c];
        const auto proj = try_project(cam, world_to_camera(pose, cam, pw));
        if (!proj) continue;
        const int u = static_cast<int>(std::lround(proj->pixel.x()));
        const int v = static_cast<int>(std::lround(proj->pixel.y()));
        if (u < 0 || v < 0 || u >= cam.width || v >= cam.height) continue;
        const LabeledImage& img = images[c];
        for (int ch = 0; ch < 3; ++ch) sum[ch] += img.rgb(u, v, ch);
        ++votes[img.labels(u, v)];
        ++seen;
      }
      if (seen == 0) continue;
      const int label = mode_label(votes);
      if (std::find(data.road_classes.begin(), data.road_classes.end(), label) == data.road_classes.end()) continue;
      const Vec3 color = sum / seen;
      gt.elevation_points.push_back(pw);
      const int i = static_cast<int>(std::lround((pw.x() - grid.origin.x()) / grid.resolution));
      const int j = static_cast<int>(std::lround((pw.y() - grid.origin.y()) / grid.resolution));
      if (i < 0 || j < 0 || i >= grid.width || j >= grid.height) continue;
      const std::size_t p = static_cast<std::size_t>(j) * grid.width + i;
      color_sum[p] += color;
      ++color_n[p];
      ++label_counts[p][label];
    }
  }

  gt.rgb = ImageD(grid.width, grid.height, 3, 0.0);
  gt.labels = LabelImage(grid.width, grid.height, 1, -1);
  gt.valid = ImageU8(grid.width, grid.height, 1, 0);
  for (std::size_t p = 0; p < npix; ++p) {
    if (color_n[p] == 0) continue;
    const Vec3 c = color_sum[p] / color_n[p];
    for (int ch = 0; ch < 3; ++ch) gt.rgb.data[3 * p + ch] = c[ch];
    gt.labels.data[p] = mode_label(label_counts[p]);
    gt.valid.data[p] = 1;
  }
  return gt;
}

void write_analytic_gt(const std::filesystem::path& dir, const GroundTruthBev& gt,
                       const std::vector<ClassInfo>& palette) {
  std::filesystem::create_directories(dir);
  const BevGrid& g = gt.grid;
  json meta = {{"origin", {g.origin.x(), g.origin.y()}},
               {"resolution", g.resolution},
               {"width", g.width},
               {"height", g.height},
               {"label_invalid", 255},
               {"elevation", "elevation.f32"}};
  json classes = json::array();
  for (const auto& c : palette) classes.push_back({{"id", c.id}, {"name", c.name}});
  meta["classes"] = classes;
  write_text(dir / "meta.json", meta.dump(2) + "\n");
  write_png(dir / "rgb.png", quantize(gt.rgb));
  ImageU8 labels(g.width, g.height, 1), valid(g.width, g.height, 1);
  for (std::size_t p = 0; p < labels.data.size(); ++p) {
    const int l = gt.labels.data[p];
    labels.data[p] = static_cast<std::uint8_t>(l < 0 || l > 254 ? 255 : l);
    valid.data[p] = gt.valid.data[p] ? 255 : 0;
  }
  write_png(dir / "labels.png", labels);
  write_png(dir / "valid.png", valid);
  ImageD elevation(g.width, g.height, 1, std::numeric_limits<double>::quiet_NaN());
  for (const auto& p : gt.elevation_points) {
    const int i = static_cast<int>(std::lround((p.x() - g.origin.x()) / g.resolution));
    const int j = static_cast<int>(std::lround((p.y() - g.origin.y()) / g.resolution));
    if (i >= 0 && j >= 0 && i < g.width && j < g.height) elevation(i, j) = p.z();
  }
  write_float_grid(dir / "elevation.f32", elevation);
}

GroundTruthBev load_analytic_gt(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "meta.json")) {
    throw Error(ErrorCode::MissingGT, "no analytic ground truth at " + dir.string());
  }
  GroundTruthBev gt;
  try {
    const json meta = json::parse(read_text(dir / "meta.json"));
    gt.grid.origin = Vec2(meta.at("origin").at(0).get<double>(), meta.at("origin").at(1).get<double>());
    gt.grid.resolution = meta.at("resolution").get<double>();
    gt.grid.width = meta.at("width").get<int>();
    gt.grid.height = meta.at("height").get<int>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InputError, "analytic_gt/meta.json: " + std::string(e.what()));
  }
  const BevGrid& g = gt.grid;
  const ImageU8 rgb = read_png(dir / "rgb.png");
  const ImageU8 labels = read_png(dir / "labels.png");
  const ImageU8 valid = read_png(dir / "valid.png");
  if (!rgb.same_shape(g.width, g.height) || rgb.channels != 3 || !labels.same_shape(g.width, g.height) ||
      !valid.same_shape(g.width, g.height)) {
    throw Error(ErrorCode::InputError, "analytic ground-truth layers do not match meta.json");
  }
  gt.rgb = ImageD(g.width, g.height, 3);
  for (std::size_t i = 0; i < rgb.data.size(); ++i) gt.rgb.data[i] = rgb.data[i] / 255.0;
  gt.labels = LabelImage(g.width, g.height, 1);
  gt.valid = ImageU8(g.width, g.height, 1);
  for (std::size_t p = 0; p < labels.data.size(); ++p) {
    gt.labels.data[p] = labels.data[p] == 255 ? -1 : labels.data[p];
    gt.valid.data[p] = valid.data[p] != 0;
  }
  const ImageD elevation = read_float_grid(dir / "elevation.f32", g.width, g.height);
  for (int j = 0; j < g.height; ++j) {
    for (int i = 0; i < g.width; ++i) {
      const double z = elevation(i, j);
      if (gt.valid(i, j) && std::isfinite(z)) gt.elevation_points.push_back(Vec3(g.pixel_center(i, j).x(), g.pixel_center(i, j).y(), z));
    }
  }
  return gt;
}

SceneMetrics evaluate_scene(const SurfelScene& scene, const GroundTruthBev& gt, double elevation_radius, int chunk) {
  SceneMetrics m;
  const BevMaps maps = render_bev_chunked(scene, gt.grid, chunk);
  m.psnr = psnr(maps.rgb, gt.rgb, gt.valid);
  m.miou = miou(maps.labels, gt.labels, gt.valid, std::max(scene.class_count, 1));
  const auto elev = elevation_rmse(scene, gt.elevation_points, elevation_radius);
  m.elevation_rmse = elev.rmse;
  m.matched_fraction = elev.matched_fraction;
  std::size_t valid = 0, covered = 0;
  for (std::size_t p = 0; p < gt.valid.data.size(); ++p) {
    if (!gt.valid.data[p]) continue;
    ++valid;
    covered += maps.alpha.data[p] > 0.5;
  }
  m.coverage = valid ? static_cast<double>(covered) / static_cast<double>(valid) : 0.0;
  return m;
}

}  // namespace gsroad
