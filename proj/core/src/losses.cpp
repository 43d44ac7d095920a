#include "gsroad/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gsroad/error.hpp"
#include "gsroad/spatial_index.hpp"

namespace gsroad {
namespace {

std::size_t count_mask(const ImageU8& mask) {
  std::size_t n = 0;
  for (auto m : mask.data) n += m != 0;
  return n;
}

void check_shape(const ImageU8& mask, int width, int height, const char* what) {
  if (!mask.same_shape(width, height)) {
    throw Error(ErrorCode::InputError, std::string(what) + ": mask size does not match the target");
  }
}

}  // namespace

double color_loss(std::span<const double> rendered, const ImageF& target, const ImageU8& mask, std::span<double> grad) {
  check_shape(mask, target.width, target.height, "color_loss");
  const std::size_t npix = target.pixel_count();
  if (target.channels != 3 || rendered.size() != 3 * npix) {
    throw Error(ErrorCode::InputError, "color_loss: rendered and target shapes differ");
  }
  if (!grad.empty() && grad.size() != rendered.size()) throw Error(ErrorCode::InputError, "color_loss: bad grad size");
  const std::size_t m = count_mask(mask);
  if (m == 0) throw Error(ErrorCode::EmptyMask, "color_loss: no masked pixels");

  const double norm = 1.0 / (3.0 * static_cast<double>(m));
  double sum = 0.0;
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t p = 0; p < npix; ++p) {
    if (!mask.data[p]) continue;
    for (int c = 0; c < 3; ++c) {
      const double d = rendered[3 * p + c] - static_cast<double>(target.data[3 * p + c]);
      sum += std::abs(d);
      if (!grad.empty()) grad[3 * p + c] = d > 0 ? norm : (d < 0 ? -norm : 0.0);
    }
  }
  return sum * norm;
}

double semantic_loss(std::span<const double> logits, int class_count, const LabelImage& labels, const ImageU8& mask,
                     std::span<double> grad) {
  check_shape(mask, labels.width, labels.height, "semantic_loss");
  const std::size_t npix = labels.pixel_count();
  const auto C = static_cast<std::size_t>(class_count);
  if (class_count < 1 || logits.size() != npix * C) {
    throw Error(ErrorCode::InputError, "semantic_loss: logits shape does not match labels and class count");
  }
  if (!grad.empty() && grad.size() != logits.size()) throw Error(ErrorCode::InputError, "semantic_loss: bad grad size");
  const std::size_t m = count_mask(mask);
  if (m == 0) throw Error(ErrorCode::EmptyMask, "semantic_loss: no masked pixels");

  const double norm = 1.0 / static_cast<double>(m);
  double sum = 0.0;
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t p = 0; p < npix; ++p) {
    if (!mask.data[p]) continue;
    const int label = labels.data[p];
    if (label < 0 || label >= class_count) {
      throw Error(ErrorCode::InputError, "semantic_loss: label " + std::to_string(label) + " outside class range");
    }
    const double* l = &logits[p * C];
    const double mx = *std::max_element(l, l + C);
    double z = 0.0;
    for (std::size_t k = 0; k < C; ++k) z += std::exp(l[k] - mx);
    const double log_z = mx + std::log(z);
    sum += log_z - l[label];
    if (!grad.empty()) {
      for (std::size_t k = 0; k < C; ++k) {
        const double pk = std::exp(l[k] - log_z);
        grad[p * C + k] = (pk - (static_cast<int>(k) == label ? 1.0 : 0.0)) * norm;
      }
    }
  }
  return sum * norm;
}

NeighborTable NeighborTable::build(const SurfelScene& scene) {
  NeighborTable t;
  for (std::size_t d = 0; d < kAllDirections.size(); ++d) t.index[d] = neighbor_indices(scene, kAllDirections[d]);
  return t;
}

double smooth_loss(std::span<const double> z, const NeighborTable& neighbors, std::span<double> grad_z) {
  constexpr double kK = 4.0;
  for (const auto& n : neighbors.index) {
    if (n.size() != z.size()) throw Error(ErrorCode::InputError, "smooth_loss: neighbor table does not match scene");
  }
  if (!grad_z.empty() && grad_z.size() != z.size()) throw Error(ErrorCode::InputError, "smooth_loss: bad grad size");
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    for (const auto& n : neighbors.index) {
      const auto j = static_cast<std::size_t>(n[i]);
      const double d = z[i] - z[j];
      sum += d * d;
      if (!grad_z.empty()) {
        grad_z[i] += 2.0 * d / kK;
        grad_z[j] -= 2.0 * d / kK;
      }
    }
  }
  return sum / kK;
}

ElevationTargets ElevationTargets::build(const SurfelScene& scene, const PointCloud& cloud, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InputError, "elevation match radius must be positive");
  ElevationTargets t;
  t.target.assign(scene.size(), std::numeric_limits<double>::quiet_NaN());
  t.matched.assign(scene.size(), 0);
  if (cloud.points.empty()) return t;
  std::vector<Vec2> xy;
  xy.reserve(cloud.size());
  for (const auto& p : cloud.points) xy.push_back(p.head<2>());
  const GridIndex2D index(xy, radius);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const auto hit = index.nearest_within(Vec2(scene.x[i], scene.y[i]), radius);
    if (!hit) continue;
    t.target[i] = cloud.points[*hit].z();
    t.matched[i] = 1;
    ++t.matched_count;
  }
  return t;
}

double elevation_loss(std::span<const double> z, const ElevationTargets& targets, std::span<double> grad_z) {
  if (targets.target.size() != z.size()) throw Error(ErrorCode::InputError, "elevation_loss: targets do not match scene");
  if (!grad_z.empty() && grad_z.size() != z.size()) throw Error(ErrorCode::InputError, "elevation_loss: bad grad size");
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!targets.matched[i]) continue;
    const double d = z[i] - targets.target[i];
    sum += d * d;
    if (!grad_z.empty()) grad_z[i] += 2.0 * d;
  }
  return sum;
}

double elevation_loss(const SurfelScene& scene, const PointCloud& cloud, double radius) {
  return elevation_loss(scene.z, ElevationTargets::build(scene, cloud, radius), {});
}

LossWeights effective_weights(const LossWeights& weights, bool use_lidar) {
  return use_lidar ? weights.with_lidar() : weights;
}

double total_loss(const LossParts& parts, const LossWeights& weights, bool use_lidar) {
  const std::pair<const char*, double> named[] = {
      {"color", parts.color}, {"semantic", parts.semantic}, {"smooth", parts.smooth}, {"elevation", parts.elevation}};
  for (const auto& [name, v] : named) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteLoss, std::string(name) + " loss is " + std::to_string(v));
  }
  const LossWeights w = effective_weights(weights, use_lidar);
  double total = w.lambda_c * parts.color + w.lambda_s * parts.semantic + w.lambda_smooth * parts.smooth;
  if (use_lidar) total += w.lambda_z * parts.elevation;
  return total;
}

}  // namespace gsroad
