#include "gsroad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gsroad/error.hpp"
#include "gsroad/io.hpp"
#include "gsroad/parallel.hpp"

namespace gsroad {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

[[noreturn]] void invalid(const std::string& field, const std::string& reason, int line = 0) {
  std::string where = line > 0 ? "line " + std::to_string(line) + ": " : std::string();
  throw Error(ErrorCode::InvalidSpec, where + "field '" + field + "': " + reason);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, const std::string& field, int line) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) invalid(field, "not a finite number: '" + v + "'", line);
    return d;
  } catch (const std::logic_error&) {
    invalid(field, "not a number: '" + v + "'", line);
  }
}

long long parse_int(const std::string& v, const std::string& field, int line) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) invalid(field, "not an integer: '" + v + "'", line);
    return i;
  } catch (const std::logic_error&) {
    invalid(field, "not an integer: '" + v + "'", line);
  }
}

bool parse_bool(const std::string& v, const std::string& field, int line) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  invalid(field, "expected true or false, got '" + v + "'", line);
}

const char* surface_name(SurfaceKind k) {
  switch (k) {
    case SurfaceKind::Plane: return "plane";
    case SurfaceKind::Inclined: return "inclined";
    case SurfaceKind::Bumps: return "bumps";
    case SurfaceKind::Crowned: return "crowned";
  }
  return "plane";
}

const char* trajectory_name(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::Straight: return "straight";
    case TrajectoryKind::Arc: return "arc";
    case TrajectoryKind::SCurve: return "s_curve";
  }
  return "straight";
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double lattice_value(std::uint64_t seed, std::uint64_t channel, std::int64_t ix, std::int64_t iy) {
  std::uint64_t h = splitmix(seed ^ splitmix(channel));
  h = splitmix(h ^ static_cast<std::uint64_t>(ix));
  h = splitmix(h ^ static_cast<std::uint64_t>(iy));
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

}  // namespace

void SyntheticSpec::validate() const {
  auto positive = [](double v, const char* f) {
    if (!(v > 0.0)) invalid(f, "must be positive");
  };
  positive(length, "length");
  positive(speed, "speed");
  positive(frame_rate, "frame_rate");
  positive(road_half_width, "road_half_width");
  positive(line_width, "line_width");
  positive(dash_length, "dash_length");
  positive(zebra_stripe, "zebra_stripe");
  positive(noise_cell, "noise_cell");
  positive(camera_height, "camera_height");
  positive(gt_resolution, "gt_resolution");
  positive(gt_max_range, "gt_max_range");
  if (dash_gap < 0.0) invalid("dash_gap", "must be non-negative");
  if (dash_phase < 0.0) invalid("dash_phase", "must be non-negative");
  if (zebra_length < 0.0) invalid("zebra_length", "must be non-negative");
  if (texture_noise < 0.0 || texture_noise > 0.2) invalid("texture_noise", "must be in [0, 0.2]");
  if (edge_line_offset < 0.0 || edge_line_offset + line_width >= road_half_width) {
    invalid("edge_line_offset", "edge line must lie inside the road");
  }
  if (surface == SurfaceKind::Bumps) {
    positive(bump_wavelength, "bump_wavelength");
    if (bump_amplitude < 0.0) invalid("bump_amplitude", "must be non-negative");
  }
  if (surface == SurfaceKind::Crowned && crown < 0.0) invalid("crown", "must be non-negative");
  if (trajectory == TrajectoryKind::Arc) {
    positive(arc_radius, "arc_radius");
    if (length >= kPi * arc_radius) invalid("arc_radius", "arc longer than a half circle");
  }
  if (trajectory == TrajectoryKind::SCurve) positive(s_period, "s_period");
  if (camera_count < 1 || camera_count > 6) invalid("camera_count", "must be in [1, 6]");
  if (fov_deg <= 10.0 || fov_deg >= 170.0) invalid("fov_deg", "must be in (10, 170)");
  if (image_width < 8 || image_height < 8) invalid("image_width", "images must be at least 8x8");
  if (supersample < 1 || supersample > 8) invalid("supersample", "must be in [1, 8]");
  if (camera_pitch_deg < 0.0 || camera_pitch_deg > 80.0) invalid("camera_pitch_deg", "must be in [0, 80]");
  if (!exposure.empty() && static_cast<int>(exposure.size()) != camera_count) {
    invalid("exposure", "needs one a,b pair per camera");
  }
  if (exposure_a_range < 0.0 || exposure_b_range < 0.0) invalid("exposure_a_range", "ranges must be non-negative");
  if (lidar) {
    positive(lidar_density, "lidar_density");
    positive(lidar_range, "lidar_range");
    if (lidar_noise < 0.0) invalid("lidar_noise", "must be non-negative");
  }
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  SyntheticSpec spec;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string content = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) invalid(content, "expected 'key = value'", line);
    const std::string key = trim(content.substr(0, eq));
    const std::string v = trim(content.substr(eq + 1));
    if (v.empty()) invalid(key, "missing value", line);
    auto num = [&] { return parse_double(v, key, line); };
    auto integer = [&] { return static_cast<int>(parse_int(v, key, line)); };

    if (key == "name") spec.name = v;
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(parse_int(v, key, line));
    else if (key == "surface") {
      if (v == "plane") spec.surface = SurfaceKind::Plane;
      else if (v == "inclined") spec.surface = SurfaceKind::Inclined;
      else if (v == "bumps") spec.surface = SurfaceKind::Bumps;
      else if (v == "crowned") spec.surface = SurfaceKind::Crowned;
      else invalid(key, "unknown surface '" + v + "'", line);
    } else if (key == "base_height") spec.base_height = num();
    else if (key == "slope_x") spec.slope_x = num();
    else if (key == "slope_y") spec.slope_y = num();
    else if (key == "bump_amplitude") spec.bump_amplitude = num();
    else if (key == "bump_wavelength") spec.bump_wavelength = num();
    else if (key == "crown") spec.crown = num();
    else if (key == "crown_center") spec.crown_center = num();
    else if (key == "trajectory") {
      if (v == "straight") spec.trajectory = TrajectoryKind::Straight;
      else if (v == "arc") spec.trajectory = TrajectoryKind::Arc;
      else if (v == "s_curve") spec.trajectory = TrajectoryKind::SCurve;
      else invalid(key, "unknown trajectory '" + v + "'", line);
    } else if (key == "length") spec.length = num();
    else if (key == "speed") spec.speed = num();
    else if (key == "frame_rate") spec.frame_rate = num();
    else if (key == "heading_deg") spec.heading_deg = num();
    else if (key == "start_x") spec.start_x = num();
    else if (key == "start_y") spec.start_y = num();
    else if (key == "arc_radius") spec.arc_radius = num();
    else if (key == "s_amplitude") spec.s_amplitude = num();
    else if (key == "s_period") spec.s_period = num();
    else if (key == "road_half_width") spec.road_half_width = num();
    else if (key == "edge_line_offset") spec.edge_line_offset = num();
    else if (key == "line_width") spec.line_width = num();
    else if (key == "dash_length") spec.dash_length = num();
    else if (key == "dash_gap") spec.dash_gap = num();
    else if (key == "dash_phase") spec.dash_phase = num();
    else if (key == "zebra_start") spec.zebra_start = num();
    else if (key == "zebra_length") spec.zebra_length = num();
    else if (key == "zebra_stripe") spec.zebra_stripe = num();
    else if (key == "texture_noise") spec.texture_noise = num();
    else if (key == "noise_cell") spec.noise_cell = num();
    else if (key == "camera_count") spec.camera_count = integer();
    else if (key == "fov_deg") spec.fov_deg = num();
    else if (key == "image_width") spec.image_width = integer();
    else if (key == "image_height") spec.image_height = integer();
    else if (key == "camera_height") spec.camera_height = num();
    else if (key == "camera_pitch_deg") spec.camera_pitch_deg = num();
    else if (key == "supersample") spec.supersample = integer();
    else if (key == "exposure") {
      spec.exposure.clear();
      std::istringstream pairs(v);
      std::string pair;
      while (std::getline(pairs, pair, ';')) {
        pair = trim(pair);
        if (pair.empty()) continue;
        const auto comma = pair.find(',');
        if (comma == std::string::npos) invalid(key, "expected 'a,b' pairs separated by ';'", line);
        spec.exposure.emplace_back(parse_double(trim(pair.substr(0, comma)), key, line),
                                   parse_double(trim(pair.substr(comma + 1)), key, line));
      }
    } else if (key == "random_exposure") spec.random_exposure = parse_bool(v, key, line);
    else if (key == "exposure_a_range") spec.exposure_a_range = num();
    else if (key == "exposure_b_range") spec.exposure_b_range = num();
    else if (key == "lidar") spec.lidar = parse_bool(v, key, line);
    else if (key == "lidar_density") spec.lidar_density = num();
    else if (key == "lidar_noise") spec.lidar_noise = num();
    else if (key == "lidar_range") spec.lidar_range = num();
    else if (key == "gt_resolution") spec.gt_resolution = num();
    else if (key == "gt_max_range") spec.gt_max_range = num();
    else invalid(key, "unknown key", line);
  }
  spec.validate();
  return spec;
}

std::string format_synthetic_spec(const SyntheticSpec& s) {
  std::ostringstream o;
  o.precision(17);
  o << "name = " << s.name << "\n"
    << "seed = " << s.seed << "\n"
    << "surface = " << surface_name(s.surface) << "\n"
    << "base_height = " << s.base_height << "\n"
    << "slope_x = " << s.slope_x << "\n"
    << "slope_y = " << s.slope_y << "\n"
    << "bump_amplitude = " << s.bump_amplitude << "\n"
    << "bump_wavelength = " << s.bump_wavelength << "\n"
    << "crown = " << s.crown << "\n"
    << "crown_center = " << s.crown_center << "\n"
    << "trajectory = " << trajectory_name(s.trajectory) << "\n"
    << "length = " << s.length << "\n"
    << "speed = " << s.speed << "\n"
    << "frame_rate = " << s.frame_rate << "\n"
    << "heading_deg = " << s.heading_deg << "\n"
    << "start_x = " << s.start_x << "\n"
    << "start_y = " << s.start_y << "\n"
    << "arc_radius = " << s.arc_radius << "\n"
    << "s_amplitude = " << s.s_amplitude << "\n"
    << "s_period = " << s.s_period << "\n"
    << "road_half_width = " << s.road_half_width << "\n"
    << "edge_line_offset = " << s.edge_line_offset << "\n"
    << "line_width = " << s.line_width << "\n"
    << "dash_length = " << s.dash_length << "\n"
    << "dash_gap = " << s.dash_gap << "\n"
    << "dash_phase = " << s.dash_phase << "\n"
    << "zebra_start = " << s.zebra_start << "\n"
    << "zebra_length = " << s.zebra_length << "\n"
    << "zebra_stripe = " << s.zebra_stripe << "\n"
    << "texture_noise = " << s.texture_noise << "\n"
    << "noise_cell = " << s.noise_cell << "\n"
    << "camera_count = " << s.camera_count << "\n"
    << "fov_deg = " << s.fov_deg << "\n"
    << "image_width = " << s.image_width << "\n"
    << "image_height = " << s.image_height << "\n"
    << "camera_height = " << s.camera_height << "\n"
    << "camera_pitch_deg = " << s.camera_pitch_deg << "\n"
    << "supersample = " << s.supersample << "\n";
  if (!s.exposure.empty()) {
    o << "exposure = ";
    for (std::size_t i = 0; i < s.exposure.size(); ++i) {
      o << (i ? "; " : "") << s.exposure[i].first << "," << s.exposure[i].second;
    }
    o << "\n";
  }
  o << "random_exposure = " << (s.random_exposure ? "true" : "false") << "\n"
    << "exposure_a_range = " << s.exposure_a_range << "\n"
    << "exposure_b_range = " << s.exposure_b_range << "\n"
    << "lidar = " << (s.lidar ? "true" : "false") << "\n"
    << "lidar_density = " << s.lidar_density << "\n"
    << "lidar_noise = " << s.lidar_noise << "\n"
    << "lidar_range = " << s.lidar_range << "\n"
    << "gt_resolution = " << s.gt_resolution << "\n"
    << "gt_max_range = " << s.gt_max_range << "\n";
  return o.str();
}

// ---------------------------------------------------------------------------------------------
// World

SyntheticWorld::SyntheticWorld(const SyntheticSpec& spec) : spec_(spec) {
  spec_.validate();
  start_ = Vec2(spec_.start_x, spec_.start_y);
  heading_ = Vec2(std::cos(spec_.heading_deg * kDeg), std::sin(spec_.heading_deg * kDeg));
  left_ = Vec2(-heading_.y(), heading_.x());

  const double margin = 40.0;
  for (double s = -margin; s <= spec_.length + margin; s += step_) {
    const auto [p, t] = path(s);
    centerline_.push_back(p);
    tangent_.push_back(t);
    arclen_.push_back(s);
  }
  index_ = GridIndex2D(centerline_, 0.5);

  switch (spec_.surface) {
    case SurfaceKind::Plane: slope_bound_ = 0.0; break;
    case SurfaceKind::Inclined: slope_bound_ = std::hypot(spec_.slope_x, spec_.slope_y); break;
    case SurfaceKind::Bumps:
      slope_bound_ = spec_.bump_amplitude * 2.0 * kPi / spec_.bump_wavelength * std::sqrt(2.0);
      break;
    case SurfaceKind::Crowned: {
      double dy = 0.0;
      for (const auto& p : centerline_) dy = std::max(dy, std::abs(p.y() - spec_.crown_center));
      slope_bound_ = 2.0 * spec_.crown * (dy + 100.0);
      break;
    }
  }
}

std::pair<Vec2, Vec2> SyntheticWorld::path(double s) const {
  switch (spec_.trajectory) {
    case TrajectoryKind::Straight:
      return {start_ + s * heading_, heading_};
    case TrajectoryKind::Arc: {
      const double r = spec_.arc_radius;
      const double phi = s / r;
      const Vec2 c = start_ + r * left_;
      return {c + r * (std::sin(phi) * heading_ - std::cos(phi) * left_),
              std::cos(phi) * heading_ + std::sin(phi) * left_};
    }
    case TrajectoryKind::SCurve: {
      const double k = 2.0 * kPi / spec_.s_period;
      const Vec2 p = start_ + s * heading_ + spec_.s_amplitude * std::sin(k * s) * left_;
      const Vec2 t = (heading_ + spec_.s_amplitude * k * std::cos(k * s) * left_).normalized();
      return {p, t};
    }
  }
  return {start_, heading_};
}

double SyntheticWorld::height(double x, double y) const {
  const SyntheticSpec& s = spec_;
  switch (s.surface) {
    case SurfaceKind::Plane: return s.base_height;
    case SurfaceKind::Inclined: return s.base_height + s.slope_x * x + s.slope_y * y;
    case SurfaceKind::Bumps: {
      const double k = 2.0 * kPi / s.bump_wavelength;
      return s.base_height + s.bump_amplitude * std::sin(k * x) * std::cos(k * y);
    }
    case SurfaceKind::Crowned: {
      const double d = y - s.crown_center;
      return s.base_height - s.crown * d * d;
    }
  }
  return 0.0;
}

Vec2 SyntheticWorld::gradient(double x, double y) const {
  const SyntheticSpec& s = spec_;
  switch (s.surface) {
    case SurfaceKind::Plane: return Vec2::Zero();
    case SurfaceKind::Inclined: return {s.slope_x, s.slope_y};
    case SurfaceKind::Bumps: {
      const double k = 2.0 * kPi / s.bump_wavelength;
      return {s.bump_amplitude * k * std::cos(k * x) * std::cos(k * y),
              -s.bump_amplitude * k * std::sin(k * x) * std::sin(k * y)};
    }
    case SurfaceKind::Crowned: return {0.0, -2.0 * s.crown * (y - s.crown_center)};
  }
  return Vec2::Zero();
}

Vec3 SyntheticWorld::normal(double x, double y) const {
  const Vec2 g = gradient(x, y);
  return Vec3(-g.x(), -g.y(), 1.0).normalized();
}

Vec2 SyntheticWorld::road_coords(double x, double y) const {
  const Vec2 q(x, y);
  switch (spec_.trajectory) {
    case TrajectoryKind::Straight: {
      const Vec2 d = q - start_;
      return {d.dot(heading_), d.dot(left_)};
    }
    case TrajectoryKind::Arc: {
      const double r = spec_.arc_radius;
      const Vec2 d = q - (start_ + r * left_);
      const double phi = std::atan2(d.dot(heading_), -d.dot(left_));
      return {r * phi, r - d.norm()};
    }
    case TrajectoryKind::SCurve: {
      const std::size_t i = index_.nearest(q);
      const Vec2 d = q - centerline_[i];
      const Vec2 t = tangent_[i];
      return {arclen_[i] + d.dot(t), d.dot(Vec2(-t.y(), t.x()))};
    }
  }
  return Vec2::Zero();
}

int SyntheticWorld::label_at(double x, double y) const {
  const SyntheticSpec& s = spec_;
  const Vec2 c = road_coords(x, y);
  const double along = c.x(), lat = c.y();
  if (along < 0.0 || along > s.length || std::abs(lat) > s.road_half_width) return kTerrainClass;
  const double edge_outer = s.road_half_width - s.edge_line_offset;
  if (std::abs(lat) <= edge_outer && std::abs(lat) >= edge_outer - s.line_width) return 1;
  const bool in_zebra = along >= s.zebra_start && along <= s.zebra_start + s.zebra_length;
  if (in_zebra) {
    if (std::abs(lat) < edge_outer - s.line_width - 0.2) {
      const auto band = static_cast<long long>(std::floor((lat + s.road_half_width) / s.zebra_stripe));
      if (band % 2 == 0) return 2;
    }
    return 0;
  }
  if (std::abs(lat) <= 0.5 * s.line_width && std::fmod(along + s.dash_phase, s.dash_length + s.dash_gap) < s.dash_length) return 1;
  return 0;
}

double SyntheticWorld::noise(double x, double y, std::uint64_t channel) const {
  const double gx = x / spec_.noise_cell, gy = y / spec_.noise_cell;
  const double fx = std::floor(gx), fy = std::floor(gy);
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
  const double tx = smoothstep(gx - fx), ty = smoothstep(gy - fy);
  const std::uint64_t seed = spec_.seed;
  const double v00 = lattice_value(seed, channel, ix, iy), v10 = lattice_value(seed, channel, ix + 1, iy);
  const double v01 = lattice_value(seed, channel, ix, iy + 1), v11 = lattice_value(seed, channel, ix + 1, iy + 1);
  return (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty;
}

Vec3 SyntheticWorld::color_at(double x, double y) const {
  const double amp = spec_.texture_noise;
  const double lum = amp * noise(x, y, 0);
  const Vec3 tint(noise(x, y, 1), noise(x, y, 2), noise(x, y, 3));
  Vec3 base;
  switch (label_at(x, y)) {
    case 0: base = Vec3(0.30, 0.30, 0.31); break;
    case 1: base = Vec3(0.72, 0.72, 0.70); break;
    case 2: base = Vec3(0.70, 0.70, 0.70); break;
    default: base = Vec3(0.24, 0.32, 0.14); break;
  }
  return (base + Vec3::Constant(lum) + 0.25 * amp * tint).cwiseMax(0.0).cwiseMin(1.0);
}

std::optional<double> SyntheticWorld::intersect(const Vec3& o, const Vec3& d, double t_max) const {
  auto f = [&](double t) {
    const Vec3 p = o + t * d;
    return p.z() - height(p.x(), p.y());
  };
  if (spec_.surface == SurfaceKind::Plane || spec_.surface == SurfaceKind::Inclined) {
    // f is affine in t.
    const double f0 = f(0.0);
    const double slope = f(1.0) - f0;
    if (f0 <= 0.0 || slope >= 0.0) return std::nullopt;
    const double t = -f0 / slope;
    if (t > t_max) return std::nullopt;
    return t;
  }
  const double lip = std::abs(d.z()) + slope_bound_ * std::hypot(d.x(), d.y());
  double t = 0.0;
  double ft = f(t);
  if (ft <= 0.0) return std::nullopt;
  for (int it = 0; it < 2000 && ft > 1e-6; ++it) {
    t += ft / lip;
    if (t > t_max) return std::nullopt;
    ft = f(t);
  }
  if (ft > 1e-6) return std::nullopt;
  for (int it = 0; it < 4; ++it) {
    const Vec3 p = o + t * d;
    const double df = d.z() - gradient(p.x(), p.y()).dot(d.head<2>());
    if (std::abs(df) < 1e-12) break;
    t -= f(t) / df;
  }
  return t;
}

// ---------------------------------------------------------------------------------------------
// Rig, poses, frames

std::vector<CameraModel> synthetic_rig(const SyntheticSpec& spec) {
  static const char* kNames[] = {"CAM_FRONT", "CAM_FRONT_LEFT", "CAM_FRONT_RIGHT",
                                 "CAM_BACK", "CAM_BACK_LEFT", "CAM_BACK_RIGHT"};
  static const double kYaw[] = {0.0, 55.0, -55.0, 180.0, 110.0, -110.0};
  Mat3 base;
  base.col(0) = Vec3(0, -1, 0);
  base.col(1) = Vec3(0, 0, -1);
  base.col(2) = Vec3(1, 0, 0);
  const double pitch = spec.camera_pitch_deg * kDeg;
  const Mat3 ry = Eigen::AngleAxisd(pitch, Vec3::UnitY()).toRotationMatrix();
  const double f = 0.5 * spec.image_width / std::tan(0.5 * spec.fov_deg * kDeg);

  std::vector<CameraModel> cams;
  for (int k = 0; k < spec.camera_count; ++k) {
    CameraModel c;
    c.name = kNames[k];
    c.width = spec.image_width;
    c.height = spec.image_height;
    c.fx = c.fy = f;
    c.cx = 0.5 * spec.image_width - 0.5;
    c.cy = 0.5 * spec.image_height - 0.5;
    const Mat3 rz = Eigen::AngleAxisd(kYaw[k] * kDeg, Vec3::UnitZ()).toRotationMatrix();
    c.extrinsic.rotation = rz * ry * base;
    c.extrinsic.translation = Vec3(0, 0, spec.camera_height);
    cams.push_back(c);
  }
  return cams;
}

std::vector<Pose> synthetic_poses(const SyntheticWorld& world) {
  const SyntheticSpec& s = world.spec();
  const double ds = s.speed / s.frame_rate;
  const auto count = static_cast<std::size_t>(std::floor(s.length / ds + 1e-9)) + 1;
  std::vector<Pose> poses;
  poses.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto [xy, t] = world.path(static_cast<double>(k) * ds);
    const Vec3 n3 = world.normal(xy.x(), xy.y());
    const Vec3 t3(t.x(), t.y(), 0.0);
    const Vec3 n1 = (t3 - t3.dot(n3) * n3).normalized();
    Pose p;
    p.rotation.col(0) = n1;
    p.rotation.col(1) = n3.cross(n1);
    p.rotation.col(2) = n3;
    p.translation = Vec3(xy.x(), xy.y(), world.height(xy.x(), xy.y()));
    p.timestamp = static_cast<double>(k) / s.frame_rate;
    poses.push_back(p);
  }
  return poses;
}

LabeledImage synthesize_frame(const SyntheticWorld& world, const Pose& pose, const CameraModel& cam,
                              double exposure_a, double exposure_b, const std::vector<int>& road_classes) {
  const Pose cw = camera_pose_in_world(pose, cam);
  const Vec3 origin = cw.translation;
  const int n = world.spec().supersample;
  const Vec3 sky(0.50, 0.62, 0.74);
  const double gain = std::exp(exposure_a);

  LabeledImage out;
  out.rgb = ImageF(cam.width, cam.height, 3);
  out.labels = LabelImage(cam.width, cam.height, 1);
  auto ray = [&](double u, double v) {
    return (cw.rotation * Vec3((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0)).normalized();
  };
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      Vec3 sum = Vec3::Zero();
      for (int sy = 0; sy < n; ++sy) {
        for (int sx = 0; sx < n; ++sx) {
          const Vec3 d = ray(x + (sx + 0.5) / n - 0.5, y + (sy + 0.5) / n - 0.5);
          const auto t = world.intersect(origin, d);
          if (!t) {
            sum += sky;
            continue;
          }
          const Vec3 p = origin + *t * d;
          sum += world.color_at(p.x(), p.y());
        }
      }
      const Vec3 c = sum / (n * n);
      for (int ch = 0; ch < 3; ++ch) {
        const double v = std::clamp(gain * c[ch] + exposure_b, 0.0, 1.0);
        out.rgb(x, y, ch) = static_cast<float>(std::lround(v * 255.0) / 255.0);
      }
      const Vec3 d = ray(x, y);
      const auto t = world.intersect(origin, d);
      if (!t) {
        out.labels(x, y, 0) = kSkyClass;
      } else {
        const Vec3 p = origin + *t * d;
        out.labels(x, y, 0) = world.label_at(p.x(), p.y());
      }
    }
  }
  out.mask = mask_from_labels(out.labels, road_classes);
  return out;
}

namespace {

/// Synthesizes frames on first use and keeps them as 8-bit data; decoded frames match what a
/// round trip through the scene directory would produce.
class SyntheticFrameSource : public FrameSource {
 public:
  SyntheticFrameSource(std::shared_ptr<const SyntheticWorld> world, std::vector<Pose> poses,
                       std::vector<CameraModel> cameras, std::vector<std::pair<double, double>> exposure,
                       std::vector<int> road_classes)
      : world_(std::move(world)),
        poses_(std::move(poses)),
        cameras_(std::move(cameras)),
        exposure_(std::move(exposure)),
        road_(std::move(road_classes)),
        once_(poses_.size() * cameras_.size()),
        cache_(poses_.size() * cameras_.size()) {}

  std::size_t size() const override { return poses_.size() * cameras_.size(); }
  FrameRef ref(std::size_t index) const override {
    return {index / cameras_.size(), static_cast<int>(index % cameras_.size())};
  }

  LabeledImage load(std::size_t index) const override {
    if (index >= size()) throw Error(ErrorCode::InputError, "frame index out of range");
    const FrameRef r = ref(index);
    std::call_once(once_[index], [&] {
      const auto [a, b] = exposure_[r.camera];
      const LabeledImage f = synthesize_frame(*world_, poses_[r.pose], cameras_[r.camera], a, b, road_);
      Compact& c = cache_[index];
      c.rgb = quantize(f.rgb);
      c.labels = ImageU8(f.labels.width, f.labels.height, 1);
      for (std::size_t i = 0; i < c.labels.data.size(); ++i) {
        c.labels.data[i] = static_cast<std::uint8_t>(f.labels.data[i]);
      }
    });
    const Compact& c = cache_[index];
    LabeledImage out;
    out.rgb = to_unit_float(c.rgb);
    out.labels = LabelImage(c.labels.width, c.labels.height, 1);
    for (std::size_t i = 0; i < c.labels.data.size(); ++i) out.labels.data[i] = c.labels.data[i];
    out.mask = mask_from_labels(out.labels, road_);
    out.camera_id = r.camera;
    out.pose_id = static_cast<int>(r.pose);
    return out;
  }

 private:
  struct Compact {
    ImageU8 rgb;
    ImageU8 labels;
  };

  std::shared_ptr<const SyntheticWorld> world_;
  std::vector<Pose> poses_;
  std::vector<CameraModel> cameras_;
  std::vector<std::pair<double, double>> exposure_;
  std::vector<int> road_;
  mutable std::vector<std::once_flag> once_;
  mutable std::vector<Compact> cache_;
};

std::vector<LidarSweep> synthesize_lidar(const SyntheticWorld& world, const std::vector<Pose>& poses) {
  const SyntheticSpec& s = world.spec();
  std::vector<Vec2> xy;
  for (const auto& p : poses) xy.emplace_back(p.translation.head<2>());
  const GridIndex2D index(xy, 1.0);
  Vec2 lo = xy.front(), hi = xy.front();
  for (const auto& p : xy) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  lo.array() -= s.lidar_range;
  hi.array() += s.lidar_range;

  const double spacing = 1.0 / std::sqrt(s.lidar_density);
  const auto nx = static_cast<std::int64_t>(std::ceil((hi.x() - lo.x()) / spacing));
  const auto ny = static_cast<std::int64_t>(std::ceil((hi.y() - lo.y()) / spacing));
  std::mt19937_64 rng(splitmix(s.seed ^ 0x6c696461ull));
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, s.lidar_noise);

  std::vector<LidarSweep> sweeps(poses.size());
  for (std::size_t k = 0; k < poses.size(); ++k) sweeps[k].timestamp = poses[k].timestamp;
  std::vector<Pose> inverse;
  for (const auto& p : poses) inverse.push_back(p.inverse());
  for (std::int64_t j = 0; j < ny; ++j) {
    for (std::int64_t i = 0; i < nx; ++i) {
      const double x = lo.x() + (i + jitter(rng)) * spacing;
      const double y = lo.y() + (j + jitter(rng)) * spacing;
      const double dz = s.lidar_noise > 0.0 ? noise(rng) : 0.0;
      const std::size_t k = index.nearest(Vec2(x, y));
      if ((xy[k] - Vec2(x, y)).norm() > s.lidar_range) continue;
      sweeps[k].points.push_back(inverse[k].apply(Vec3(x, y, world.height(x, y) + dz)));
    }
  }
  return sweeps;
}

GroundTruthBev analytic_gt(const SyntheticWorld& world, const std::vector<Pose>& poses,
                           const std::vector<int>& road_classes) {
  const SyntheticSpec& s = world.spec();
  const double res = s.gt_resolution;
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::max()), hi = -lo;
  const double pad = s.road_half_width + 1.0;
  for (double along = 0.0; along <= s.length + 1e-9; along += 0.1) {
    const Vec2 p = world.path(along).first;
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  lo = ((lo.array() - pad) / res).floor() * res;
  hi = hi.array() + pad;

  GroundTruthBev gt;
  gt.grid.origin = lo;
  gt.grid.resolution = res;
  gt.grid.width = static_cast<int>(std::ceil((hi.x() - lo.x()) / res)) + 1;
  gt.grid.height = static_cast<int>(std::ceil((hi.y() - lo.y()) / res)) + 1;
  const int w = gt.grid.width, h = gt.grid.height;
  gt.rgb = ImageD(w, h, 3);
  gt.labels = LabelImage(w, h, 1, -1);
  gt.valid = ImageU8(w, h, 1, 0);

  std::vector<Vec2> xy;
  for (const auto& p : poses) xy.emplace_back(p.translation.head<2>());
  const GridIndex2D index(xy, 1.0);

  constexpr int kBox = 4;
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int j = static_cast<int>(row);
    for (int i = 0; i < w; ++i) {
      const Vec2 c = gt.grid.pixel_center(i, j);
      Vec3 sum = Vec3::Zero();
      for (int b = 0; b < kBox; ++b) {
        for (int a = 0; a < kBox; ++a) {
          sum += world.color_at(c.x() + ((a + 0.5) / kBox - 0.5) * res, c.y() + ((b + 0.5) / kBox - 0.5) * res);
        }
      }
      sum /= kBox * kBox;
      for (int ch = 0; ch < 3; ++ch) gt.rgb(i, j, ch) = sum[ch];
      const int label = world.label_at(c.x(), c.y());
      const bool road = std::find(road_classes.begin(), road_classes.end(), label) != road_classes.end();
      if (road && (xy[index.nearest(c)] - c).norm() <= s.gt_max_range) {
        gt.labels(i, j) = label;
        gt.valid(i, j) = 1;
      }
    }
  });
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) {
      if (!gt.valid(i, j)) continue;
      const Vec2 c = gt.grid.pixel_center(i, j);
      gt.elevation_points.emplace_back(c.x(), c.y(), world.height(c.x(), c.y()));
    }
  }
  return gt;
}

}  // namespace

SyntheticScene generate(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticScene out;
  out.spec = spec;
  auto world = std::make_shared<const SyntheticWorld>(spec);
  out.world = world;

  SceneData& data = out.data;
  data.name = spec.name;
  data.cameras = synthetic_rig(spec);
  data.poses = synthetic_poses(*world);
  data.palette = default_palette();
  data.road_classes = default_road_classes();

  if (!spec.exposure.empty()) {
    out.injected_exposure = spec.exposure;
  } else {
    out.injected_exposure.assign(spec.camera_count, {0.0, 0.0});
    if (spec.random_exposure) {
      std::mt19937_64 rng(splitmix(spec.seed ^ 0x6578706full));
      std::uniform_real_distribution<double> ua(-spec.exposure_a_range, spec.exposure_a_range);
      std::uniform_real_distribution<double> ub(-spec.exposure_b_range, spec.exposure_b_range);
      for (int k = 1; k < spec.camera_count; ++k) {
        const double a = ua(rng);
        out.injected_exposure[k] = {a, ub(rng)};
      }
    }
  }

  data.frames = std::make_shared<SyntheticFrameSource>(world, data.poses, data.cameras, out.injected_exposure,
                                                       data.road_classes);
  if (spec.lidar) data.sweeps = synthesize_lidar(*world, data.poses);
  out.gt = analytic_gt(*world, data.poses, data.road_classes);
  return out;
}

void write_synthetic(const SyntheticScene& scene, const std::filesystem::path& dir) {
  write_scene_directory(scene.data, dir);
  write_analytic_gt(dir / "analytic_gt", scene.gt, scene.data.palette);
  write_text(dir / "synthetic.spec", format_synthetic_spec(scene.spec));
  nlohmann::json exposure = nlohmann::json::array();
  for (std::size_t k = 0; k < scene.injected_exposure.size(); ++k) {
    exposure.push_back({{"camera", scene.data.cameras[k].name},
                        {"a", scene.injected_exposure[k].first},
                        {"b", scene.injected_exposure[k].second}});
  }
  write_text(dir / "injected_exposure.json", exposure.dump(2) + "\n");
}

}  // namespace gsroad
