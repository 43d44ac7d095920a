#include "gsroad/dataset.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gsroad/error.hpp"
#include "gsroad/io.hpp"
#include "gsroad/parallel.hpp"

namespace gsroad {

using nlohmann::json;

MemoryFrameSource::MemoryFrameSource(std::vector<LabeledImage> frames) : frames_(std::move(frames)) {}

FrameRef MemoryFrameSource::ref(std::size_t index) const {
  const auto& f = frames_.at(index);
  return {static_cast<std::size_t>(f.pose_id), f.camera_id};
}

std::size_t associate_timestamp(const std::vector<Pose>& poses, double timestamp, double max_gap) {
  if (poses.empty()) throw Error(ErrorCode::NoAssociation, "no poses to associate with");
  std::size_t best = 0;
  double best_gap = std::abs(poses[0].timestamp - timestamp);
  for (std::size_t i = 1; i < poses.size(); ++i) {
    const double gap = std::abs(poses[i].timestamp - timestamp);
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  if (!(best_gap <= max_gap)) {
    throw Error(ErrorCode::NoAssociation, "no frame within " + std::to_string(max_gap) + " s of timestamp " +
                                              std::to_string(timestamp) + " (closest gap " + std::to_string(best_gap) +
                                              " s)");
  }
  return best;
}

PointCloud accumulate_lidar(const SceneData& scene, double max_gap) {
  PointCloud cloud;
  for (const auto& sweep : scene.sweeps) {
    const Pose& pose = scene.poses[associate_timestamp(scene.poses, sweep.timestamp, max_gap)];
    for (const auto& p : sweep.points) cloud.points.push_back(pose.apply(p));
  }
  return cloud;
}

std::vector<Pose> parse_poses(const std::string& text) {
  std::vector<Pose> poses;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    if (!ls.eof()) throw Error(ErrorCode::InputError, "poses line " + std::to_string(line_no) + ": non-numeric field");
    if (v.empty()) continue;
    Pose p;
    p.timestamp = v[0];
    if (v.size() == 8) {
      p = Pose::from_quaternion(Vec4(v[4], v[5], v[6], v[7]), Vec3(v[1], v[2], v[3]), v[0]);
    } else if (v.size() == 13) {
      p.translation = Vec3(v[1], v[2], v[3]);
      p.rotation << v[4], v[5], v[6], v[7], v[8], v[9], v[10], v[11], v[12];
    } else {
      throw Error(ErrorCode::InputError, "poses line " + std::to_string(line_no) + ": expected 8 or 13 fields, got " +
                                             std::to_string(v.size()));
    }
    if (!p.is_valid()) {
      throw Error(ErrorCode::InputError, "poses line " + std::to_string(line_no) + ": rotation is not orthonormal");
    }
    poses.push_back(p);
  }
  return poses;
}

std::string format_poses(const std::vector<Pose>& poses) {
  std::string out = "# timestamp tx ty tz r00 r01 r02 r10 r11 r12 r20 r21 r22\n";
  char buf[64];
  for (const auto& p : poses) {
    auto put = [&](double v, char sep) {
      std::snprintf(buf, sizeof(buf), "%.17g%c", v, sep);
      out += buf;
    };
    put(p.timestamp, ' ');
    for (int k = 0; k < 3; ++k) put(p.translation[k], ' ');
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) put(p.rotation(r, c), r == 2 && c == 2 ? '\n' : ' ');
    }
  }
  return out;
}

namespace {

namespace fs = std::filesystem;

std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf;
}

json pose_to_json(const Pose& p) {
  json j;
  j["translation"] = {p.translation.x(), p.translation.y(), p.translation.z()};
  std::vector<double> r;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) r.push_back(p.rotation(a, b));
  }
  j["rotation"] = r;
  return j;
}

Pose pose_from_json(const json& j) {
  Pose p;
  const auto t = j.at("translation").get<std::vector<double>>();
  if (t.size() != 3) throw Error(ErrorCode::InputError, "extrinsic translation needs 3 values");
  p.translation = Vec3(t[0], t[1], t[2]);
  if (j.contains("rotation")) {
    const auto r = j.at("rotation").get<std::vector<double>>();
    if (r.size() != 9) throw Error(ErrorCode::InputError, "extrinsic rotation needs 9 values (row-major)");
    p.rotation << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
  } else if (j.contains("quaternion")) {
    const auto q = j.at("quaternion").get<std::vector<double>>();
    if (q.size() != 4) throw Error(ErrorCode::InputError, "extrinsic quaternion needs 4 values (wxyz)");
    p.rotation = quaternion_to_rotation(Vec4(q[0], q[1], q[2], q[3]));
  }
  if (!p.is_valid()) throw Error(ErrorCode::InputError, "extrinsic rotation is not orthonormal");
  return p;
}

class DiskFrameSource : public FrameSource {
 public:
  DiskFrameSource(fs::path dir, std::vector<CameraModel> cameras, std::size_t pose_count, std::vector<int> road_classes)
      : dir_(std::move(dir)), cameras_(std::move(cameras)), pose_count_(pose_count), road_(std::move(road_classes)) {}

  std::size_t size() const override { return pose_count_ * cameras_.size(); }
  FrameRef ref(std::size_t index) const override {
    return {index / cameras_.size(), static_cast<int>(index % cameras_.size())};
  }
  LabeledImage load(std::size_t index) const override {
    const FrameRef r = ref(index);
    const CameraModel& cam = cameras_[r.camera];
    const fs::path img_path = dir_ / "images" / cam.name / (frame_name(r.pose) + ".png");
    const fs::path lbl_path = dir_ / "labels" / cam.name / (frame_name(r.pose) + ".png");
    const ImageU8 rgb8 = read_png(img_path);
    const ImageU8 lbl8 = read_png(lbl_path);
    if (rgb8.channels != 3) throw Error(ErrorCode::InputError, img_path.string() + " is not an RGB image");
    if (lbl8.channels != 1) throw Error(ErrorCode::InputError, lbl_path.string() + " is not a single-channel label map");
    if (!rgb8.same_shape(cam.width, cam.height) || !lbl8.same_shape(cam.width, cam.height)) {
      throw Error(ErrorCode::InputError, img_path.string() + " does not match the camera resolution");
    }
    LabeledImage out;
    out.rgb = to_unit_float(rgb8);
    out.labels = LabelImage(lbl8.width, lbl8.height, 1);
    for (std::size_t i = 0; i < lbl8.data.size(); ++i) out.labels.data[i] = lbl8.data[i];
    out.mask = mask_from_labels(out.labels, road_);
    out.camera_id = r.camera;
    out.pose_id = static_cast<int>(r.pose);
    return out;
  }

 private:
  fs::path dir_;
  std::vector<CameraModel> cameras_;
  std::size_t pose_count_;
  std::vector<int> road_;
};

std::vector<Vec3> read_sweep(const fs::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() % (3 * sizeof(float)) != 0) {
    throw Error(ErrorCode::InputError, path.string() + " is not a float32 xyz point file");
  }
  std::vector<Vec3> pts(bytes.size() / (3 * sizeof(float)));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    float v[3];
    std::memcpy(v, bytes.data() + i * sizeof(v), sizeof(v));
    pts[i] = Vec3(v[0], v[1], v[2]);
  }
  return pts;
}

void write_sweep(const fs::path& path, const std::vector<Vec3>& pts) {
  std::vector<float> buf;
  buf.reserve(pts.size() * 3);
  for (const auto& p : pts) {
    for (int k = 0; k < 3; ++k) buf.push_back(static_cast<float>(p[k]));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InputError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

}  // namespace

SceneData load_scene_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::InputError, "scene directory " + dir.string() + " does not exist");
  SceneData scene;
  scene.directory = dir;

  json manifest;
  try {
    manifest = json::parse(read_text(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InputError, "manifest.json: " + std::string(e.what()));
  }
  json cameras_json;
  try {
    cameras_json = json::parse(read_text(dir / "cameras.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InputError, "cameras.json: " + std::string(e.what()));
  }

  try {
    scene.name = manifest.value("name", dir.filename().string());
    if (manifest.contains("classes")) {
      for (const auto& c : manifest.at("classes")) {
        ClassInfo info;
        info.id = c.at("id").get<int>();
        info.name = c.at("name").get<std::string>();
        const auto col = c.at("color").get<std::vector<int>>();
        if (col.size() != 3) throw Error(ErrorCode::InputError, "class color needs 3 values");
        for (int k = 0; k < 3; ++k) info.color[k] = static_cast<std::uint8_t>(col[k]);
        scene.palette.push_back(info);
      }
    } else {
      scene.palette = default_palette();
    }
    for (std::size_t i = 0; i < scene.palette.size(); ++i) {
      if (scene.palette[i].id != static_cast<int>(i)) {
        throw Error(ErrorCode::InputError, "manifest classes must be listed with ids 0..C-1 in order");
      }
    }
    scene.road_classes = manifest.contains("road_classes") ? manifest.at("road_classes").get<std::vector<int>>()
                                                           : default_road_classes();

    const auto listed = manifest.at("cameras").get<std::vector<std::string>>();
    for (const auto& c : cameras_json) {
      CameraModel cam;
      cam.name = c.at("name").get<std::string>();
      cam.fx = c.at("fx").get<double>();
      cam.fy = c.at("fy").get<double>();
      cam.cx = c.at("cx").get<double>();
      cam.cy = c.at("cy").get<double>();
      cam.width = c.at("width").get<int>();
      cam.height = c.at("height").get<int>();
      cam.extrinsic = pose_from_json(c.at("extrinsic"));
      if (!(cam.fx > 0 && cam.fy > 0) || cam.width <= 0 || cam.height <= 0) {
        throw Error(ErrorCode::InputError, "camera " + cam.name + " has invalid intrinsics");
      }
      scene.cameras.push_back(cam);
    }
    if (listed.size() != scene.cameras.size()) {
      throw Error(ErrorCode::InputError, "manifest lists " + std::to_string(listed.size()) + " cameras, cameras.json has " +
                                             std::to_string(scene.cameras.size()));
    }
    for (std::size_t i = 0; i < listed.size(); ++i) {
      if (listed[i] != scene.cameras[i].name) {
        throw Error(ErrorCode::InputError, "manifest camera " + listed[i] + " does not match cameras.json order");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InputError, "malformed scene metadata: " + std::string(e.what()));
  }
  if (scene.cameras.empty()) throw Error(ErrorCode::InputError, "scene has no cameras");

  scene.poses = parse_poses(read_text(dir / "poses.txt"));
  if (scene.poses.empty()) throw Error(ErrorCode::EmptyScene, "poses.txt has no records");

  for (const auto& cam : scene.cameras) {
    for (const char* kind : {"images", "labels"}) {
      const fs::path sub = dir / kind / cam.name;
      if (!fs::is_directory(sub)) throw Error(ErrorCode::InputError, "missing folder " + sub.string());
      for (std::size_t p = 0; p < scene.poses.size(); ++p) {
        const fs::path f = sub / (frame_name(p) + ".png");
        if (!fs::exists(f)) throw Error(ErrorCode::InputError, "missing file " + f.string());
      }
    }
  }
  scene.frames = std::make_shared<DiskFrameSource>(dir, scene.cameras, scene.poses.size(), scene.road_classes);

  const fs::path lidar = dir / "lidar";
  if (fs::is_directory(lidar)) {
    std::istringstream ts(read_text(lidar / "timestamps.txt"));
    double t;
    std::size_t k = 0;
    while (ts >> t) {
      LidarSweep sweep;
      sweep.timestamp = t;
      sweep.points = read_sweep(lidar / (frame_name(k) + ".bin"));
      scene.sweeps.push_back(std::move(sweep));
      ++k;
    }
  }
  return scene;
}

void write_scene_directory(const SceneData& scene, const fs::path& dir) {
  if (!scene.frames) throw Error(ErrorCode::InputError, "scene has no frames to write");
  fs::create_directories(dir);

  json manifest;
  manifest["name"] = scene.name;
  std::vector<std::string> names;
  for (const auto& c : scene.cameras) names.push_back(c.name);
  manifest["cameras"] = names;
  json classes = json::array();
  for (const auto& c : scene.palette) {
    classes.push_back({{"id", c.id}, {"name", c.name}, {"color", {c.color[0], c.color[1], c.color[2]}}});
  }
  manifest["classes"] = classes;
  manifest["road_classes"] = scene.road_classes;
  manifest["frame_count"] = scene.frames->size();
  manifest["lidar"] = scene.has_lidar();
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  json cams = json::array();
  for (const auto& c : scene.cameras) {
    cams.push_back({{"name", c.name},
                    {"fx", c.fx},
                    {"fy", c.fy},
                    {"cx", c.cx},
                    {"cy", c.cy},
                    {"width", c.width},
                    {"height", c.height},
                    {"extrinsic", pose_to_json(c.extrinsic)}});
  }
  write_text(dir / "cameras.json", cams.dump(2) + "\n");
  write_text(dir / "poses.txt", format_poses(scene.poses));

  for (const auto& cam : scene.cameras) {
    fs::create_directories(dir / "images" / cam.name);
    fs::create_directories(dir / "labels" / cam.name);
  }
  parallel_for(scene.frames->size(), [&](std::size_t i) {
    const FrameRef r = scene.frames->ref(i);
    const LabeledImage f = scene.frames->load(i);
    const std::string& cam = scene.cameras.at(r.camera).name;
    write_png(dir / "images" / cam / (frame_name(r.pose) + ".png"), quantize(f.rgb));
    ImageU8 lbl(f.labels.width, f.labels.height, 1);
    for (std::size_t k = 0; k < lbl.data.size(); ++k) {
      const int v = f.labels.data[k];
      if (v < 0 || v > 255) throw Error(ErrorCode::InputError, "label outside 0..255");
      lbl.data[k] = static_cast<std::uint8_t>(v);
    }
    write_png(dir / "labels" / cam / (frame_name(r.pose) + ".png"), lbl);
  });

  if (scene.has_lidar()) {
    fs::create_directories(dir / "lidar");
    std::string ts;
    char buf[64];
    for (std::size_t k = 0; k < scene.sweeps.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g\n", scene.sweeps[k].timestamp);
      ts += buf;
      write_sweep(dir / "lidar" / (frame_name(k) + ".bin"), scene.sweeps[k].points);
    }
    write_text(dir / "lidar" / "timestamps.txt", ts);
  }
}

}  // namespace gsroad
