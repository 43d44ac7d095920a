#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "gsroad/geometry.hpp"
#include "gsroad/scene.hpp"

namespace gsroad {

/// Which pose and camera a training frame belongs to.
struct FrameRef {
  std::size_t pose = 0;
  int camera = 0;
};

/// Random-access collection of labeled camera frames. Implementations may decode or
/// synthesize frames on demand; load() must be thread-safe and deterministic.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::size_t size() const = 0;
  virtual FrameRef ref(std::size_t index) const = 0;
  virtual LabeledImage load(std::size_t index) const = 0;
};

class MemoryFrameSource : public FrameSource {
 public:
  MemoryFrameSource() = default;
  explicit MemoryFrameSource(std::vector<LabeledImage> frames);

  std::size_t size() const override { return frames_.size(); }
  FrameRef ref(std::size_t index) const override;
  LabeledImage load(std::size_t index) const override { return frames_.at(index); }
  void add(LabeledImage frame) { frames_.push_back(std::move(frame)); }

 private:
  std::vector<LabeledImage> frames_;
};

/// One LiDAR sweep in the vehicle frame.
struct LidarSweep {
  double timestamp = 0.0;
  std::vector<Vec3> points;
};

/// Everything a reconstruction consumes. Frames are ordered pose-major: frame
/// i = pose i / camera_count, camera i % camera_count.
struct SceneData {
  std::string name;
  std::vector<CameraModel> cameras;
  std::vector<Pose> poses;
  std::vector<ClassInfo> palette;
  std::vector<int> road_classes;
  std::shared_ptr<const FrameSource> frames;
  std::vector<LidarSweep> sweeps;
  std::filesystem::path directory;

  bool has_lidar() const { return !sweeps.empty(); }
  std::size_t frame_index(std::size_t pose, int camera) const { return pose * cameras.size() + camera; }
};

/// Index of the pose closest in time to `timestamp`, ties to the lower index. Throws
/// Error(NoAssociation) when the gap exceeds `max_gap` seconds.
std::size_t associate_timestamp(const std::vector<Pose>& poses, double timestamp, double max_gap = 0.1);

/// All sweeps transformed into the world frame through their time-associated poses.
PointCloud accumulate_lidar(const SceneData& scene, double max_gap = 0.1);

/// Poses file: one record per line, `timestamp tx ty tz qw qx qy qz` or
/// `timestamp tx ty tz r00 r01 r02 r10 r11 r12 r20 r21 r22`; '#' starts a comment.
std::vector<Pose> parse_poses(const std::string& text);
std::string format_poses(const std::vector<Pose>& poses);

SceneData load_scene_directory(const std::filesystem::path& dir);
/// Writes the scene (including every frame and sweep) in the directory format load_scene_directory reads.
void write_scene_directory(const SceneData& scene, const std::filesystem::path& dir);

}  // namespace gsroad
