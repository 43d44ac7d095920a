#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gsroad/scene.hpp"
#include "gsroad/trainer.hpp"

namespace gsroad {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CameraExposure {
  std::string name;
  double a = 0.0;
  double b = 0.0;

  bool operator==(const CameraExposure&) const = default;
};

/// Everything needed to resume or evaluate a reconstruction.
struct Checkpoint {
  SurfelScene scene;
  std::vector<CameraExposure> exposures;
  TrainState state;
  /// Serialized TrainConfig (JSON text) of the run that produced the checkpoint.
  std::string config;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
/// Throws Error(CorruptCheckpoint) on a bad header, version, checksum, or truncation.
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gsroad
