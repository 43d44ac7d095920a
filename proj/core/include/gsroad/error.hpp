#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gsroad {

enum class ErrorCode {
  InputError,
  BehindCamera,
  EmptyScene,
  DegenerateExtent,
  NearVerticalPose,
  SingularCovariance,
  EmptyMask,
  NonFiniteLoss,
  DivergedScene,
  CorruptCheckpoint,
  NoAssociation,
  NoMatches,
  InvalidSpec,
  MissingGT,
};

std::string_view to_string(ErrorCode code);

/// True for failures caused by the numerics (exit code 2 in the CLI) rather than by bad inputs.
constexpr bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularCovariance:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::DivergedScene:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InputError: return "InputError";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::EmptyScene: return "EmptyScene";
    case ErrorCode::DegenerateExtent: return "DegenerateExtent";
    case ErrorCode::NearVerticalPose: return "NearVerticalPose";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::DivergedScene: return "DivergedScene";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::NoAssociation: return "NoAssociation";
    case ErrorCode::NoMatches: return "NoMatches";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::MissingGT: return "MissingGT";
  }
  return "Unknown";
}

}  // namespace gsroad
