#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fetomosaic {

enum class ErrorCode {
  InvalidArgument,
  DenominatorNearZero,
  SingularWarp,
  TooSmallForPyramid,
  InsufficientOverlap,
  ZeroVariance,
  NormalEquationsSingular,
  TooFewDescriptors,
  DisconnectedGraph,
  SolverDiverged,
  TrajectoryLeavesCanvas,
  LengthMismatch,
  EmptyMosaic,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DenominatorNearZero: return "DenominatorNearZero";
    case ErrorCode::SingularWarp: return "SingularWarp";
    case ErrorCode::TooSmallForPyramid: return "TooSmallForPyramid";
    case ErrorCode::InsufficientOverlap: return "InsufficientOverlap";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::NormalEquationsSingular: return "NormalEquationsSingular";
    case ErrorCode::TooFewDescriptors: return "TooFewDescriptors";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::SolverDiverged: return "SolverDiverged";
    case ErrorCode::TrajectoryLeavesCanvas: return "TrajectoryLeavesCanvas";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyMosaic: return "EmptyMosaic";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by bundle adjustment when some frames cannot be reached from frame 0
// and the caller asked for a connected graph.
class DisconnectedGraphError : public Error {
 public:
  DisconnectedGraphError(std::vector<int> reachable, const std::string& what)
      : Error(ErrorCode::DisconnectedGraph, what), reachable_(std::move(reachable)) {}

  const std::vector<int>& reachable() const noexcept { return reachable_; }

 private:
  std::vector<int> reachable_;
};

}  // namespace fetomosaic
