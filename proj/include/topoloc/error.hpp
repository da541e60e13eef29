#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace topoloc {

enum class ErrorCode {
  // geometry
  NonPositiveDepth,
  InvalidDepth,
  InvalidIntrinsics,
  // topomap
  DuplicateTimestamp,
  DimensionMismatch,
  EmptyMap,
  NoDepth,
  OutOfBounds,
  IoError,
  FormatVersionMismatch,
  ChecksumMismatch,
  // mapgen
  EmptyCloud,
  TooFewMatches,
  NoConsensus,
  DegenerateConfiguration,
  NoConvergence,
  MissingOdometry,
  // matching
  AllPointsDropped,
  EmptyInput,
  NoVisibleLandmarks,
  MatcherFailure,
  // ieskf
  NonFiniteInput,
  NonPositiveDt,
  PointBehindCamera,
  SingularNormalMatrix,
  NoMeasurements,
  InsufficientStationaryData,
  // eval / cli
  NoTimestampOverlap,
  InvalidConfig,
  ParseError,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a typed error code. All library failures are reported
/// through this type so callers can branch on `code()`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace topoloc
