#include "topoloc/error.hpp"

namespace topoloc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::InvalidDepth: return "InvalidDepth";
    case ErrorCode::InvalidIntrinsics: return "InvalidIntrinsics";
    case ErrorCode::DuplicateTimestamp: return "DuplicateTimestamp";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyMap: return "EmptyMap";
    case ErrorCode::NoDepth: return "NoDepth";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::TooFewMatches: return "TooFewMatches";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::MissingOdometry: return "MissingOdometry";
    case ErrorCode::AllPointsDropped: return "AllPointsDropped";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NoVisibleLandmarks: return "NoVisibleLandmarks";
    case ErrorCode::MatcherFailure: return "MatcherFailure";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NonPositiveDt: return "NonPositiveDt";
    case ErrorCode::PointBehindCamera: return "PointBehindCamera";
    case ErrorCode::SingularNormalMatrix: return "SingularNormalMatrix";
    case ErrorCode::NoMeasurements: return "NoMeasurements";
    case ErrorCode::InsufficientStationaryData: return "InsufficientStationaryData";
    case ErrorCode::NoTimestampOverlap: return "NoTimestampOverlap";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace topoloc
