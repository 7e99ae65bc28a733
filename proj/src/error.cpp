#include "treereg/error.hpp"

#include <fmt/format.h>

namespace treereg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::DegeneratePoint: return "DegeneratePoint";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::AllPointsDegenerate: return "AllPointsDegenerate";
    case ErrorCode::EmptyBucket: return "EmptyBucket";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::KeypointTooCloseToEdge: return "KeypointTooCloseToEdge";
    case ErrorCode::TooFewKeypoints: return "TooFewKeypoints";
    case ErrorCode::NoMatchableEntries: return "NoMatchableEntries";
    case ErrorCode::TooFewMatches: return "TooFewMatches";
    case ErrorCode::TooFewSurvivors: return "TooFewSurvivors";
    case ErrorCode::CloudTooShort: return "CloudTooShort";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::CollinearPoints: return "CollinearPoints";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::HorizontalAxis: return "HorizontalAxis";
    case ErrorCode::NoCorrespondences: return "NoCorrespondences";
    case ErrorCode::TooFewTiePoints: return "TooFewTiePoints";
    case ErrorCode::FitFailed: return "FitFailed";
    case ErrorCode::AllBranchesFailed: return "AllBranchesFailed";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NoIntersections: return "NoIntersections";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::FileNotFound: return "FileNotFound";
  }
  return "Unknown";
}

namespace {

std::string render(ErrorCode code, const std::string& stage, const std::string& message) {
  if (stage.empty()) return fmt::format("{}: {}", to_string(code), message);
  return fmt::format("[{}] {}: {}", stage, to_string(code), message);
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::string stage)
    : std::runtime_error(render(code, stage, message)),
      code_(code),
      stage_(std::move(stage)),
      message_(message) {}

Error Error::with_stage(std::string_view outer) const {
  std::string combined(outer);
  if (!stage_.empty()) combined += "/" + stage_;
  return Error(code_, message_, std::move(combined));
}

}  // namespace treereg
