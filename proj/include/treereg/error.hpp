#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace treereg {

enum class ErrorCode {
  // geom_core
  TooFewPairs,
  DegenerateGeometry,
  // spherical_projection
  DegeneratePoint,
  EmptyCloud,
  AllPointsDegenerate,
  EmptyBucket,
  InvalidArgument,
  // image_features
  ImageTooSmall,
  KeypointTooCloseToEdge,
  TooFewKeypoints,
  NoMatchableEntries,
  TooFewMatches,
  TooFewSurvivors,
  // fine_reg
  CloudTooShort,
  TooFewPoints,
  CollinearPoints,
  DegenerateConfiguration,
  HorizontalAxis,
  NoCorrespondences,
  TooFewTiePoints,
  // eval_metrics
  FitFailed,
  AllBranchesFailed,
  // tls_simulator
  InvalidSpec,
  NoIntersections,
  // io
  ParseError,
  EmptyFile,
  FileNotFound,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable code and, optionally, the pipeline
/// stage that raised it ("coarse/select_pairs", "fine/fit", ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string stage = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }

  /// Same error, re-tagged with an outer stage prefix.
  Error with_stage(std::string_view outer) const;

 private:
  ErrorCode code_;
  std::string stage_;
  std::string message_;
};

}  // namespace treereg
