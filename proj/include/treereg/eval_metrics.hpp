#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "treereg/fitting.hpp"
#include "treereg/geom_core.hpp"

namespace treereg {

struct BranchPairSpec {
  int branch_id = 0;
  std::vector<std::uint32_t> indices_a;  // branch points in cloud a
  std::vector<std::uint32_t> indices_b;
  std::array<double, 3> heights{};  // bottom, middle, top slice centres
  double thickness = 0.10;
  std::size_t min_points = 20;
};

/// Axis-point distance per slice: both scans' slices get a cylinder fit and
/// each axis is evaluated at the mean slice height. Throws FitFailed naming the
/// slice and scan.
std::vector<double> branch_error(const BranchPairSpec& pair, const PointCloud& cloud_a, const PointCloud& cloud_b);

struct BranchResult {
  int branch_id = 0;
  std::vector<double> distances;
  bool ok = false;
  std::string error;
};

struct ErrorReport {
  std::vector<BranchResult> branches;
  std::vector<double> distances;  // every successful per-slice distance
  double mean = 0.0;              // d̄
};

/// Flat mean over all successful slice distances; failed branches are listed
/// and excluded. Throws AllBranchesFailed.
ErrorReport evaluate(std::span<const BranchPairSpec> pairs, const PointCloud& cloud_a, const PointCloud& cloud_b);

/// Branch pairs from per-point primitive labels (ids 1..999): slices at 20%,
/// 50% and 80% of the z extent common to both scans. Branches whose slices
/// hold fewer than `min_points` on either side are skipped.
std::vector<BranchPairSpec> branch_pairs_from_labels(const PointCloud& cloud_a, std::span<const int> labels_a,
                                                     const PointCloud& cloud_b, std::span<const int> labels_b,
                                                     double thickness = 0.10, std::size_t min_points = 20);

struct IcpParams {
  int max_iterations = 50;
  double convergence_eps = 1e-6;
  /// Pairs farther than trim_factor × median distance are dropped.
  double trim_factor = 5.0;
};

struct IcpResult {
  RigidTransform transform;  // cumulative, target -> reference
  int iterations = 0;
  bool converged = false;
  /// Mean nearest-neighbour distance of the kept pairs at the start of each iteration.
  std::vector<double> residual_history;
};

/// Trimmed point-to-point ICP with kd-tree correspondences and SVD updates.
IcpResult icp_register(const PointCloud& target, const PointCloud& reference, const IcpParams& params = {});

/// Mean distance between the estimated and true positions of the points.
double ground_truth_error(const PointCloud& target, const RigidTransform& estimated, const RigidTransform& truth);

struct ErrorTableRow {
  std::string scan_pair;      // e.g. "2->1"
  std::vector<double> values; // one per method, NaN when missing
};

/// Plain-text table, methods as columns and scan pairs as rows.
std::string format_error_table(std::span<const std::string> methods, std::span<const ErrorTableRow> rows);

}  // namespace treereg
