#pragma once

#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "treereg/geom_core.hpp"
#include "treereg/image_features.hpp"
#include "treereg/spherical_projection.hpp"

namespace treereg {

struct CoarseParams {
  double theta = 10.0 * std::numbers::pi / 180.0;
  int n_scans = 3;
  int r1 = kDefaultBorder;
  int r2 = kDefaultBorder;
  int pair_count = 3;
  int top_k = 5;
  int max_keypoints = 500;
  bool verification_enabled = true;
  /// When false only the target is rotated; the reference contributes its
  /// un-rotated image alone.
  bool rotate_reference = true;

  /// Pool matches from every image combination and keep the largest set that
  /// agrees with one leveled rigid motion (yaw + translation). When false the
  /// pair_count best-scoring combinations feed the solver directly.
  bool consensus = true;
  /// Per combination: at most this many mutual matches, each at most max_hamming.
  int candidate_top_k = 10;
  int max_hamming = 40;
  /// Tie-point distance (m) under which a candidate supports a hypothesis.
  double inlier_threshold = 0.3;
  /// Hypotheses are ranked by how many cells of this size (m) their inliers'
  /// target points occupy.
  double support_cell = 0.25;

  void validate() const;
};

struct CoarseResult {
  RigidTransform transform;  // target -> reference
  std::vector<TiePointPair> tie_points;
  double rms_residual = 0.0;
  double rotation_a = 0.0;  // target sequence angle of the best image pair
  double rotation_b = 0.0;  // reference sequence angle of the best image pair
  /// Selected combinations; in consensus mode the ones holding most inliers,
  /// carrying only their inlier matches.
  std::vector<ImagePairMatch> image_pairs;
  std::size_t candidate_count = 0;  // consensus mode: pooled matches
  std::size_t inlier_count = 0;
  MatchVerificationReport verification;
  std::map<std::string, double> timings;  // seconds per stage
};

/// Turns matches into 3D tie pairs. `clouds_a[i]`/`clouds_b[i]` are the
/// (rotated) clouds that `pairs[i]` was projected from; bucket centroids are
/// rotated back by −source_rotation about `center_a`/`center_b` so the tie
/// points live in the original scan frames. Throws EmptyBucket.
std::vector<TiePointPair> lift_matches_to_tie_points(std::span<const MatchPair> matches,
                                                     std::span<const ImagePairView> pairs,
                                                     std::span<const PointCloud* const> clouds_a, const Vec2& center_a,
                                                     std::span<const PointCloud* const> clouds_b,
                                                     const Vec2& center_b);

/// Least-squares yaw about z plus translation mapping target onto reference
/// points (a leveled rigid motion). Throws TooFewPairs and DegenerateGeometry.
RigidTransform leveled_fit(std::span<const TiePointPair> pairs);

/// Image-feature coarse registration; the result maps raw target points into
/// the reference frame.
CoarseResult coarse_register(const PointCloud& target, const PointCloud& reference, const ScannerSpec& spec,
                             const CoarseParams& params = {});

}  // namespace treereg
