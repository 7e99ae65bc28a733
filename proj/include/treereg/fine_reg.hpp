#pragma once

#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "treereg/fitting.hpp"
#include "treereg/geom_core.hpp"
#include "treereg/spherical_projection.hpp"

namespace treereg {

struct SliceParams {
  /// Slice centres; empty means the quartiles of the cloud's z range.
  std::vector<double> heights;
  double thickness = 0.10;
  /// Number of default heights (z_min + k/(n+1)·extent).
  int layer_count = 3;

  void validate() const;
};

/// min + k/(layer_count+1)·(max − min), k = 1..layer_count.
std::vector<double> default_slice_heights(const PointCloud& cloud, int layer_count = 3);

struct Layer {
  int id = 0;
  double height_center = 0.0;
  double thickness = 0.0;
  std::vector<std::uint32_t> indices;
};

/// One layer per height, holding every point with |z − h| ≤ thickness/2.
/// Throws CloudTooShort when the z extent is not above 4·thickness.
std::vector<Layer> slice_layers(const PointCloud& cloud, const SliceParams& params);

struct Arc {
  int layer_id = 0;
  std::vector<std::uint32_t> indices;  // sorted by (alpha, beta, index)
};

/// Angular gap |wrap(a − b)| used by the arc connectivity rule.
double angular_gap(double a, double b);

/// Connected components of the layer under |Δα| ≤ 3φ ∧ |Δβ| ≤ 3ϑ (scanner
/// angles, all point pairs). Components below `min_arc_points` are dropped and
/// counted in `dropped`. Points with undefined angles belong to no arc.
std::vector<Arc> separate_arcs(const Layer& layer, const PointCloud& cloud, const ScannerSpec& spec,
                               std::size_t min_arc_points = 10, std::size_t* dropped = nullptr);

/// {(X0, Y0, h)} for a circle.
std::vector<Point3> arc_tie_points(const CircleFit& fit, double layer_height);
/// {axis point at z = h, that point + unit_offset·d} with d oriented to
/// increasing z. Throws HorizontalAxis when |c| < 1e-6.
std::vector<Point3> arc_tie_points(const CylinderFit& fit, double layer_height, double unit_offset = 1.0);

enum class FitKind { Circle, Cylinder };
std::string_view to_string(FitKind kind);

/// Inventory row for one arc. Failed fits appear with accepted = false.
struct ArcFit {
  int layer = 0;
  int arc = 0;
  double layer_height = 0.0;
  FitKind kind = FitKind::Cylinder;
  Point3 center = Point3::Zero();  // axis point at layer_height
  Vec3 direction = Vec3::UnitZ();
  double radius = 0.0;
  double rms = 0.0;
  std::size_t point_count = 0;
  bool converged = true;
  std::vector<Point3> tie_points;
  bool accepted = true;
  std::string reject_reason;
};

struct ArcFitOptions {
  double unit_offset = 1.0;
  CylinderFitOptions cylinder;
  /// Fits with a larger rms (m) are rejected; arcs that merge two primitives
  /// fit badly and land here.
  double max_rms = 0.01;
  /// Cylinders tilted further than this from vertical (rad) are rejected: their
  /// layer-height point moves by dz·tan(tilt) under a small vertical error.
  double max_tilt = 70.0 * std::numbers::pi / 180.0;
};

/// Fits one arc (circle on xy or cylinder) and fills its tie points. Fits that
/// break the rms or tilt limit come back with accepted = false.
ArcFit fit_arc(const Arc& arc, const Layer& layer, const PointCloud& cloud, FitKind kind,
               const ArcFitOptions& options = {});

/// Radius monotonicity check. A fit is linked to a lower accepted fit when the
/// lower one is the trunk circle of the lowest layer, or when its axis,
/// extrapolated to the lower height, passes within r_low + r_high +
/// `link_margin`. Fits whose radius exceeds (1 + tolerance)·r_low of a linked
/// lower fit are marked rejected. Returns all fits.
std::vector<ArcFit> verify_arcs(std::vector<ArcFit> fits, double tolerance = 0.10, double link_margin = 0.25);

struct FitCorrespondence {
  std::size_t target = 0;  // indices into the accepted fit lists passed in
  std::size_t reference = 0;
  double distance = 0.0;
};

inline constexpr double kDefaultMaxAxisAngle = 20.0 * std::numbers::pi / 180.0;

struct CorrespondenceResult {
  std::vector<TiePointPair> tie_points;
  std::vector<FitCorrespondence> pairs;
  std::vector<std::size_t> unmatched_target;
  std::vector<std::size_t> unmatched_reference;
};

/// Greedy one-to-one nearest-neighbour pairing of fits from the same layer on
/// their primary tie points, closest first, up to `max_distance`. Two cylinders
/// whose axes differ by more than `max_axis_angle` (rad) never pair. Paired fits
/// contribute their common tie points in order; offset points carry
/// `offset_weight`. Throws NoCorrespondences when nothing pairs.
CorrespondenceResult correspond_fits(std::span<const ArcFit> target, std::span<const ArcFit> reference,
                                     double max_distance = 0.5, double offset_weight = 1.0,
                                     double max_axis_angle = kDefaultMaxAxisAngle);

struct FineParams {
  SliceParams slice;
  std::size_t min_arc_points = 10;
  ArcFitOptions fit;
  double radius_tolerance = 0.10;
  double max_correspondence_distance = 0.5;
  /// Offset points carry direction noise of a short slice fit, so they get a
  /// small weight next to the axis points.
  double offset_weight = 0.05;
  double max_axis_angle = kDefaultMaxAxisAngle;
  /// Pair each cylinder's layer-height point with the nearest point of the
  /// partner's axis instead of its layer-height point.
  bool slide_along_axes = true;
  /// Correspondence + solve rounds; stops early once the update is below
  /// 1e-4 m and 1e-5 rad. Sliding ties need several rounds to settle.
  int rounds = 20;

  void validate() const;
};

struct LayerSummary {
  int id = 0;
  double height = 0.0;
  std::size_t target_points = 0;
  std::size_t reference_points = 0;
  std::size_t target_dropped_components = 0;
  std::size_t reference_dropped_components = 0;
};

struct FineResult {
  RigidTransform transform;  // coarse-aligned target -> reference
  std::vector<TiePointPair> tie_points;
  double rms_residual = 0.0;
  int rounds_run = 0;
  std::vector<LayerSummary> layers;
  std::vector<ArcFit> target_fits;  // full inventories including rejections
  std::vector<ArcFit> reference_fits;
  std::vector<FitCorrespondence> correspondences;  // indices into the accepted subsets
  std::map<std::string, double> timings;
};

/// Slices, separates and fits both clouds with the same layer heights (taken
/// from the reference when not given), pairs the fits and solves for the
/// refinement. Throws TooFewTiePoints when fewer than 3 non-collinear pairs remain.
FineResult fine_register(const PointCloud& target_coarse, const PointCloud& reference, const ScannerSpec& spec,
                         const FineParams& params = {});

/// Slicing, arc separation and fitting for a single cloud.
std::vector<ArcFit> extract_fits(const PointCloud& cloud, const std::vector<Layer>& layers, const ScannerSpec& spec,
                                 const FineParams& params, std::vector<std::size_t>* dropped_per_layer = nullptr);

}  // namespace treereg
