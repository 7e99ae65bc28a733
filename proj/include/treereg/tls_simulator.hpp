#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "treereg/geom_core.hpp"
#include "treereg/spherical_projection.hpp"

namespace treereg {

inline constexpr int kTrunkId = 0;
inline constexpr int kFirstLeafId = 1000;

/// Truncated cone (open tube) from `base` along unit `axis`; radius tapers
/// linearly from base_radius to top_radius.
struct Frustum {
  int id = 0;
  Point3 base = Point3::Zero();
  Vec3 axis = Vec3::UnitZ();
  double length = 1.0;
  double base_radius = 0.1;
  double top_radius = 0.1;

  Point3 top() const { return base + length * axis; }
  double radius_at(double t) const { return base_radius + (top_radius - base_radius) * t / length; }
  /// Smallest ray parameter s > min_s with origin + s·dir on the lateral surface.
  std::optional<double> intersect(const Point3& origin, const Vec3& dir, double min_s = 1e-9) const;
  /// Euclidean distance from p to the lateral surface.
  double surface_distance(const Point3& p) const;
  Frustum transformed(const RigidTransform& t) const;
};

struct Sphere {
  int id = kFirstLeafId;
  Point3 center = Point3::Zero();
  double radius = 0.03;

  std::optional<double> intersect(const Point3& origin, const Vec3& dir, double min_s = 1e-9) const;
  double surface_distance(const Point3& p) const { return std::abs((p - center).norm() - radius); }
};

struct TreeModel {
  /// The trunk may be a chain of segments (bent stem); all carry kTrunkId.
  std::vector<Frustum> trunk;
  std::vector<Frustum> branches;  // ids 1..n
  std::vector<Sphere> leaves;     // ids >= kFirstLeafId

  TreeModel transformed(const RigidTransform& t) const;
  /// Distance from p to the surface of primitive `id` (min over trunk segments).
  double surface_distance(int id, const Point3& p) const;
  const Frustum* branch(int id) const;
};

struct TreeParams {
  Point3 base = Point3::Zero();
  double height = 10.0;
  double base_radius = 0.30;
  double top_radius = 0.08;
  /// Lateral offset of the stem top from vertical (m), distributed quadratically.
  double bend = 0.0;
  int trunk_segments = 1;
  int branch_count = 8;
  double branch_min_height = 4.0;
  double branch_max_height = 9.0;
  double branch_min_length = 2.0;
  double branch_max_length = 3.5;
  double branch_min_inclination = 30.0 * std::numbers::pi / 180.0;  // from vertical
  double branch_max_inclination = 55.0 * std::numbers::pi / 180.0;
  double branch_min_radius_ratio = 0.35;  // branch base radius / stem radius at attachment
  double branch_max_radius_ratio = 0.60;
  double branch_taper = 0.5;  // top radius / base radius
  int leaf_clusters = 0;

  void validate() const;
};

TreeModel generate_tree(const TreeParams& params, std::uint64_t seed);

struct ScanStation {
  Point3 position = Point3::Zero();  // world frame
  double yaw = 0.0;                  // scanner heading about world z
  RigidTransform world_to_scanner;

  static ScanStation at(const Point3& position, double yaw);
};

struct LabeledCloud {
  PointCloud cloud;
  std::vector<int> labels;
};

/// Ray-casts the model on the scanner's (φ, ϑ) angular grid; the nearest hit
/// wins. Range noise is Gaussian, truncated at 3σ, along the ray. Output is in
/// the scanner-local frame, ordered by (beta, alpha).
LabeledCloud simulate_scan(const TreeModel& model, const ScanStation& station, const ScannerSpec& spec,
                           double noise_sigma, std::uint64_t seed);

struct ScanDataset {
  TreeModel model;
  ScannerSpec spec;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::vector<ScanStation> stations;
  std::vector<LabeledCloud> scans;

  /// Exact transform mapping scan `from`'s local frame into scan `to`'s.
  RigidTransform ground_truth(std::size_t from, std::size_t to) const;
};

struct DatasetParams {
  int n_stations = 3;
  double radius = 15.0;
  double scanner_height = 1.5;
  ScannerSpec spec = ScannerSpec::from_degrees(0.06, 0.06);
  double noise_sigma = 0.005;
  bool random_yaw = true;
};

/// Stations equally spaced on a circle around the stem base, first at azimuth 0.
ScanDataset make_dataset(const TreeModel& model, const DatasetParams& params, std::uint64_t seed);

}  // namespace treereg
