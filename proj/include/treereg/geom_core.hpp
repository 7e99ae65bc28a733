#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <span>
#include <vector>

namespace treereg {

using Point3 = Eigen::Vector3d;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;

/// Azimuth (from the x axis) and elevation (from the xy plane), radians.
struct AnglePair {
  double alpha = 0.0;
  double beta = 0.0;
};

/// Proper rotation plus translation: p' = R p + T.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_axis_angle(const Vec3& axis, double angle,
                                        const Vec3& translation = Vec3::Zero());

  Point3 apply(const Point3& p) const { return rotation * p + translation; }
  Point3 operator*(const Point3& p) const { return apply(p); }

  /// rotationᵀ·rotation = I and det = +1, both to `tol`.
  bool is_valid(double tol = 1e-9) const;
};

RigidTransform compose(const RigidTransform& outer, const RigidTransform& inner);
RigidTransform inverse(const RigidTransform& t);

/// Geodesic angle of R_aᵀ R_b, radians.
double rotation_angle_between(const Mat3& a, const Mat3& b);

/// Ordered 3D points in meters. `sensor_pose` maps the scanner-local frame into
/// the frame the points are expressed in (identity for a raw scan); it lets
/// angle-based operations keep working after the cloud has been transformed.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Point3> points,
                      RigidTransform sensor_pose = RigidTransform::identity());

  const std::vector<Point3>& points() const noexcept { return points_; }
  const Point3& operator[](std::size_t i) const { return points_[i]; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  auto begin() const noexcept { return points_.begin(); }
  auto end() const noexcept { return points_.end(); }

  const RigidTransform& sensor_pose() const noexcept { return sensor_pose_; }

  /// Fills the per-point (alpha, beta) cache in the scanner-local frame.
  /// Degenerate points get NaN angles.
  void cache_angles();
  bool has_cached_angles() const noexcept { return !angles_.empty(); }
  /// Cached angles if present, otherwise computed on the fly.
  std::vector<AnglePair> scanner_angles() const;

 private:
  std::vector<Point3> points_;
  RigidTransform sensor_pose_;
  std::vector<AnglePair> angles_;
};

struct TiePointPair {
  Point3 target_point = Point3::Zero();
  Point3 reference_point = Point3::Zero();
  double weight = 1.0;
};

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t);

/// Weighted least-squares rigid alignment mapping target points onto reference
/// points (Kabsch/Challis). Throws TooFewPairs below 3 pairs and
/// DegenerateGeometry when the rotation is not unique.
RigidTransform kabsch_svd(std::span<const TiePointPair> pairs);

/// RMS of ‖R t + T − r‖ over the pairs (unweighted).
double rms_residual(std::span<const TiePointPair> pairs, const RigidTransform& t);

Vec2 horizontal_centroid(const PointCloud& cloud);

Point3 rotate_point_about_vertical_axis(const Point3& p, const Vec2& center_xy, double angle);
PointCloud rotate_about_vertical_axis(const PointCloud& cloud, const Vec2& center_xy, double angle);
/// The same motion as a RigidTransform.
RigidTransform vertical_axis_rotation(const Vec2& center_xy, double angle);

}  // namespace treereg
