#include "treereg/geom_core.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

#include "treereg/error.hpp"
#include "treereg/spherical_projection.hpp"

namespace treereg {

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle, const Vec3& translation) {
  RigidTransform t;
  t.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  t.translation = translation;
  return t;
}

bool RigidTransform::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).norm();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

RigidTransform compose(const RigidTransform& outer, const RigidTransform& inner) {
  RigidTransform t;
  t.rotation = outer.rotation * inner.rotation;
  t.translation = outer.rotation * inner.translation + outer.translation;
  return t;
}

RigidTransform inverse(const RigidTransform& t) {
  RigidTransform inv;
  inv.rotation = t.rotation.transpose();
  inv.translation = -(inv.rotation * t.translation);
  return inv;
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const double c = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

PointCloud::PointCloud(std::vector<Point3> points, RigidTransform sensor_pose)
    : points_(std::move(points)), sensor_pose_(std::move(sensor_pose)) {}

void PointCloud::cache_angles() {
  if (has_cached_angles() || points_.empty()) return;
  angles_ = scanner_angles();
}

std::vector<AnglePair> PointCloud::scanner_angles() const {
  if (has_cached_angles()) return angles_;
  std::vector<AnglePair> out;
  out.reserve(points_.size());
  const RigidTransform to_local = inverse(sensor_pose_);
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  for (const auto& p : points_) {
    const auto a = try_spherical_angles(to_local.apply(p));
    out.push_back(a ? *a : AnglePair{kNaN, kNaN});
  }
  return out;
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
  std::vector<Point3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) out.push_back(t.apply(p));
  return PointCloud(std::move(out), compose(t, cloud.sensor_pose()));
}

RigidTransform kabsch_svd(std::span<const TiePointPair> pairs) {
  if (pairs.size() < 3) {
    throw Error(ErrorCode::TooFewPairs, "rigid alignment needs at least 3 tie-point pairs");
  }
  double wsum = 0.0;
  Vec3 ct = Vec3::Zero();
  Vec3 cr = Vec3::Zero();
  for (const auto& p : pairs) {
    if (!p.target_point.allFinite() || !p.reference_point.allFinite() || !(p.weight >= 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "tie points must be finite with nonnegative weight");
    }
    wsum += p.weight;
    ct += p.weight * p.target_point;
    cr += p.weight * p.reference_point;
  }
  if (wsum <= 0.0) throw Error(ErrorCode::TooFewPairs, "all tie-point weights are zero");
  ct /= wsum;
  cr /= wsum;

  Mat3 h = Mat3::Zero();
  double spread = 0.0;
  for (const auto& p : pairs) {
    const Vec3 a = p.target_point - ct;
    const Vec3 b = p.reference_point - cr;
    h += p.weight * a * b.transpose();
    spread += p.weight * (a.squaredNorm() + b.squaredNorm());
  }

  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  // Rank < 2 leaves the rotation about the common line (or everything) free.
  if (spread <= 0.0 || s(1) <= 1e-10 * std::max(s(0), spread)) {
    throw Error(ErrorCode::DegenerateGeometry, "tie points are collinear or coincident");
  }
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;

  RigidTransform t;
  t.rotation = v * d * u.transpose();
  t.translation = cr - t.rotation * ct;
  return t;
}

double rms_residual(std::span<const TiePointPair> pairs, const RigidTransform& t) {
  if (pairs.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& p : pairs) acc += (t.apply(p.target_point) - p.reference_point).squaredNorm();
  return std::sqrt(acc / static_cast<double>(pairs.size()));
}

Vec2 horizontal_centroid(const PointCloud& cloud) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "horizontal centroid of an empty cloud");
  Vec2 acc = Vec2::Zero();
  for (const auto& p : cloud) acc += p.head<2>();
  return acc / static_cast<double>(cloud.size());
}

Point3 rotate_point_about_vertical_axis(const Point3& p, const Vec2& c, double angle) {
  if (angle == 0.0) return p;
  const double cs = std::cos(angle);
  const double sn = std::sin(angle);
  const double dx = p.x() - c.x();
  const double dy = p.y() - c.y();
  return {c.x() + cs * dx - sn * dy, c.y() + sn * dx + cs * dy, p.z()};
}

PointCloud rotate_about_vertical_axis(const PointCloud& cloud, const Vec2& center_xy, double angle) {
  if (angle == 0.0) return cloud;
  std::vector<Point3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) out.push_back(rotate_point_about_vertical_axis(p, center_xy, angle));
  return PointCloud(std::move(out), compose(vertical_axis_rotation(center_xy, angle), cloud.sensor_pose()));
}

RigidTransform vertical_axis_rotation(const Vec2& c, double angle) {
  RigidTransform t;
  if (angle == 0.0) return t;
  const double cs = std::cos(angle);
  const double sn = std::sin(angle);
  t.rotation << cs, -sn, 0.0, sn, cs, 0.0, 0.0, 0.0, 1.0;
  const Vec3 center(c.x(), c.y(), 0.0);
  t.translation = center - t.rotation * center;
  return t;
}

}  // namespace treereg
