#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "treereg/geom_core.hpp"

namespace treereg::test {

inline std::vector<Point3> random_points(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Point3> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(u(rng), u(rng), u(rng));
  return out;
}

inline RigidTransform random_transform(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> angle(-3.1, 3.1);
  std::uniform_real_distribution<double> shift(-5.0, 5.0);
  const Vec3 axis = Vec3(g(rng), g(rng), g(rng)).normalized();
  return RigidTransform::from_axis_angle(axis, angle(rng), Vec3(shift(rng), shift(rng), shift(rng)));
}

inline double frobenius(const Mat3& a, const Mat3& b) { return (a - b).norm(); }

/// Points on a cylinder surface: `length` along `dir` from `base`, angles in
/// [0, span), isotropic Gaussian noise of `sigma`.
inline std::vector<Point3> cylinder_points(std::mt19937_64& rng, const Point3& base, const Vec3& dir, double radius,
                                           double length, std::size_t n, double span, double sigma = 0.0) {
  const Vec3 d = dir.normalized();
  const Vec3 u = d.unitOrthogonal();
  const Vec3 v = d.cross(u);
  std::uniform_real_distribution<double> t(0.0, length);
  std::uniform_real_distribution<double> a(0.0, span);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Point3> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double th = a(rng);
    Point3 p = base + t(rng) * d + radius * (std::cos(th) * u + std::sin(th) * v);
    if (sigma > 0.0) p += sigma * Vec3(g(rng), g(rng), g(rng));
    out.push_back(p);
  }
  return out;
}

/// Angle between two lines (direction sign ignored), radians.
inline double line_angle(const Vec3& a, const Vec3& b) {
  const Vec3 u = a.normalized();
  const Vec3 w = b.normalized();
  return std::atan2(u.cross(w).norm(), std::abs(u.dot(w)));
}

}  // namespace treereg::test
