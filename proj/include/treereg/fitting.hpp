#pragma once

#include <span>
#include <vector>

#include "treereg/geom_core.hpp"

namespace treereg {

struct CircleFit {
  Vec2 center = Vec2::Zero();  // (X0, Y0)
  double radius = 0.0;
  double rms = 0.0;  // RMS radial residual
};

/// Taubin algebraic circle fit (Newton on the characteristic polynomial).
/// Throws TooFewPoints below 6 points and CollinearPoints.
CircleFit fit_circle_taubin(std::span<const Vec2> points);

struct CylinderFit {
  Point3 axis_point = Point3::Zero();  // (x0, y0, z0)
  Vec3 direction = Vec3::UnitZ();      // (a, b, c), unit, c >= 0
  double radius = 0.0;
  double rms = 0.0;
  bool converged = false;
  int iterations = 0;
  /// Sum of squared residuals after every accepted step (starts with the seed).
  std::vector<double> objective_history;

  /// Point on the axis with the given z. Undefined for horizontal axes.
  Point3 point_at_height(double z) const;
};

struct CylinderFitOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-10;
  /// Number of best quantized seed directions refined independently.
  int refined_seeds = 3;
};

/// Orthogonal-distance least-squares cylinder: minimises Σ (dist(p, axis) − R)².
/// Seeds from the 26 quantized directions and the three covariance eigenvectors,
/// scored by projected-circle residual, then Gauss–Newton with backtracking. Throws TooFewPoints (< 9) and
/// DegenerateConfiguration; non-convergence is reported via `converged`.
CylinderFit fit_cylinder_lsq(std::span<const Point3> points, const CylinderFitOptions& options = {});

/// Orients a unit direction so c > 0, or (|c| < 1e-6) a > 0, then b > 0.
Vec3 normalize_axis_direction(const Vec3& d);

/// Distance from p to the fitted cylinder's axis line.
double distance_to_axis(const CylinderFit& fit, const Point3& p);

}  // namespace treereg
