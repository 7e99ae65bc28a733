#include "treereg/fitting.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "treereg/error.hpp"

namespace treereg {

namespace {

bool collinear_2d(std::span<const Vec2> pts) {
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  const double big = es.eigenvalues()(1);
  return !(big > 0.0) || es.eigenvalues()(0) <= 1e-12 * big;
}

struct AxisState {
  Point3 point;
  Vec3 dir;
  double radius;
};

/// Orthonormal pair spanning the plane perpendicular to d.
std::pair<Vec3, Vec3> plane_basis(const Vec3& d) {
  const Vec3 u = d.unitOrthogonal();
  return {u, d.cross(u)};
}

double objective(std::span<const Point3> pts, const AxisState& s) {
  double f = 0.0;
  for (const auto& p : pts) {
    const Vec3 w = p - s.point;
    const double r = (w - w.dot(s.dir) * s.dir).norm() - s.radius;
    f += r * r;
  }
  return f;
}

/// Projected-circle seed for a given direction, or nullopt if the projection is degenerate.
std::optional<std::pair<AxisState, double>> seed_for_direction(std::span<const Point3> pts, const Point3& centroid,
                                                               const Vec3& d) {
  const auto [u, v] = plane_basis(d);
  std::vector<Vec2> proj;
  proj.reserve(pts.size());
  for (const auto& p : pts) {
    const Vec3 w = p - centroid;
    proj.emplace_back(w.dot(u), w.dot(v));
  }
  try {
    const CircleFit c = fit_circle_taubin(proj);
    if (!std::isfinite(c.radius) || !(c.radius > 0.0)) return std::nullopt;
    AxisState s{centroid + c.center.x() * u + c.center.y() * v, d, c.radius};
    return std::pair{s, c.rms};
  } catch (const Error&) {
    return std::nullopt;
  }
}

struct Refined {
  AxisState state;
  double f;
  bool converged;
  int iterations;
  std::vector<double> history;
};

Refined refine(std::span<const Point3> pts, const Point3& centroid, AxisState s, const CylinderFitOptions& opt) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd jac(n, 5);
  Eigen::VectorXd res(n);
  double f = objective(pts, s);
  Refined out{s, f, false, 0, {f}};

  for (int it = 0; it < opt.max_iterations; ++it) {
    const auto [u, v] = plane_basis(s.dir);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3 w = pts[static_cast<std::size_t>(i)] - s.point;
      const double wd = w.dot(s.dir);
      const Vec3 q = w - wd * s.dir;
      const double dist = q.norm();
      const Vec3 nrm = dist > 0.0 ? Vec3(q / dist) : Vec3::Zero();
      res(i) = dist - s.radius;
      jac(i, 0) = -nrm.dot(u);
      jac(i, 1) = -nrm.dot(v);
      jac(i, 2) = -wd * nrm.dot(u);
      jac(i, 3) = -wd * nrm.dot(v);
      jac(i, 4) = -1.0;
    }
    const Eigen::VectorXd grad = jac.transpose() * res;
    out.iterations = it;
    if (grad.norm() < opt.gradient_tolerance) {
      out.converged = true;
      break;
    }
    const Eigen::Matrix<double, 5, 5> jtj = jac.transpose() * jac;
    Eigen::Matrix<double, 5, 1> step = jtj.ldlt().solve(-grad);
    if (!step.allFinite()) break;

    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving) {
      AxisState trial;
      trial.point = s.point + step(0) * u + step(1) * v;
      trial.dir = (s.dir + step(2) * u + step(3) * v).normalized();
      trial.radius = s.radius + step(4);
      // Keep the axis anchor next to the data; the objective does not depend on it.
      trial.point += (centroid - trial.point).dot(trial.dir) * trial.dir;
      const double ft = objective(pts, trial);
      if (ft <= f) {
        const double prev = f;
        s = trial;
        f = ft;
        accepted = true;
        out.history.push_back(f);
        // Step collapsed to rounding level: stationary point reached.
        if (prev - ft <= 1e-15 * std::max(prev, 1e-300) && step.norm() < 1e-12) out.converged = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent direction left at double precision.
      out.converged = true;
      break;
    }
    if (out.converged) break;
  }
  out.state = s;
  out.f = f;
  return out;
}

}  // namespace

CircleFit fit_circle_taubin(std::span<const Vec2> points) {
  if (points.size() < 3) {
    throw Error(ErrorCode::TooFewPoints, fmt::format("circle fit needs at least 6 points, got {}", points.size()));
  }
  if (collinear_2d(points)) throw Error(ErrorCode::CollinearPoints, "circle fit input is collinear");
  if (points.size() < 6) {
    throw Error(ErrorCode::TooFewPoints, fmt::format("circle fit needs at least 6 points, got {}", points.size()));
  }
  const auto n = static_cast<double>(points.size());
  Vec2 mean = Vec2::Zero();
  for (const auto& p : points) mean += p;
  mean /= n;

  double mxx = 0, myy = 0, mxy = 0, mxz = 0, myz = 0, mzz = 0;
  for (const auto& p : points) {
    const double xi = p.x() - mean.x();
    const double yi = p.y() - mean.y();
    const double zi = xi * xi + yi * yi;
    mxy += xi * yi;
    mxx += xi * xi;
    myy += yi * yi;
    mxz += xi * zi;
    myz += yi * zi;
    mzz += zi * zi;
  }
  mxx /= n;
  myy /= n;
  mxy /= n;
  mxz /= n;
  myz /= n;
  mzz /= n;

  const double mz = mxx + myy;
  const double cov_xy = mxx * myy - mxy * mxy;
  const double var_z = mzz - mz * mz;
  const double a3 = 4.0 * mz;
  const double a2 = -3.0 * mz * mz - mzz;
  const double a1 = var_z * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz;
  const double a0 = mxz * (mxz * myy - myz * mxy) + myz * (myz * mxx - mxz * mxy) - var_z * cov_xy;
  const double a22 = a2 + a2;
  const double a33 = a3 + a3 + a3;

  double x = 0.0;
  double y = a0;
  for (int iter = 0; iter < 99; ++iter) {
    const double dy = a1 + x * (a22 + a33 * x);
    const double xnew = x - y / dy;
    if (xnew == x || !std::isfinite(xnew)) break;
    const double ynew = a0 + xnew * (a1 + xnew * (a2 + xnew * a3));
    if (std::abs(ynew) >= std::abs(y)) break;
    x = xnew;
    y = ynew;
  }

  const double det = x * x - x * mz + cov_xy;
  if (det == 0.0 || !std::isfinite(det)) throw Error(ErrorCode::CollinearPoints, "circle fit is singular");
  const double cx = (mxz * (myy - x) - myz * mxy) / det / 2.0;
  const double cy = (myz * (mxx - x) - mxz * mxy) / det / 2.0;

  CircleFit fit;
  fit.center = Vec2(cx + mean.x(), cy + mean.y());
  fit.radius = std::sqrt(cx * cx + cy * cy + mz);
  double acc = 0.0;
  for (const auto& p : points) {
    const double r = (p - fit.center).norm() - fit.radius;
    acc += r * r;
  }
  fit.rms = std::sqrt(acc / n);
  return fit;
}

Vec3 normalize_axis_direction(const Vec3& d) {
  const Vec3 u = d.normalized();
  double sign = 1.0;
  if (std::abs(u.z()) >= 1e-6) {
    sign = u.z() < 0.0 ? -1.0 : 1.0;
  } else if (u.x() != 0.0) {
    sign = u.x() < 0.0 ? -1.0 : 1.0;
  } else {
    sign = u.y() < 0.0 ? -1.0 : 1.0;
  }
  return sign * u;
}

Point3 CylinderFit::point_at_height(double z) const {
  return axis_point + ((z - axis_point.z()) / direction.z()) * direction;
}

double distance_to_axis(const CylinderFit& fit, const Point3& p) {
  const Vec3 w = p - fit.axis_point;
  return (w - w.dot(fit.direction) * fit.direction).norm();
}

CylinderFit fit_cylinder_lsq(std::span<const Point3> points, const CylinderFitOptions& options) {
  if (points.size() < 9) {
    throw Error(ErrorCode::TooFewPoints, fmt::format("cylinder fit needs at least 9 points, got {}", points.size()));
  }
  Point3 centroid = Point3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) cov += (p - centroid) * (p - centroid).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const Vec3 ev = es.eigenvalues();
  if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) {
    throw Error(ErrorCode::DegenerateConfiguration, "cylinder fit input is collinear or coincident");
  }
  double extent = 0.0;
  for (const auto& p : points) extent = std::max(extent, (p - centroid).norm());

  struct Seed {
    AxisState state;
    double rms;
  };
  std::vector<Seed> seeds;
  for (int i = -1; i <= 1; ++i) {
    for (int j = -1; j <= 1; ++j) {
      for (int k = -1; k <= 1; ++k) {
        if (i == 0 && j == 0 && k == 0) continue;
        const Vec3 d = Vec3(i, j, k).normalized();
        if (auto s = seed_for_direction(points, centroid, d)) seeds.push_back({s->first, s->second});
      }
    }
  }
  // Long pieces have their axis along the major eigenvector, often far from every quantized direction.
  for (int e = 0; e < 3; ++e) {
    if (auto s = seed_for_direction(points, centroid, es.eigenvectors().col(e).normalized())) {
      seeds.push_back({s->first, s->second});
    }
  }
  if (seeds.empty()) throw Error(ErrorCode::DegenerateConfiguration, "no seed direction yields a circle");
  std::stable_sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) { return a.rms < b.rms; });

  // Refine the best few distinct axes (antipodal seeds describe the same line).
  std::vector<Vec3> tried;
  std::optional<Refined> best;
  for (const auto& seed : seeds) {
    if (static_cast<int>(tried.size()) >= std::max(options.refined_seeds, 1)) break;
    const bool dup = std::any_of(tried.begin(), tried.end(),
                                 [&](const Vec3& t) { return std::abs(t.dot(seed.state.dir)) > 1.0 - 1e-9; });
    if (dup) continue;
    tried.push_back(seed.state.dir);
    Refined r = refine(points, centroid, seed.state, options);
    if (!best || r.f < best->f) best = std::move(r);
  }

  const AxisState& s = best->state;
  if (!std::isfinite(s.radius) || !(s.radius > 0.0) || s.radius > 1e3 * std::max(extent, 1e-9)) {
    throw Error(ErrorCode::DegenerateConfiguration, "cylinder fit diverged to an unbounded radius");
  }
  CylinderFit fit;
  fit.direction = normalize_axis_direction(s.dir);
  fit.axis_point = s.point;
  fit.radius = s.radius;
  fit.rms = std::sqrt(best->f / static_cast<double>(points.size()));
  fit.converged = best->converged;
  fit.iterations = best->iterations;
  fit.objective_history = std::move(best->history);
  return fit;
}

}  // namespace treereg
