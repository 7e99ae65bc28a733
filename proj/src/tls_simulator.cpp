#include "treereg/tls_simulator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "treereg/error.hpp"

namespace treereg {

namespace {

constexpr double kPi = std::numbers::pi;

/// Distance from (t, rho) to the segment (0, r0)–(len, r1) in the axial half-plane.
double segment_distance_2d(double t, double rho, double len, double r0, double r1) {
  const Vec2 a(0.0, r0);
  const Vec2 b(len, r1);
  const Vec2 p(t, rho);
  const Vec2 ab = b - a;
  const double u = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + u * ab)).norm();
}

struct Bounds {
  Point3 center;
  double radius;
};

}  // namespace

std::optional<double> Frustum::intersect(const Point3& origin, const Vec3& dir, double min_s) const {
  const double k = (top_radius - base_radius) / length;
  const Vec3 w = origin - base;
  const double wa = w.dot(axis);
  const double da = dir.dot(axis);
  const Vec3 wp = w - wa * axis;
  const Vec3 dp = dir - da * axis;
  const double r_w = base_radius + k * wa;
  const double qa = dp.squaredNorm() - k * k * da * da;
  const double qb = 2.0 * (wp.dot(dp) - k * da * r_w);
  const double qc = wp.squaredNorm() - r_w * r_w;

  double roots[2];
  int nroots = 0;
  if (std::abs(qa) < 1e-15) {
    if (std::abs(qb) < 1e-15) return std::nullopt;
    roots[nroots++] = -qc / qb;
  } else {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    // Numerically stable pair.
    const double q = -0.5 * (qb + std::copysign(sq, qb));
    roots[nroots++] = q / qa;
    if (q != 0.0) roots[nroots++] = qc / q;
    if (nroots == 2 && roots[0] > roots[1]) std::swap(roots[0], roots[1]);
  }
  for (int i = 0; i < nroots; ++i) {
    const double s = roots[i];
    if (!(s > min_s)) continue;
    const double t = wa + s * da;
    if (t < 0.0 || t > length) continue;
    if (base_radius + k * t <= 0.0) continue;
    return s;
  }
  return std::nullopt;
}

double Frustum::surface_distance(const Point3& p) const {
  const Vec3 w = p - base;
  const double t = w.dot(axis);
  const double rho = (w - t * axis).norm();
  return segment_distance_2d(t, rho, length, base_radius, top_radius);
}

Frustum Frustum::transformed(const RigidTransform& tr) const {
  Frustum f = *this;
  f.base = tr.apply(base);
  f.axis = tr.rotation * axis;
  return f;
}

std::optional<double> Sphere::intersect(const Point3& origin, const Vec3& dir, double min_s) const {
  const Vec3 oc = origin - center;
  const double b = oc.dot(dir);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  for (const double s : {-b - sq, -b + sq}) {
    if (s > min_s) return s;
  }
  return std::nullopt;
}

TreeModel TreeModel::transformed(const RigidTransform& t) const {
  TreeModel m;
  for (const auto& f : trunk) m.trunk.push_back(f.transformed(t));
  for (const auto& f : branches) m.branches.push_back(f.transformed(t));
  for (auto s : leaves) {
    s.center = t.apply(s.center);
    m.leaves.push_back(s);
  }
  return m;
}

double TreeModel::surface_distance(int id, const Point3& p) const {
  double best = std::numeric_limits<double>::infinity();
  if (id == kTrunkId) {
    for (const auto& f : trunk) best = std::min(best, f.surface_distance(p));
  } else if (const Frustum* b = branch(id)) {
    best = b->surface_distance(p);
  } else {
    for (const auto& s : leaves) {
      if (s.id == id) best = std::min(best, s.surface_distance(p));
    }
  }
  return best;
}

const Frustum* TreeModel::branch(int id) const {
  for (const auto& b : branches) {
    if (b.id == id) return &b;
  }
  return nullptr;
}

void TreeParams::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); };
  if (!(height > 0.0)) fail("tree height must be positive");
  if (!(base_radius > 0.0 && top_radius > 0.0)) fail("stem radii must be positive");
  if (top_radius > base_radius) fail("stem radius must not increase with height");
  if (trunk_segments < 1) fail("stem needs at least one segment");
  if (branch_count < 0) fail("branch count must be nonnegative");
  if (branch_count > 0) {
    if (!(branch_min_height >= 0.0 && branch_min_height <= branch_max_height && branch_max_height <= height)) {
      fail("branch attachment heights must lie within the stem");
    }
    if (!(branch_min_length > 0.0 && branch_min_length <= branch_max_length)) fail("invalid branch length range");
    if (!(branch_min_inclination >= 0.0 && branch_min_inclination <= branch_max_inclination &&
          branch_max_inclination < kPi / 2.0)) {
      fail("branch inclinations must lie in [0, 90) degrees");
    }
    if (!(branch_min_radius_ratio > 0.0 && branch_min_radius_ratio <= branch_max_radius_ratio &&
          branch_max_radius_ratio <= 1.0)) {
      fail("branch radius ratios must lie in (0, 1]");
    }
    if (!(branch_taper > 0.0 && branch_taper <= 1.0)) fail("branch taper must lie in (0, 1]");
  }
  if (leaf_clusters < 0) fail("leaf cluster count must be nonnegative");
}

TreeModel generate_tree(const TreeParams& p, std::uint64_t seed) {
  p.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  TreeModel model;
  const double bend_azimuth = uniform(0.0, 2.0 * kPi);
  const Vec3 bend_dir(std::cos(bend_azimuth), std::sin(bend_azimuth), 0.0);
  auto centerline = [&](double z) -> Point3 {
    const double u = z / p.height;
    return p.base + Vec3(0.0, 0.0, z) + p.bend * u * u * bend_dir;
  };
  auto stem_radius = [&](double z) { return p.base_radius + (p.top_radius - p.base_radius) * z / p.height; };

  for (int s = 0; s < p.trunk_segments; ++s) {
    const double z0 = p.height * s / p.trunk_segments;
    const double z1 = p.height * (s + 1) / p.trunk_segments;
    const Point3 a = centerline(z0);
    const Point3 b = centerline(z1);
    Frustum f;
    f.id = kTrunkId;
    f.base = a;
    f.length = (b - a).norm();
    f.axis = (b - a) / f.length;
    f.base_radius = stem_radius(z0);
    f.top_radius = stem_radius(z1);
    model.trunk.push_back(f);
  }

  const double azimuth0 = uniform(0.0, 2.0 * kPi);
  constexpr double kGolden = 137.5 * kPi / 180.0;
  for (int k = 0; k < p.branch_count; ++k) {
    const double z = p.branch_min_height +
                     (p.branch_max_height - p.branch_min_height) * (k + uniform(0.2, 0.8)) / p.branch_count;
    const double azimuth = azimuth0 + k * kGolden + uniform(-20.0, 20.0) * kPi / 180.0;
    const double inclination = uniform(p.branch_min_inclination, p.branch_max_inclination);
    Frustum f;
    f.id = k + 1;
    f.base = centerline(z);
    f.axis = Vec3(std::sin(inclination) * std::cos(azimuth), std::sin(inclination) * std::sin(azimuth),
                  std::cos(inclination));
    f.length = uniform(p.branch_min_length, p.branch_max_length);
    f.base_radius = stem_radius(z) * uniform(p.branch_min_radius_ratio, p.branch_max_radius_ratio);
    f.top_radius = f.base_radius * p.branch_taper;
    model.branches.push_back(f);
  }

  for (int k = 0; k < p.leaf_clusters && !model.branches.empty(); ++k) {
    const auto& b = model.branches[static_cast<std::size_t>(k) % model.branches.size()];
    const double t = uniform(0.5, 1.0) * b.length;
    const double az = uniform(0.0, 2.0 * kPi);
    Vec3 side = b.axis.unitOrthogonal();
    side = Eigen::AngleAxisd(az, b.axis) * side;
    Sphere s;
    s.id = kFirstLeafId + k;
    s.radius = uniform(0.02, 0.05);
    s.center = b.base + t * b.axis + (b.radius_at(t) + uniform(0.1, 0.4)) * side;
    model.leaves.push_back(s);
  }
  return model;
}

ScanStation ScanStation::at(const Point3& position, double yaw) {
  ScanStation s;
  s.position = position;
  s.yaw = yaw;
  const Mat3 r = Eigen::AngleAxisd(-yaw, Vec3::UnitZ()).toRotationMatrix();
  s.world_to_scanner.rotation = r;
  s.world_to_scanner.translation = -(r * position);
  return s;
}

LabeledCloud simulate_scan(const TreeModel& model, const ScanStation& station, const ScannerSpec& spec,
                           double noise_sigma, std::uint64_t seed) {
  spec.validate();
  if (noise_sigma < 0.0) throw Error(ErrorCode::InvalidArgument, "noise sigma must be nonnegative");
  const TreeModel local = model.transformed(station.world_to_scanner);

  struct Prim {
    const Frustum* frustum = nullptr;
    const Sphere* sphere = nullptr;
    Bounds bounds;
    int id;
  };
  std::vector<Prim> prims;
  std::vector<Point3> samples;
  auto add_frustum = [&](const Frustum& f) {
    const double rmax = std::max(f.base_radius, f.top_radius);
    prims.push_back({&f, nullptr, {f.base + 0.5 * f.length * f.axis, 0.5 * f.length + rmax}, f.id});
    for (const Point3& end : {f.base, f.top()}) {
      for (int d = 0; d < 3; ++d) {
        for (const double sgn : {-1.0, 1.0}) samples.push_back(end + sgn * rmax * Vec3::Unit(d));
      }
    }
  };
  for (const auto& f : local.trunk) add_frustum(f);
  for (const auto& f : local.branches) add_frustum(f);
  for (const auto& s : local.leaves) {
    prims.push_back({nullptr, &s, {s.center, s.radius}, s.id});
    for (int d = 0; d < 3; ++d) {
      for (const double sgn : {-1.0, 1.0}) samples.push_back(s.center + sgn * s.radius * Vec3::Unit(d));
    }
  }
  for (const auto& pr : prims) {
    if (pr.bounds.center.norm() <= pr.bounds.radius) {
      throw Error(ErrorCode::InvalidArgument, "scanner station lies inside a primitive's bounds");
    }
  }

  // Angular bounding box of the model, unwrapped around its circular mean azimuth.
  double ss = 0.0;
  double cs = 0.0;
  for (const auto& q : samples) {
    const double a = std::atan2(q.y(), q.x());
    ss += std::sin(a);
    cs += std::cos(a);
  }
  const double center = std::atan2(ss, cs);
  double amin = std::numeric_limits<double>::infinity();
  double amax = -amin;
  double bmin = amin;
  double bmax = -amin;
  for (const auto& q : samples) {
    const double a = center + wrap_angle(std::atan2(q.y(), q.x()) - center);
    const double b = std::atan2(q.z(), std::hypot(q.x(), q.y()));
    amin = std::min(amin, a);
    amax = std::max(amax, a);
    bmin = std::min(bmin, b);
    bmax = std::max(bmax, b);
  }
  const auto k0 = static_cast<long>(std::floor(amin / spec.phi)) - 2;
  const auto k1 = static_cast<long>(std::ceil(amax / spec.phi)) + 2;
  const auto j0 = static_cast<long>(std::floor(bmin / spec.vartheta)) - 2;
  const auto j1 = static_cast<long>(std::ceil(bmax / spec.vartheta)) + 2;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto range_noise = [&]() {
    if (noise_sigma == 0.0) return 0.0;
    double n;
    do {
      n = gauss(rng);
    } while (std::abs(n) > 3.0);
    return n * noise_sigma;
  };

  LabeledCloud out;
  std::vector<Point3> pts;
  const Point3 origin = Point3::Zero();
  for (long j = j0; j <= j1; ++j) {
    const double beta = static_cast<double>(j) * spec.vartheta;
    if (std::abs(beta) >= kPi / 2.0) continue;
    const double cb = std::cos(beta);
    const double sb = std::sin(beta);
    for (long k = k0; k <= k1; ++k) {
      const double alpha = static_cast<double>(k) * spec.phi;
      const Vec3 dir(cb * std::cos(alpha), cb * std::sin(alpha), sb);
      double best = std::numeric_limits<double>::infinity();
      int label = -1;
      for (const auto& pr : prims) {
        const double along = pr.bounds.center.dot(dir);
        if (along + pr.bounds.radius < 0.0) continue;
        if ((pr.bounds.center - along * dir).squaredNorm() > pr.bounds.radius * pr.bounds.radius) continue;
        const auto s = pr.frustum ? pr.frustum->intersect(origin, dir) : pr.sphere->intersect(origin, dir);
        if (s && *s < best) {
          best = *s;
          label = pr.id;
        }
      }
      if (label < 0) continue;
      pts.push_back((best + range_noise()) * dir);
      out.labels.push_back(label);
    }
  }
  if (pts.empty()) throw Error(ErrorCode::NoIntersections, "no scanner ray hit the model");
  out.cloud = PointCloud(std::move(pts));
  return out;
}

RigidTransform ScanDataset::ground_truth(std::size_t from, std::size_t to) const {
  return compose(stations.at(to).world_to_scanner, inverse(stations.at(from).world_to_scanner));
}

ScanDataset make_dataset(const TreeModel& model, const DatasetParams& params, std::uint64_t seed) {
  if (params.n_stations < 2) throw Error(ErrorCode::InvalidArgument, "a dataset needs at least two stations");
  if (!(params.radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "station radius must be positive");
  if (model.trunk.empty()) throw Error(ErrorCode::InvalidSpec, "tree model has no stem");
  ScanDataset ds;
  ds.model = model;
  ds.spec = params.spec;
  ds.noise_sigma = params.noise_sigma;
  ds.seed = seed;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Point3 stem = model.trunk.front().base;
  for (int k = 0; k < params.n_stations; ++k) {
    const double az = 2.0 * kPi * k / params.n_stations;
    const Point3 pos(stem.x() + params.radius * std::cos(az), stem.y() + params.radius * std::sin(az),
                     stem.z() + params.scanner_height);
    const double yaw = params.random_yaw ? 2.0 * kPi * unit(rng) : 0.0;
    ds.stations.push_back(ScanStation::at(pos, yaw));
  }
  for (std::size_t k = 0; k < ds.stations.size(); ++k) {
    const std::uint64_t scan_seed = seed * 1000003ULL + k + 1;
    ds.scans.push_back(simulate_scan(model, ds.stations[k], params.spec, params.noise_sigma, scan_seed));
  }
  return ds;
}

}  // namespace treereg
