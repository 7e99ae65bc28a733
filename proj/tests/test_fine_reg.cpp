#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "support.hpp"
#include "treereg/coarse_reg.hpp"
#include "treereg/error.hpp"
#include "treereg/eval_metrics.hpp"
#include "treereg/fine_reg.hpp"
#include "treereg/tls_simulator.hpp"

using namespace treereg;
using treereg::test::frobenius;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

using Partition = std::set<std::set<std::uint32_t>>;

Point3 from_angles(double alpha, double beta, double range) {
  return {range * std::cos(beta) * std::cos(alpha), range * std::cos(beta) * std::sin(alpha), range * std::sin(beta)};
}

Layer whole(const PointCloud& cloud) {
  Layer l;
  l.indices.resize(cloud.size());
  std::iota(l.indices.begin(), l.indices.end(), 0U);
  return l;
}

Partition as_partition(const std::vector<Arc>& arcs) {
  Partition p;
  for (const auto& a : arcs) p.insert(std::set<std::uint32_t>(a.indices.begin(), a.indices.end()));
  return p;
}

// All-pairs union-find over the connectivity predicate, written independently.
Partition brute_components(const PointCloud& cloud, const ScannerSpec& spec, std::size_t min_size) {
  const std::size_t n = cloud.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<double> al(n), be(n);
  for (std::size_t i = 0; i < n; ++i) {
    al[i] = std::atan2(cloud[i].y(), cloud[i].x());
    be[i] = std::atan2(cloud[i].z(), std::hypot(cloud[i].x(), cloud[i].y()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double da = std::abs(al[i] - al[j]);
      da = std::min(da, 2 * kPi - da);
      if (da <= 3 * spec.phi && std::abs(be[i] - be[j]) <= 3 * spec.vartheta) parent[find(i)] = find(j);
    }
  }
  std::map<std::size_t, std::set<std::uint32_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[find(i)].insert(static_cast<std::uint32_t>(i));
  Partition p;
  for (auto& [root, g] : groups) {
    if (g.size() >= min_size) p.insert(g);
  }
  return p;
}

ArcFit circle_fit(int layer, double h, const Vec2& c, double r) {
  ArcFit f;
  f.layer = layer;
  f.layer_height = h;
  f.kind = FitKind::Circle;
  f.center = {c.x(), c.y(), h};
  f.radius = r;
  f.tie_points = {f.center};
  return f;
}

ArcFit cylinder_fit(int layer, double h, const Point3& at, const Vec3& dir, double r) {
  ArcFit f;
  f.layer = layer;
  f.layer_height = h;
  f.kind = FitKind::Cylinder;
  f.center = at;
  f.direction = dir.normalized();
  f.radius = r;
  f.tie_points = {at, at + f.direction};
  return f;
}

const ScanDataset& dataset() {
  static const ScanDataset ds = make_dataset(generate_tree(TreeParams{}, 6), DatasetParams{}, 6);
  return ds;
}

}  // namespace

TEST_CASE("slice_layers on a vertical line") {
  std::vector<Point3> pts;
  for (int i = 0; i <= 1000; ++i) pts.emplace_back(1.0, 0.0, 0.01 * i);
  const PointCloud cloud(pts);
  const auto layers = slice_layers(cloud, {});
  REQUIRE(layers.size() == 3);
  const double q[3] = {2.5, 5.0, 7.5};
  for (int k = 0; k < 3; ++k) {
    CHECK(layers[k].height_center == doctest::Approx(q[k]));
    std::vector<std::uint32_t> expected;
    for (std::uint32_t i = 0; i < pts.size(); ++i) {
      if (std::abs(pts[i].z() - layers[k].height_center) <= 0.05) expected.push_back(i);
    }
    CHECK(layers[k].indices == expected);
    CHECK(expected.size() >= 10);
  }
}

TEST_CASE("slice_layers reports an empty crown window") {
  std::vector<Point3> pts;
  for (int i = 0; i <= 600; ++i) pts.emplace_back(1.0, 0.0, 0.01 * i);
  pts.emplace_back(1.0, 0.0, 10.0);
  const auto layers = slice_layers(PointCloud(pts), {});
  REQUIRE(layers.size() == 3);
  CHECK(!layers[0].indices.empty());
  CHECK(layers[2].indices.empty());
}

TEST_CASE("slice_layers rejects short clouds and bad heights") {
  std::vector<Point3> pts;
  for (int i = 0; i < 30; ++i) pts.emplace_back(1.0, 0.0, 0.01 * i);
  CHECK_THROWS_AS(slice_layers(PointCloud(pts), {}), Error);
  SliceParams p;
  p.heights = {1.0, 0.5};
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("layer membership is the z-window predicate") {
  std::mt19937_64 rng(61);
  const PointCloud cloud(test::random_points(rng, 4000, 3.0));
  SliceParams p;
  p.heights = {-1.0, 0.2, 2.0};
  p.thickness = 0.3;
  for (const auto& layer : slice_layers(cloud, p)) {
    std::set<std::uint32_t> in(layer.indices.begin(), layer.indices.end());
    for (std::uint32_t i = 0; i < cloud.size(); ++i) {
      CHECK(in.count(i) == (std::abs(cloud[i].z() - layer.height_center) <= 0.15 ? 1u : 0u));
    }
  }
}

TEST_CASE("separate_arcs: uniform spacing and a 4 phi gap") {
  const ScannerSpec spec = ScannerSpec::from_degrees(0.06, 0.06);
  std::vector<Point3> pts;
  for (int i = 0; i < 30; ++i) pts.push_back(from_angles(0.2 + i * spec.phi, 0.05, 12.0));
  const PointCloud one(pts);
  CHECK(separate_arcs(whole(one), one, spec).size() == 1);

  pts.clear();
  for (int i = 0; i < 15; ++i) pts.push_back(from_angles(0.2 + i * spec.phi, 0.05, 12.0));
  for (int i = 0; i < 15; ++i) pts.push_back(from_angles(0.2 + (14 + 4) * spec.phi + i * spec.phi, 0.05, 12.0));
  const PointCloud two(pts);
  CHECK(separate_arcs(whole(two), two, spec).size() == 2);
}

TEST_CASE("separate_arcs drops small components and counts them") {
  const ScannerSpec spec = ScannerSpec::from_degrees(0.06, 0.06);
  std::vector<Point3> pts;
  for (int i = 0; i < 12; ++i) pts.push_back(from_angles(i * spec.phi, 0.0, 10.0));
  for (int i = 0; i < 4; ++i) pts.push_back(from_angles(1.0 + i * spec.phi, 0.0, 10.0));
  const PointCloud cloud(pts);
  std::size_t dropped = 0;
  CHECK(separate_arcs(whole(cloud), cloud, spec, 10, &dropped).size() == 1);
  CHECK(dropped == 1);
}

TEST_CASE("separate_arcs matches brute-force union-find") {
  std::mt19937_64 rng(62);
  const ScannerSpec spec = ScannerSpec::from_degrees(0.06, 0.06);
  for (int trial = 0; trial < 20; ++trial) {
    // Three interleaved arcs plus scattered points, near the azimuth branch cut on odd trials.
    std::vector<Point3> pts;
    const double a0 = trial % 2 ? kPi - 0.01 : 0.3;
    std::uniform_real_distribution<double> jitter(-1.6 * spec.phi, 1.6 * spec.phi);
    for (int arc = 0; arc < 3; ++arc) {
      const double beta = 0.02 + arc * 3.5 * spec.vartheta;
      for (int i = 0; i < 60; ++i) pts.push_back(from_angles(a0 + 1.5 * i * spec.phi + jitter(rng), beta + 0.3 * jitter(rng), 14.0));
    }
    std::uniform_real_distribution<double> spread(-0.02, 0.02);
    for (int i = 0; i < 80; ++i) pts.push_back(from_angles(a0 + spread(rng), 0.03 + spread(rng), 14.0));
    const PointCloud cloud(pts);
    for (std::size_t min_size : {std::size_t{1}, std::size_t{10}}) {
      CHECK(as_partition(separate_arcs(whole(cloud), cloud, spec, min_size)) == brute_components(cloud, spec, min_size));
    }
  }
}

TEST_CASE("separate_arcs works in the scanner frame of a moved cloud") {
  const ScannerSpec spec = ScannerSpec::from_degrees(0.06, 0.06);
  std::vector<Point3> pts;
  for (int i = 0; i < 15; ++i) pts.push_back(from_angles(0.2 + i * spec.phi, 0.05, 12.0));
  for (int i = 0; i < 15; ++i) pts.push_back(from_angles(0.2 + (18 + i) * spec.phi, 0.05, 12.0));
  std::mt19937_64 rng(63);
  const PointCloud moved = apply_transform(PointCloud(pts), test::random_transform(rng));
  CHECK(separate_arcs(whole(moved), moved, spec).size() == 2);
}

TEST_CASE("arc_tie_points") {
  CircleFit c;
  c.center = {1, 2};
  c.radius = 0.3;
  const auto ct = arc_tie_points(c, 3.0);
  REQUIRE(ct.size() == 1);
  CHECK((ct[0] - Point3(1, 2, 3)).norm() == 0.0);

  CylinderFit v;
  v.axis_point = {0, 0, 1};
  v.direction = Vec3::UnitZ();
  auto vt = arc_tie_points(v, 5.0);
  REQUIRE(vt.size() == 2);
  CHECK((vt[0] - Point3(0, 0, 5)).norm() < 1e-15);
  CHECK((vt[1] - Point3(0, 0, 6)).norm() < 1e-15);

  v.direction = -Vec3::UnitZ();
  vt = arc_tie_points(v, 5.0);
  CHECK((vt[1] - Point3(0, 0, 6)).norm() < 1e-15);

  CylinderFit tilted;
  tilted.axis_point = {0, 0, 0};
  tilted.direction = Vec3(-0.6, 0, -0.8);
  vt = arc_tie_points(tilted, 0.8);
  CHECK((vt[0] - Point3(0.6, 0, 0.8)).norm() < 1e-12);
  CHECK(vt[1].z() > vt[0].z());

  CylinderFit flat;
  flat.direction = Vec3::UnitX();
  try {
    arc_tie_points(flat, 1.0);
    FAIL("horizontal axis accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::HorizontalAxis);
  }
}

TEST_CASE("verify_arcs radius monotonicity") {
  SUBCASE("thinner above is kept") {
    const auto out = verify_arcs({circle_fit(0, 1, {0, 0}, 0.3), cylinder_fit(1, 3, {0, 0, 3}, Vec3::UnitZ(), 0.2)});
    CHECK(out[0].accepted);
    CHECK(out[1].accepted);
  }
  SUBCASE("thicker above is rejected") {
    const auto out = verify_arcs({circle_fit(0, 1, {0, 0}, 0.2), cylinder_fit(1, 3, {0, 0, 3}, Vec3::UnitZ(), 0.5)});
    CHECK(out[0].accepted);
    CHECK_FALSE(out[1].accepted);
    CHECK(!out[1].reject_reason.empty());
  }
  SUBCASE("equal radii are kept") {
    const auto out = verify_arcs({circle_fit(0, 1, {0, 0}, 0.2), cylinder_fit(1, 3, {0, 0, 3}, Vec3::UnitZ(), 0.2)});
    CHECK(out[1].accepted);
  }
  SUBCASE("unlinked cylinders are not compared") {
    const auto out = verify_arcs({circle_fit(0, 1, {0, 0}, 0.3), cylinder_fit(1, 3, {0, 0, 3}, Vec3::UnitZ(), 0.25),
                                  cylinder_fit(2, 5, {5, 5, 5}, Vec3::UnitZ(), 0.1),
                                  cylinder_fit(2, 5, {0, 0, 5}, Vec3::UnitZ(), 0.2)});
    CHECK(out[3].accepted);
    const auto bad = verify_arcs({cylinder_fit(1, 3, {2, 2, 3}, Vec3::UnitZ(), 0.1),
                                  cylinder_fit(2, 5, {2, 2, 5}, Vec3::UnitZ(), 0.3),
                                  cylinder_fit(2, 5, {9, 9, 5}, Vec3::UnitZ(), 0.3)});
    CHECK_FALSE(bad[1].accepted);
    CHECK(bad[2].accepted);
  }
}

TEST_CASE("correspond_fits") {
  const std::vector<ArcFit> ref = {circle_fit(0, 1, {0, 0}, 0.3), cylinder_fit(1, 3, {0, 0, 3}, Vec3::UnitZ(), 0.2),
                                   cylinder_fit(2, 5, {1, 0, 5}, Vec3(1, 0, 1), 0.1)};
  SUBCASE("identical sets pair at zero distance") {
    const auto r = correspond_fits(ref, ref);
    REQUIRE(r.pairs.size() == 3);
    for (const auto& p : r.pairs) {
      CHECK(p.target == p.reference);
      CHECK(p.distance == 0.0);
    }
    CHECK(r.tie_points.size() == 5);
  }
  SUBCASE("a 0.1 m offset still pairs everything") {
    std::vector<ArcFit> moved = ref;
    for (auto& f : moved) {
      f.center += Vec3(0.1, 0, 0);
      for (auto& t : f.tie_points) t += Vec3(0.1, 0, 0);
    }
    const auto r = correspond_fits(moved, ref);
    CHECK(r.pairs.size() == 3);
    for (const auto& p : r.pairs) CHECK(p.distance == doctest::Approx(0.1));
  }
  SUBCASE("a spurious fit 2 m away stays unmatched") {
    std::vector<ArcFit> extra = ref;
    extra.push_back(cylinder_fit(1, 3, {2, 0, 3}, Vec3::UnitZ(), 0.2));
    const auto r = correspond_fits(extra, ref);
    CHECK(r.pairs.size() == 3);
    CHECK(r.unmatched_target == std::vector<std::size_t>{3});
    CHECK(r.unmatched_reference.empty());
  }
  SUBCASE("offset points carry the offset weight") {
    const auto r = correspond_fits(ref, ref, 0.5, 0.05);
    for (std::size_t k = 0; k < r.tie_points.size(); ++k) {
      CHECK((r.tie_points[k].weight == 1.0 || r.tie_points[k].weight == 0.05));
    }
  }
  SUBCASE("crossing cylinders and other layers never pair") {
    const std::vector<ArcFit> a = {cylinder_fit(1, 3, {0, 0, 3}, Vec3::UnitZ(), 0.2)};
    const std::vector<ArcFit> b = {cylinder_fit(1, 3, {0.05, 0, 3}, Vec3(1, 0, 1), 0.2)};
    const std::vector<ArcFit> c = {cylinder_fit(2, 3, {0, 0, 3}, Vec3::UnitZ(), 0.2)};
    CHECK_THROWS_AS(correspond_fits(a, b), Error);
    CHECK_THROWS_AS(correspond_fits(a, c), Error);
  }
}

TEST_CASE("emitted cylinder directions point upwards") {
  const ScanDataset& ds = dataset();
  const PointCloud& cloud = ds.scans[0].cloud;
  const FineParams p;
  const auto layers = slice_layers(cloud, p.slice);
  for (const auto& f : extract_fits(cloud, layers, ds.spec, p)) {
    if (f.kind == FitKind::Cylinder && f.accepted) {
      CHECK(f.direction.z() >= 0.0);
      CHECK(f.tie_points.back().z() > f.tie_points.front().z());
    }
  }
}

TEST_CASE("trunk and branches in the slices of a simulated tree") {
  TreeParams tp;
  tp.branch_count = 2;
  tp.branch_min_height = 5.5;
  tp.branch_max_height = 6.0;
  tp.branch_min_length = 3.0;
  tp.branch_max_length = 3.5;
  tp.branch_min_inclination = 25 * kDeg;
  tp.branch_max_inclination = 30 * kDeg;
  DatasetParams dp;
  const ScanDataset ds = make_dataset(generate_tree(tp, 7), dp, 7);
  const PointCloud& cloud = ds.scans[0].cloud;
  const auto layers = slice_layers(cloud, {});
  CHECK(separate_arcs(layers[0], cloud, ds.spec).size() == 1);
  CHECK(separate_arcs(layers[2], cloud, ds.spec).size() >= 2);
}

TEST_CASE("fine registration of a scan with itself is the identity") {
  const ScanDataset& ds = dataset();
  const FineResult r = fine_register(ds.scans[0].cloud, ds.scans[0].cloud, ds.spec);
  CHECK(rotation_angle_between(r.transform.rotation, Mat3::Identity()) <= 1e-6);
  CHECK(r.transform.translation.norm() <= 1e-3);
}

TEST_CASE("fine registration recovers a 5 cm shift") {
  const ScanDataset& ds = dataset();
  RigidTransform shift;
  shift.translation = {0.03, -0.04, 0.0};
  const PointCloud moved = apply_transform(ds.scans[0].cloud, shift);
  const FineResult r = fine_register(moved, ds.scans[0].cloud, ds.spec);
  CHECK((r.transform.translation + shift.translation).norm() <= 0.005);
  CHECK(r.transform.is_valid());
  CHECK(r.tie_points.size() >= 3);
}

TEST_CASE("fine registration after coarse on a simulated pair") {
  const ScanDataset& ds = dataset();
  const auto& ref = ds.scans[0];
  const auto& tar = ds.scans[2];
  const CoarseResult c = coarse_register(tar.cloud, ref.cloud, ds.spec);
  const PointCloud coarse = apply_transform(tar.cloud, c.transform);
  const FineResult f = fine_register(coarse, ref.cloud, ds.spec);
  const PointCloud fine = apply_transform(coarse, f.transform);
  const auto pairs = branch_pairs_from_labels(ref.cloud, ref.labels, coarse, tar.labels);
  const double ec = evaluate(pairs, ref.cloud, coarse).mean;
  const double ef = evaluate(pairs, ref.cloud, fine).mean;
  MESSAGE("coarse " << ec << " m, fine " << ef << " m");
  CHECK(ef <= 0.05);
  CHECK(ef < ec);
  CHECK(f.rounds_run >= 1);
  CHECK(!f.layers.empty());
}

TEST_CASE("fine params validation") {
  FineParams p;
  CHECK_NOTHROW(p.validate());
  p.rounds = 0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.fit.unit_offset = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
}
