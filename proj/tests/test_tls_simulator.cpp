#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "treereg/error.hpp"
#include "treereg/tls_simulator.hpp"

using namespace treereg;

namespace {

constexpr double kPi = std::numbers::pi;

TreeParams bare_stem() {
  TreeParams p;
  p.branch_count = 0;
  return p;
}

PointCloud to_world(const LabeledCloud& scan, const ScanStation& s) { return apply_transform(scan.cloud, inverse(s.world_to_scanner)); }

}  // namespace

TEST_CASE("tree generation") {
  SUBCASE("zero branches gives a bare stem") {
    const TreeModel m = generate_tree(bare_stem(), 1);
    CHECK(m.branches.empty());
    CHECK(m.trunk.size() == 1);
  }
  SUBCASE("deterministic per seed") {
    const TreeModel a = generate_tree(TreeParams{}, 5);
    const TreeModel b = generate_tree(TreeParams{}, 5);
    REQUIRE(a.branches.size() == b.branches.size());
    for (std::size_t i = 0; i < a.branches.size(); ++i) {
      CHECK(a.branches[i].base == b.branches[i].base);
      CHECK(a.branches[i].axis == b.branches[i].axis);
    }
    const TreeModel c = generate_tree(TreeParams{}, 6);
    CHECK(c.branches[0].base != a.branches[0].base);
  }
  SUBCASE("branches attach within the height range and lean by the set inclination") {
    const TreeParams p;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const TreeModel m = generate_tree(p, seed);
      REQUIRE(m.branches.size() == 8);
      for (std::size_t i = 0; i < m.branches.size(); ++i) {
        const Frustum& b = m.branches[i];
        CHECK(b.id == static_cast<int>(i) + 1);
        CHECK(b.base.z() >= p.branch_min_height - 1e-9);
        CHECK(b.base.z() <= p.branch_max_height + 1e-9);
        const double incl = std::acos(b.axis.z());
        CHECK(incl >= p.branch_min_inclination - 1e-9);
        CHECK(incl <= p.branch_max_inclination + 1e-9);
        CHECK(b.length >= p.branch_min_length - 1e-9);
        CHECK(b.length <= p.branch_max_length + 1e-9);
        CHECK(m.branch(b.id) == &m.branches[i]);
      }
    }
  }
  SUBCASE("invalid parameters") {
    TreeParams p;
    p.height = -1;
    CHECK_THROWS_AS(generate_tree(p, 0), Error);
    p = {};
    p.branch_max_height = 12;
    try {
      p.validate();
      FAIL("branch above stem accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidSpec);
    }
  }
}

TEST_CASE("primitive geometry") {
  Frustum f;
  f.base = {0, 0, 0};
  f.axis = Vec3::UnitZ();
  f.length = 2;
  f.base_radius = 0.5;
  f.top_radius = 0.5;
  const auto s = f.intersect({5, 0, 1}, {-1, 0, 0});
  REQUIRE(s);
  CHECK(*s == doctest::Approx(4.5));
  CHECK_FALSE(f.intersect({5, 0, 3}, {-1, 0, 0}));
  CHECK(f.surface_distance({2, 0, 1}) == doctest::Approx(1.5));
  Sphere sp;
  sp.center = {0, 0, 0};
  sp.radius = 1;
  CHECK(*sp.intersect({3, 0, 0}, {-1, 0, 0}) == doctest::Approx(2.0));
}

TEST_CASE("a bare stem shows less than half its circumference to one station") {
  const TreeModel m = generate_tree(bare_stem(), 2);
  const ScanStation st = ScanStation::at({15, 0, 1.5}, 0.7);
  const LabeledCloud scan = simulate_scan(m, st, ScannerSpec::from_degrees(0.06, 0.06), 0.0, 3);
  const PointCloud world = to_world(scan, st);
  double widest = 0.0;
  for (const auto& p : world.points()) widest = std::max(widest, std::abs(std::atan2(p.y(), p.x())));
  CHECK(widest < kPi / 2);
  CHECK(widest > 0.45 * kPi);
}

TEST_CASE("noiseless points lie on their labelled primitive") {
  TreeParams tp;
  tp.leaf_clusters = 3;
  const TreeModel m = generate_tree(tp, 4);
  const ScanStation st = ScanStation::at({0, 15, 1.5}, 2.0);
  const LabeledCloud scan = simulate_scan(m, st, ScannerSpec::from_degrees(0.1, 0.1), 0.0, 5);
  const PointCloud world = to_world(scan, st);
  REQUIRE(world.size() == scan.labels.size());
  std::set<int> seen;
  for (std::size_t i = 0; i < world.size(); ++i) {
    CHECK(m.surface_distance(scan.labels[i], world[i]) <= 1e-9);
    seen.insert(scan.labels[i]);
  }
  CHECK(seen.count(kTrunkId) == 1);
  CHECK(seen.size() > 3);
}

TEST_CASE("every return is the nearest hit along its ray") {
  const TreeModel m = generate_tree(TreeParams{}, 10);
  const ScanStation st = ScanStation::at({-15, 0, 1.5}, 0.0);
  const LabeledCloud scan = simulate_scan(m, st, ScannerSpec::from_degrees(0.15, 0.15), 0.0, 11);
  const TreeModel local = m.transformed(st.world_to_scanner);
  for (std::size_t i = 0; i < scan.cloud.size(); i += 7) {
    const Point3& p = scan.cloud[i];
    const Vec3 dir = p.normalized();
    for (const auto& f : local.trunk) {
      if (auto s = f.intersect(Point3::Zero(), dir)) CHECK(*s >= p.norm() - 1e-9);
    }
    for (const auto& f : local.branches) {
      if (auto s = f.intersect(Point3::Zero(), dir)) CHECK(*s >= p.norm() - 1e-9);
    }
  }
}

TEST_CASE("a sphere in front hides the stem behind it") {
  TreeModel m = generate_tree(bare_stem(), 12);
  Sphere s;
  s.center = {5, 0, 1.5};
  s.radius = 0.2;
  m.leaves.push_back(s);
  const ScanStation st = ScanStation::at({15, 0, 1.5}, 0.0);
  const LabeledCloud scan = simulate_scan(m, st, ScannerSpec::from_degrees(0.1, 0.1), 0.0, 13);
  const PointCloud world = to_world(scan, st);
  for (std::size_t i = 0; i < world.size(); ++i) {
    const Vec3 dir = (world[i] - st.position).normalized();
    const bool through_sphere = s.intersect(st.position, dir).has_value();
    if (through_sphere) CHECK(scan.labels[i] == kFirstLeafId);
  }
}

TEST_CASE("returns sit on the angular grid") {
  const ScannerSpec spec = ScannerSpec::from_degrees(0.08, 0.05);
  const TreeModel m = generate_tree(TreeParams{}, 14);
  const LabeledCloud scan = simulate_scan(m, ScanStation::at({10, 10, 1.5}, 1.0), spec, 0.005, 15);
  for (const auto& p : scan.cloud.points()) {
    const double a = std::atan2(p.y(), p.x()) / spec.phi;
    const double b = std::atan2(p.z(), std::hypot(p.x(), p.y())) / spec.vartheta;
    CHECK(std::abs(a - std::round(a)) <= 1e-6);
    CHECK(std::abs(b - std::round(b)) <= 1e-6);
  }
}

TEST_CASE("range noise is bounded by three sigma") {
  const double sigma = 0.01;
  const TreeModel m = generate_tree(TreeParams{}, 16);
  const ScanStation st = ScanStation::at({0, -15, 1.5}, -1.0);
  const LabeledCloud scan = simulate_scan(m, st, ScannerSpec::from_degrees(0.1, 0.1), sigma, 17);
  const PointCloud world = to_world(scan, st);
  double sum = 0.0;
  for (std::size_t i = 0; i < world.size(); ++i) {
    const double d = m.surface_distance(scan.labels[i], world[i]);
    CHECK(d <= 3 * sigma + 1e-9);
    sum += d;
  }
  // Half-normal mean sigma*sqrt(2/pi) is an upper bound on surface distance.
  CHECK(sum / world.size() <= sigma * std::sqrt(2 / kPi) * 1.05);
  CHECK(sum / world.size() >= 0.3 * sigma);
}

TEST_CASE("two opposite stations see almost the whole stem") {
  const TreeModel m = generate_tree(bare_stem(), 18);
  std::vector<bool> covered(360, false);
  for (const Point3 pos : {Point3(15, 0, 1.5), Point3(-15, 0, 1.5)}) {
    const ScanStation st = ScanStation::at(pos, 0.3);
    const PointCloud world = to_world(simulate_scan(m, st, ScannerSpec::from_degrees(0.06, 0.06), 0.0, 19), st);
    for (const auto& p : world.points()) {
      const double deg = std::atan2(p.y(), p.x()) * 180 / kPi + 180;
      covered[std::min(359, static_cast<int>(deg))] = true;
    }
  }
  CHECK(std::count(covered.begin(), covered.end(), true) > 0.95 * 360);
}

TEST_CASE("datasets") {
  const TreeModel m = generate_tree(TreeParams{}, 20);
  const ScanDataset ds = make_dataset(m, DatasetParams{}, 21);
  REQUIRE(ds.stations.size() == 3);
  SUBCASE("stations at 0, 120 and 240 degrees") {
    for (int k = 0; k < 3; ++k) {
      const Point3& p = ds.stations[k].position;
      CHECK(std::hypot(p.x(), p.y()) == doctest::Approx(15.0));
      CHECK(p.z() == doctest::Approx(1.5));
      const double az = std::atan2(p.y(), p.x());
      CHECK(std::abs(wrap_angle(az - 2 * kPi * k / 3)) <= 1e-12);
    }
  }
  SUBCASE("ground truth carries a scan into the other frame") {
    for (std::size_t k = 1; k < 3; ++k) {
      const RigidTransform gt = ds.ground_truth(k, 0);
      CHECK(gt.is_valid());
      const PointCloud moved = apply_transform(ds.scans[k].cloud, gt);
      const PointCloud world = apply_transform(moved, inverse(ds.stations[0].world_to_scanner));
      for (std::size_t i = 0; i < world.size(); i += 11) {
        CHECK(m.surface_distance(ds.scans[k].labels[i], world[i]) <= 3 * ds.noise_sigma + 1e-9);
      }
      const RigidTransform round = compose(ds.ground_truth(0, k), gt);
      CHECK((round.rotation - Mat3::Identity()).norm() <= 1e-12);
      CHECK(round.translation.norm() <= 1e-12);
    }
  }
  SUBCASE("identical seeds give identical scans") {
    const ScanDataset again = make_dataset(m, DatasetParams{}, 21);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(again.scans[k].cloud.points() == ds.scans[k].cloud.points());
      CHECK(again.scans[k].labels == ds.scans[k].labels);
    }
  }
  SUBCASE("bad dataset parameters") {
    DatasetParams p;
    p.n_stations = 1;
    CHECK_THROWS_AS(make_dataset(m, p, 0), Error);
  }
}
