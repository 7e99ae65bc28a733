#include <doctest.h>

#include <random>

#include "support.hpp"
#include "treereg/kdtree.hpp"

using namespace treereg;

TEST_CASE("nearest neighbour agrees with a linear scan") {
  std::mt19937_64 rng(71);
  for (std::size_t n : {1, 2, 7, 100, 2000}) {
    const auto pts = test::random_points(rng, n, 3.0);
    const KdTree tree(pts);
    CHECK(tree.size() == n);
    for (const auto& q : test::random_points(rng, 200, 4.0)) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if ((pts[i] - q).squaredNorm() < (pts[best] - q).squaredNorm()) best = i;
      }
      const auto hit = tree.nearest(q);
      CHECK(hit.index == best);
      CHECK(hit.squared_distance == (pts[best] - q).squaredNorm());
    }
  }
}

TEST_CASE("duplicates resolve to the lowest index") {
  std::vector<Point3> pts = {{5, 5, 5}, {1, 0, 0}, {0, 0, 0}, {1, 0, 0}, {1, 0, 0}};
  const KdTree tree(pts);
  CHECK(tree.nearest({1.1, 0, 0}).index == 1);
  CHECK(tree.nearest({0, 0, 0}).index == 2);
  CHECK(tree.nearest({0, 0, 0}).squared_distance == 0.0);
}

TEST_CASE("grid points with many equidistant candidates") {
  std::vector<Point3> pts;
  for (int x = 0; x < 6; ++x)
    for (int y = 0; y < 6; ++y)
      for (int z = 0; z < 6; ++z) pts.emplace_back(x, y, z);
  const KdTree tree(pts);
  std::mt19937_64 rng(72);
  std::uniform_int_distribution<int> cell(0, 4);
  for (int trial = 0; trial < 300; ++trial) {
    const Point3 q(cell(rng) + 0.5, cell(rng) + 0.5, cell(rng) + 0.5);
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if ((pts[i] - q).squaredNorm() < (pts[best] - q).squaredNorm()) best = i;
    }
    CHECK(tree.nearest(q).index == best);
  }
}
