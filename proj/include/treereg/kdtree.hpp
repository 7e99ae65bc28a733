#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "treereg/geom_core.hpp"

namespace treereg {

/// Static 3-d tree over a point set for exact nearest-neighbour queries.
class KdTree {
 public:
  struct Hit {
    std::size_t index = 0;
    double squared_distance = 0.0;
  };

  explicit KdTree(std::span<const Point3> points);

  std::size_t size() const noexcept { return points_.size(); }
  /// Nearest stored point; ties go to the lower index. Requires a non-empty tree.
  Hit nearest(const Point3& q) const;

 private:
  struct Node {
    std::uint32_t point;  // index into order_
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint8_t axis = 0;
  };

  std::int32_t build(std::uint32_t lo, std::uint32_t hi, int depth);
  void search(std::int32_t node, const Point3& q, Hit& best) const;

  std::vector<Point3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

}  // namespace treereg
