#include "treereg/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "treereg/error.hpp"

namespace treereg {

KdTree::KdTree(std::span<const Point3> points) : points_(points.begin(), points.end()), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), std::uint32_t{0});
  nodes_.reserve(points_.size());
  root_ = build(0, static_cast<std::uint32_t>(order_.size()), 0);
}

std::int32_t KdTree::build(std::uint32_t lo, std::uint32_t hi, int depth) {
  if (lo >= hi) return -1;
  const auto axis = static_cast<std::uint8_t>(depth % 3);
  const std::uint32_t mid = lo + (hi - lo) / 2;
  std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = points_[a](axis);
                     const double pb = points_[b](axis);
                     return pa < pb || (pa == pb && a < b);
                   });
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({mid, -1, -1, axis});
  const std::int32_t left = build(lo, mid, depth + 1);
  const std::int32_t right = build(mid + 1, hi, depth + 1);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

void KdTree::search(std::int32_t node, const Point3& q, Hit& best) const {
  if (node < 0) return;
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  const std::uint32_t idx = order_[n.point];
  const double d2 = (points_[idx] - q).squaredNorm();
  if (d2 < best.squared_distance || (d2 == best.squared_distance && idx < best.index)) best = {idx, d2};
  const double diff = q(n.axis) - points_[idx](n.axis);
  const std::int32_t near = diff < 0.0 ? n.left : n.right;
  const std::int32_t far = diff < 0.0 ? n.right : n.left;
  search(near, q, best);
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

KdTree::Hit KdTree::nearest(const Point3& q) const {
  if (root_ < 0) throw Error(ErrorCode::EmptyCloud, "nearest-neighbour query on an empty tree");
  Hit best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
  search(root_, q, best);
  return best;
}

}  // namespace treereg
