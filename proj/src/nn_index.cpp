#include "pcr/nn_index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace pcr {

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

NNIndex::NNIndex(std::vector<Point3d> points) : points_(std::move(points)) {
  if (points_.empty()) throw Error(Errc::empty_input, "NNIndex: empty point set");
  if (points_.size() > std::numeric_limits<std::uint32_t>::max())
    throw Error(Errc::invalid_argument, "NNIndex: too many points");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / kLeafSize + 1);
  build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t NNIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end, -1, -1, 0, 0.0});
  if (end - begin <= kLeafSize) return id;

  Point3d lo = points_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (!(hi(axis) > lo(axis))) return id;  // all coincident: keep as a leaf

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double va = points_[a](axis), vb = points_[b](axis);
                     return va < vb || (va == vb && a < b);
                   });
  const double split = points_[order_[mid]](axis);
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  Node& node = nodes_[static_cast<std::size_t>(id)];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

void NNIndex::search(std::int32_t id, const Point3d& q, Neighbor& best) const {
  const Node& node = nodes_[static_cast<std::size_t>(id)];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      const double d = (points_[idx] - q).squaredNorm();
      if (d < best.squared_distance || (d == best.squared_distance && idx < best.index))
        best = {idx, d};
    }
    return;
  }
  const double diff = q(node.axis) - node.split;
  const std::int32_t near = diff < 0.0 ? node.left : node.right;
  const std::int32_t far = diff < 0.0 ? node.right : node.left;
  search(near, q, best);
  // `<=` keeps equal-distance candidates reachable for the index tie-break.
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

Neighbor NNIndex::nearest(const Point3d& query) const {
  Neighbor best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
  search(0, query, best);
  return best;
}

NNIndex build_nn_index(const std::vector<Point3d>& points) { return NNIndex(points); }

}  // namespace pcr
