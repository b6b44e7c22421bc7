#pragma once

#include <cstdint>
#include <vector>

#include "pcr/geom.hpp"

namespace pcr {

struct Neighbor {
  std::size_t index = 0;
  double squared_distance = 0.0;
};

/// Exact nearest-neighbour kd-tree over a fixed point set. Immutable after
/// construction, so concurrent queries are safe. Ties resolve to the
/// smallest point index.
class NNIndex {
 public:
  explicit NNIndex(std::vector<Point3d> points);

  Neighbor nearest(const Point3d& query) const;

  std::size_t size() const { return points_.size(); }
  const std::vector<Point3d>& points() const { return points_; }

 private:
  struct Node {
    // Leaves hold [begin, end) into order_; inner nodes split on `axis`.
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
    int axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Point3d& q, Neighbor& best) const;

  std::vector<Point3d> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

NNIndex build_nn_index(const std::vector<Point3d>& points);

}  // namespace pcr
