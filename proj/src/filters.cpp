#include "pcr/filters.hpp"

#include <algorithm>
#include <cmath>

namespace pcr {

double crop_boundary(const Cloud& cloud, const FilterConfig& cfg) {
  if (cloud.empty()) throw Error(Errc::empty_input, "crop_lower: empty cloud");
  if (!(cfg.crop_fraction > 0.0) || cfg.crop_fraction > 1.0)
    throw Error(Errc::invalid_argument, "crop_lower: fraction must lie in (0, 1]");
  const auto axis = static_cast<Eigen::Index>(cfg.vertical_axis);
  const Bounds3d b = bounds(cloud.points);
  return b.min(axis) + cfg.crop_fraction * (b.max(axis) - b.min(axis));
}

FilterConfig resolve_crop(const Cloud& cloud, FilterConfig cfg) {
  cfg.boundary = crop_boundary(cloud, cfg);
  return cfg;
}

Cloud crop_lower(const Cloud& cloud, const FilterConfig& cfg) {
  if (cloud.empty()) throw Error(Errc::empty_input, "crop_lower: empty cloud");
  if (cfg.boundary && !std::isfinite(*cfg.boundary))
    throw Error(Errc::invalid_argument, "crop_lower: boundary must be finite");
  const auto axis = static_cast<Eigen::Index>(cfg.vertical_axis);
  const double boundary = cfg.boundary ? *cfg.boundary : crop_boundary(cloud, cfg);

  Cloud out;
  out.label = cloud.label;
  for (const auto& p : cloud.points) {
    const bool lower = p(axis) <= boundary;
    if (lower != cfg.keep_upper) out.points.push_back(p);
  }
  if (out.empty()) throw Error(Errc::empty_result, "crop_lower: no point survives the crop");
  return out;
}

Cloud remove_remote(const Cloud& cloud, const FilterConfig& cfg) {
  if (cloud.size() < 2) throw Error(Errc::invalid_argument, "remove_remote: need at least 2 points");
  if (!(cfg.remote_multiplier > 0.0))
    throw Error(Errc::invalid_argument, "remove_remote: multiplier must be positive");

  Point3d centroid = Point3d::Zero();
  for (const auto& p : cloud.points) centroid += p;
  centroid /= static_cast<double>(cloud.size());

  std::vector<double> dist;
  dist.reserve(cloud.size());
  for (const auto& p : cloud.points) dist.push_back((p - centroid).norm());
  std::vector<double> sorted = dist;
  const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  const double limit = cfg.remote_multiplier * *mid;

  Cloud out;
  out.label = cloud.label;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (dist[i] <= limit) out.points.push_back(cloud.points[i]);
  return out;
}

}  // namespace pcr
