#pragma once

#include <optional>

#include "pcr/cloudio.hpp"

namespace pcr {

enum class Axis { x = 0, y = 1, z = 2 };

struct FilterConfig {
  double crop_fraction = 0.25;
  Axis vertical_axis = Axis::y;
  // Keep the complement of the lower band instead of the band itself.
  bool keep_upper = false;
  double remote_multiplier = 5.0;
  // Absolute crop height. When unset it is derived from the cloud's own
  // extent, so re-cropping a cropped cloud lowers it again.
  std::optional<double> boundary;
};

/// v_min + fraction·(v_max − v_min) along the vertical axis.
double crop_boundary(const Cloud& cloud, const FilterConfig& cfg);

/// `cfg` with the crop height pinned to `crop_boundary(cloud, cfg)`.
FilterConfig resolve_crop(const Cloud& cloud, FilterConfig cfg);

/// Keeps points with v ≤ boundary along the vertical axis (inclusive), in
/// input order.
Cloud crop_lower(const Cloud& cloud, const FilterConfig& cfg);

/// Drops points farther from the centroid than remote_multiplier × the
/// median centroid distance, in input order.
Cloud remove_remote(const Cloud& cloud, const FilterConfig& cfg);

}  // namespace pcr
