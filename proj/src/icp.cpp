#include "pcr/icp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pcr {

std::vector<Correspondence> correspond(std::span<const Point3d> source, const NNIndex& index,
                                       const Rigid3d& transform, double trim_multiplier) {
  if (!(trim_multiplier > 0.0)) throw Error(Errc::invalid_argument, "correspond: trim multiplier must be positive");

  std::vector<Correspondence> raw;
  raw.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Neighbor nb = index.nearest(transform(source[i]));
    raw.push_back({i, nb.index, std::sqrt(nb.squared_distance)});
  }
  if (raw.size() < 3) throw Error(Errc::too_few_pairs, "correspond: fewer than 3 source points");

  std::vector<double> d;
  d.reserve(raw.size());
  for (const auto& c : raw) d.push_back(c.distance);
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  const double limit = trim_multiplier * *mid;

  std::vector<Correspondence> kept;
  kept.reserve(raw.size());
  for (const auto& c : raw)
    if (c.distance <= limit) kept.push_back(c);
  if (kept.size() < 3) throw Error(Errc::too_few_pairs, "correspond: fewer than 3 pairs survive trimming");
  return kept;
}

double objective(std::span<const Point3d> source, std::span<const Point3d> target,
                 std::span<const std::size_t> theta, const Rigid3d& transform) {
  if (theta.size() != source.size())
    throw Error(Errc::index_out_of_range, "objective: correspondence map must cover every source point");
  double j = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (theta[i] >= target.size()) throw Error(Errc::index_out_of_range, "objective: target index out of range");
    j += (transform(source[i]) - target[theta[i]]).squaredNorm();
  }
  return j;
}

double objective(std::span<const Point3d> source, std::span<const Point3d> target,
                 std::span<const Correspondence> pairs, const Rigid3d& transform) {
  double j = 0.0;
  for (const auto& c : pairs) {
    if (c.source >= source.size() || c.target >= target.size())
      throw Error(Errc::index_out_of_range, "objective: correspondence index out of range");
    j += (transform(source[c.source]) - target[c.target]).squaredNorm();
  }
  return j;
}

namespace {

void keep_nearest(std::vector<Correspondence>& pairs, std::size_t count) {
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Correspondence& a, const Correspondence& b) { return a.distance < b.distance; });
  pairs.resize(count);
  std::sort(pairs.begin(), pairs.end(),
            [](const Correspondence& a, const Correspondence& b) { return a.source < b.source; });
}

}  // namespace

IcpResult icp_register(const Cloud& source, const Cloud& target, const IcpConfig& cfg) {
  if (source.size() < 3 || target.size() < 3)
    throw Error(Errc::too_few_pairs, "icp_register: both clouds need at least 3 points");
  if (cfg.max_iterations < 1 || !(cfg.rotation_tolerance > 0.0) || !(cfg.translation_tolerance > 0.0) ||
      !(cfg.error_change_tolerance > 0.0) || !(cfg.trim_multiplier > 0.0))
    throw Error(Errc::invalid_argument, "icp_register: invalid configuration");

  const NNIndex index(target.points);
  const double translation_eps = cfg.translation_tolerance * std::max(bounds(target.points).diagonal(), 1e-300);

  IcpResult result;
  std::vector<Point3d> p, q;
  for (int k = 1; k <= cfg.max_iterations; ++k) {
    std::vector<Correspondence> pairs = correspond(source.points, index, result.transform, cfg.trim_multiplier);
    // Never admit more pairs than the previous iteration kept: the nearest
    // m pairs after a re-association cost no more than the previous m after
    // alignment, which makes the RMS trace non-increasing.
    if (!result.correspondences.empty() && pairs.size() > result.correspondences.size())
      keep_nearest(pairs, result.correspondences.size());
    p.clear();
    q.clear();
    for (const auto& c : pairs) {
      p.push_back(source.points[c.source]);
      q.push_back(target.points[c.target]);
    }
    const Rigid3d next = umeyama_align(p, q, false).rigid();
    const double j = objective(source.points, target.points, pairs, next);
    const double rms = std::sqrt(j / static_cast<double>(pairs.size()));

    // Rounding can still lift the error by an ulp at convergence; the
    // checker then stops at the previous estimate.
    if (!result.rms_trace.empty() && rms > result.rms_trace.back()) {
      result.converged = true;
      break;
    }

    const Rigid3d delta = next * result.transform.inverse();
    const double prev = result.rms_trace.empty() ? std::numeric_limits<double>::infinity() : result.rms_trace.back();
    result.transform = next;
    result.correspondences = std::move(pairs);
    result.rms_trace.push_back(rms);
    result.objective = j;
    result.iterations = k;

    const bool small_step =
        rotation_angle(delta.rotation()) < cfg.rotation_tolerance && delta.translation().norm() < translation_eps;
    const bool flat_error = std::isfinite(prev) && prev - rms <= cfg.error_change_tolerance * prev;
    if (small_step || flat_error) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace pcr
