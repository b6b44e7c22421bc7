#include "pcr/scale.hpp"

#include <algorithm>
#include <cmath>

namespace pcr {

ScaleDetection detect_scale(const Cloud& source, const Cloud& target, double tolerance) {
  if (source.empty() || target.empty()) throw Error(Errc::empty_input, "detect_scale: empty cloud");
  const double ds = bounds(source.points).diagonal();
  const double dt = bounds(target.points).diagonal();
  if (!(ds > 0.0) || !(dt > 0.0))
    throw Error(Errc::zero_extent, "detect_scale: a cloud has a zero bounding diagonal");
  ScaleDetection d;
  d.ratio = dt / ds;
  d.differs = std::abs(d.ratio - 1.0) > tolerance;
  return d;
}

Point3d backproject(const Eigen::Vector2d& pixel, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0)) throw Error(Errc::nonpositive_depth, "backproject: depth must be positive");
  return depth * Point3d((pixel.x() - k.cx) / k.fx, (pixel.y() - k.cy) / k.fy, 1.0);
}

Eigen::Vector2d project(const Point3d& point, const CameraIntrinsics& k) {
  return {k.fx * point.x() / point.z() + k.cx, k.fy * point.y() / point.z() + k.cy};
}

ScaleFit scale_least_squares(std::span<const Point3d> source, std::span<const Point3d> target,
                             const Matrix3d& rotation, const Point3d& translation_dir) {
  if (source.size() != target.size())
    throw Error(Errc::invalid_argument, "scale_least_squares: point lists differ in length");
  if (source.size() < 2) throw Error(Errc::insufficient_matches, "scale_least_squares: need at least 2 pairs");
  if (std::abs(translation_dir.norm() - 1.0) > 1e-9)
    throw Error(Errc::invalid_argument, "scale_least_squares: translation direction must be unit length");

  // Normal equations of the linear model q = s·a + α·t̂ with a = R·p.
  Eigen::Matrix2d normal = Eigen::Matrix2d::Zero();
  Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Point3d a = rotation * source[i];
    normal(0, 0) += a.squaredNorm();
    normal(0, 1) += a.dot(translation_dir);
    rhs(0) += a.dot(target[i]);
    rhs(1) += translation_dir.dot(target[i]);
  }
  normal(1, 0) = normal(0, 1);
  normal(1, 1) = static_cast<double>(source.size());

  const Eigen::Vector2d eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(normal).eigenvalues();
  if (!(eig(0) > 0.0) || eig(1) / eig(0) > 1e12)
    throw Error(Errc::singular_system, "scale_least_squares: normal matrix is ill-conditioned");

  const Eigen::Vector2d sol = normal.ldlt().solve(rhs);
  if (!(sol(0) > 0.0)) throw Error(Errc::nonpositive_scale, "scale_least_squares: estimated scale is not positive");
  return {sol(0), sol(1)};
}

double pairwise_ratio_median(std::span<const Point3d> source, std::span<const Point3d> target) {
  if (source.size() != target.size() || source.size() < 2)
    throw Error(Errc::invalid_argument, "pairwise_ratio_median: need two equal-length lists of >= 2 points");
  const std::size_t n = source.size();
  // Every pair up to 1000 points, a fixed band of neighbours beyond that.
  const std::size_t band = n <= 1000 ? n : 50;
  std::vector<double> ratios;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t off = 1; off < band && (band < n || i + off < n); ++off) {
      const std::size_t j = (i + off) % n;
      const double dp = (source[i] - source[j]).norm();
      if (dp > 0.0) ratios.push_back((target[i] - target[j]).norm() / dp);
    }
  }
  if (ratios.empty()) throw Error(Errc::degenerate_configuration, "pairwise_ratio_median: all points coincide");
  const auto mid = ratios.begin() + static_cast<std::ptrdiff_t>(ratios.size() / 2);
  std::nth_element(ratios.begin(), mid, ratios.end());
  return *mid;
}

void backproject_matches(std::span<const MatchRecord> matches, const CameraIntrinsics& k_source,
                         const CameraIntrinsics& k_target, const RelativePose& pose,
                         std::vector<Point3d>& source, std::vector<Point3d>& target) {
  source.clear();
  target.clear();
  auto take = [&](const MatchRecord& m) {
    if (!m.source_depth || !m.target_depth) return;
    source.push_back(backproject(m.source_pixel, *m.source_depth, k_source));
    target.push_back(backproject(m.target_pixel, *m.target_depth, k_target));
  };
  if (pose.inliers.empty()) {
    for (const auto& m : matches) take(m);
  } else {
    for (std::size_t idx : pose.inliers) {
      if (idx >= matches.size()) throw Error(Errc::index_out_of_range, "relative pose inlier index out of range");
      take(matches[idx]);
    }
  }
}

void trim_inconsistent_pairs(std::vector<Point3d>& source, std::vector<Point3d>& target, const Matrix3d& rotation,
                             const Point3d& translation_dir, double trim_multiplier) {
  if (!(trim_multiplier > 0.0)) throw Error(Errc::invalid_argument, "trim_inconsistent_pairs: multiplier must be positive");
  if (source.size() != target.size()) throw Error(Errc::invalid_argument, "trim_inconsistent_pairs: lists differ in length");
  double extent = 0.0;
  for (const auto& q : target) extent = std::max(extent, q.norm());

  for (int round = 0; round < 10 && source.size() > 3; ++round) {
    const ScaleFit fit = scale_least_squares(source, target, rotation, translation_dir);
    std::vector<double> residual(source.size());
    for (std::size_t i = 0; i < source.size(); ++i)
      residual[i] = (fit.scale * rotation * source[i] + fit.translation_magnitude * translation_dir - target[i]).norm();
    std::vector<double> sorted = residual;
    const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
    std::nth_element(sorted.begin(), mid, sorted.end());
    // The floor keeps exact data intact when the median residual is rounding noise.
    const double limit = std::max(trim_multiplier * *mid, 1e-12 * extent);

    std::vector<Point3d> src, tgt;
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (residual[i] <= limit) {
        src.push_back(source[i]);
        tgt.push_back(target[i]);
      }
    }
    if (src.size() == source.size() || src.size() < 3) break;
    source = std::move(src);
    target = std::move(tgt);
  }
}

ScaleEstimate estimate_scale_kalman(std::span<const MatchRecord> matches, const CameraIntrinsics& k_source,
                                    const CameraIntrinsics& k_target, const RelativePose& pose,
                                    const KalmanConfig& cfg) {
  if (!(cfg.initial_variance > 0.0) || !(cfg.process_noise > 0.0) || !(cfg.measurement_noise > 0.0) ||
      !(cfg.tolerance > 0.0) || cfg.max_iterations < 1 || !(cfg.initial_scale > 0.0) ||
      !(cfg.trim_multiplier > 0.0))
    throw Error(Errc::invalid_argument, "estimate_scale_kalman: invalid Kalman configuration");

  std::vector<Point3d> src, tgt;
  backproject_matches(matches, k_source, k_target, pose, src, tgt);
  if (src.size() < 3)
    throw Error(Errc::insufficient_matches, "scale estimation needs at least 3 matches with both depths");
  trim_inconsistent_pairs(src, tgt, pose.rotation, pose.translation_dir, cfg.trim_multiplier);

  ScaleEstimate est;
  est.initial_scale = cfg.initial_scale;
  const double robust = pairwise_ratio_median(src, tgt);
  if (std::abs(robust - cfg.initial_scale) > 0.5 * robust) est.initial_scale = robust;

  const double r = cfg.measurement_noise / static_cast<double>(src.size());
  double s = est.initial_scale;
  double p = cfg.initial_variance;
  est.variance_trace.push_back(p);

  for (int k = 1; k <= cfg.max_iterations; ++k) {
    // The measurement is the global least-squares scale given the current
    // relative pose; for a fixed pose it is the same at every step.
    const ScaleFit fit = scale_least_squares(src, tgt, pose.rotation, pose.translation_dir);
    est.measurement = fit.scale;
    est.translation_magnitude = fit.translation_magnitude;

    const double s_prior = s;
    const double p_prior = p + cfg.process_noise;
    const double gain = p_prior / (p_prior + r);
    s = s_prior + gain * (fit.scale - s_prior);
    p = (1.0 - gain) * p_prior;
    est.variance_trace.push_back(p);
    est.iterations = k;

    if (std::abs(s - s_prior) < cfg.tolerance && std::abs(fit.scale - s) < cfg.tolerance) {
      est.converged = true;
      break;
    }
  }
  est.scale = s;
  est.variance = p;
  return est;
}

}  // namespace pcr
