#pragma once

// Scale handling between two sessions: detection from bounding-box
// diagonals, pixel+depth backprojection, the joint (scale, translation
// magnitude) least-squares solve, and the scalar Kalman filter that
// settles on the session scale factor.

#include <span>
#include <vector>

#include "pcr/cloudio.hpp"
#include "pcr/geom.hpp"
#include "pcr/relpose.hpp"

namespace pcr {

struct ScaleDetection {
  double ratio = 1.0;  // target diagonal / source diagonal
  bool differs = false;
};

struct KalmanConfig {
  double initial_scale = 1.0;
  double initial_variance = 1.0;
  double process_noise = 1e-6;
  // Variance of a single-pair scale observation. A measurement built from
  // n pairs is weighted as n independent observations (variance r / n).
  double measurement_noise = 1e-2;
  double tolerance = 1e-6;
  int max_iterations = 100;
  // Pairs whose 3D residual exceeds this multiple of the median are dropped
  // before filtering (wrong matches that still satisfy the epipolar check).
  double trim_multiplier = 3.0;
};

struct ScaleEstimate {
  double scale = 1.0;
  double variance = 1.0;
  int iterations = 0;
  bool converged = false;
  double initial_scale = 1.0;
  double translation_magnitude = 0.0;
  double measurement = 1.0;
  std::vector<double> variance_trace;
};

struct ScaleFit {
  double scale = 1.0;
  double translation_magnitude = 0.0;
};

inline constexpr double kDefaultDetectionTolerance = 0.1;

ScaleDetection detect_scale(const Cloud& source, const Cloud& target,
                            double tolerance = kDefaultDetectionTolerance);

/// depth · ((X − c_x)/f_x, (Y − c_y)/f_y, 1)
Point3d backproject(const Eigen::Vector2d& pixel, double depth, const CameraIntrinsics& k);

/// Pinhole projection; inverse of backproject for points with z > 0.
Eigen::Vector2d project(const Point3d& point, const CameraIntrinsics& k);

/// (s, α) minimising Σ‖s·R·p_i + α·t̂ − q_i‖².
ScaleFit scale_least_squares(std::span<const Point3d> source, std::span<const Point3d> target,
                             const Matrix3d& rotation, const Point3d& translation_dir);

/// Median of ‖q_i − q_j‖ / ‖p_i − p_j‖ over point pairs; invariant to any
/// rigid motion of either set.
double pairwise_ratio_median(std::span<const Point3d> source, std::span<const Point3d> target);

/// Backprojected (source, target) point pairs for matches that carry both
/// depths, restricted to `pose.inliers` when that list is non-empty.
void backproject_matches(std::span<const MatchRecord> matches, const CameraIntrinsics& k_source,
                         const CameraIntrinsics& k_target, const RelativePose& pose,
                         std::vector<Point3d>& source, std::vector<Point3d>& target);

/// Drops pairs whose residual ‖s·R·p + α·t̂ − q‖ under the joint fit exceeds
/// trim_multiplier × the median residual, refitting until the set is stable.
/// Keeps at least 3 pairs; input order is preserved.
void trim_inconsistent_pairs(std::vector<Point3d>& source, std::vector<Point3d>& target, const Matrix3d& rotation,
                             const Point3d& translation_dir, double trim_multiplier);

ScaleEstimate estimate_scale_kalman(std::span<const MatchRecord> matches, const CameraIntrinsics& k_source,
                                    const CameraIntrinsics& k_target, const RelativePose& pose,
                                    const KalmanConfig& cfg);

}  // namespace pcr
