#pragma once

// Central relative pose between two calibrated keyframes from matched
// pixels: eight-point essential matrix on bearing vectors, four-way
// decomposition with cheirality, and a seeded RANSAC loop scored with the
// angular threshold 1 − cos(arctan(ψ / l)).

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pcr/cloudio.hpp"
#include "pcr/geom.hpp"

namespace pcr {

/// x_t ∝ R·x_s + t̂ : maps source-camera coordinates into the target camera.
struct RelativePose {
  Matrix3d rotation = Matrix3d::Identity();
  Point3d translation_dir = Point3d::UnitZ();
  std::vector<std::size_t> inliers;
};

struct RansacConfig {
  double pixel_threshold = 1.0;
  // Focal length used to turn the pixel threshold into an angle; when unset
  // the target camera's f_x is used.
  std::optional<double> focal_length;
  int max_iterations = 1000;
  std::uint64_t seed = 42;
};

double angular_threshold(double pixel_threshold, double focal_length);

/// Unit bearing of a pixel through the inverted pinhole model.
Point3d bearing(const Eigen::Vector2d& pixel, const CameraIntrinsics& k);

/// Eight-point essential matrix with q_tᵀ·E·q_s = 0, projected onto the
/// essential manifold (singular values σ, σ, 0).
Matrix3d essential_from_rays(std::span<const Point3d> rays_source, std::span<const Point3d> rays_target);

Matrix3d essential_from_pose(const Matrix3d& rotation, const Point3d& translation);

/// 1 − cos of the angle between the target ray and the epipolar plane that
/// E induces for the source ray.
double epipolar_residual(const Matrix3d& essential, const Point3d& ray_source, const Point3d& ray_target);

/// Number of correspondences that triangulate in front of both cameras.
std::size_t cheirality_count(const Matrix3d& rotation, const Point3d& translation,
                             std::span<const Point3d> rays_source, std::span<const Point3d> rays_target);

RelativePose decompose_and_disambiguate(const Matrix3d& essential, std::span<const Point3d> rays_source,
                                        std::span<const Point3d> rays_target);

RelativePose ransac_relative_pose(std::span<const MatchRecord> matches, const CameraIntrinsics& k_source,
                                  const CameraIntrinsics& k_target, const RansacConfig& cfg);

}  // namespace pcr
