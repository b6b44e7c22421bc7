#pragma once

// Closed-form covariance of a point-to-point ICP estimate,
//
//   cov(x) ≈ H⁻¹ · B · cov(z) · Bᵀ · H⁻¹,   H = ∂²J/∂x²,  B = ∂²J/∂z∂x,
//
// with J = Σ‖R(x)·P_i + T(x) − Q_i‖², x = (t_x, t_y, t_z, roll, pitch, yaw)
// (ZYX Euler, R = Rz(yaw)·Ry(pitch)·Rx(roll)) and z the stacked pairs
// (P_1, Q_1, …, P_n, Q_n). All derivatives are analytic.

#include <cstdint>
#include <span>
#include <vector>

#include "pcr/geom.hpp"

namespace pcr {

struct PointPair {
  Point3d source;  // P_i
  Point3d target;  // Q_i
};

/// Pose parameter vector (t_x, t_y, t_z, roll, pitch, yaw).
using PoseParam = Vector6d;

inline constexpr double kGimbalMargin = 1e-6;

Matrix3d euler_rotation(double roll, double pitch, double yaw);
PoseParam pose_to_param(const Rigid3d& transform);
Rigid3d param_to_pose(const PoseParam& x);

Matrix6d hessian_xx(std::span<const PointPair> pairs, const PoseParam& x);

/// 6 × 6n; columns [6i, 6i+3) are P_i and [6i+3, 6i+6) are Q_i.
Eigen::MatrixXd hessian_zx(std::span<const PointPair> pairs, const PoseParam& x);

struct CovarianceResult {
  Matrix6d d2J_dx2 = Matrix6d::Zero();
  Eigen::MatrixXd d2J_dzdx;
  double sigma_z_squared = 0.0;
  Matrix6d cov_x = Matrix6d::Zero();
  Matrix6d information = Matrix6d::Zero();
  bool information_clamped = false;
};

/// Measurement covariance is σ_z²·I; it is never materialised.
CovarianceResult covariance(std::span<const PointPair> pairs, const PoseParam& x, double sigma_z);

struct InformationResult {
  Matrix6d information = Matrix6d::Zero();
  bool clamped = false;
};

/// Inverse via eigen-decomposition, clamping eigenvalues at 1e-12·trace.
InformationResult invert_covariance(const Matrix6d& cov);
Matrix6d information_matrix(const Matrix6d& cov);

/// Uniform seeded subsample of at most `cap` pairs, input order preserved.
std::vector<PointPair> cap_pairs(std::span<const PointPair> pairs, std::size_t cap, std::uint64_t seed);

}  // namespace pcr
