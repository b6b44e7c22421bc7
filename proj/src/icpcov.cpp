#include "pcr/icpcov.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace pcr {

namespace {

// Elementary rotations and their first two derivatives in the angle.
struct AxisRotation {
  Matrix3d r, d1, d2;
};

AxisRotation rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  AxisRotation out;
  out.r << 1, 0, 0, 0, c, -s, 0, s, c;
  out.d1 << 0, 0, 0, 0, -s, -c, 0, c, -s;
  out.d2 << 0, 0, 0, 0, -c, s, 0, -s, -c;
  return out;
}

AxisRotation rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  AxisRotation out;
  out.r << c, 0, s, 0, 1, 0, -s, 0, c;
  out.d1 << -s, 0, c, 0, 0, 0, -c, 0, -s;
  out.d2 << -c, 0, -s, 0, 0, 0, s, 0, -c;
  return out;
}

AxisRotation rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  AxisRotation out;
  out.r << c, -s, 0, s, c, 0, 0, 0, 1;
  out.d1 << -s, -c, 0, c, -s, 0, 0, 0, 0;
  out.d2 << -c, s, 0, -s, -c, 0, 0, 0, 0;
  return out;
}

// R and its first/second partials w.r.t. (roll, pitch, yaw).
struct RotationDerivatives {
  Matrix3d r;
  std::array<Matrix3d, 3> d1;
  std::array<std::array<Matrix3d, 3>, 3> d2;
};

RotationDerivatives rotation_derivatives(const PoseParam& x) {
  if (std::abs(x(4)) >= std::numbers::pi / 2.0 - kGimbalMargin)
    throw Error(Errc::gimbal_lock, "pitch is too close to ±90°");
  const AxisRotation rx = rot_x(x(3)), ry = rot_y(x(4)), rz = rot_z(x(5));
  RotationDerivatives d;
  d.r = rz.r * ry.r * rx.r;
  d.d1[0] = rz.r * ry.r * rx.d1;
  d.d1[1] = rz.r * ry.d1 * rx.r;
  d.d1[2] = rz.d1 * ry.r * rx.r;
  d.d2[0][0] = rz.r * ry.r * rx.d2;
  d.d2[1][1] = rz.r * ry.d2 * rx.r;
  d.d2[2][2] = rz.d2 * ry.r * rx.r;
  d.d2[0][1] = d.d2[1][0] = rz.r * ry.d1 * rx.d1;
  d.d2[0][2] = d.d2[2][0] = rz.d1 * ry.r * rx.d1;
  d.d2[1][2] = d.d2[2][1] = rz.d1 * ry.d1 * rx.r;
  return d;
}

// ∂G/∂x for G = R·P + T − Q (3 × 6).
Eigen::Matrix<double, 3, 6> residual_jacobian(const RotationDerivatives& d, const Point3d& p) {
  Eigen::Matrix<double, 3, 6> jac;
  jac.leftCols<3>().setIdentity();
  for (int a = 0; a < 3; ++a) jac.col(3 + a) = d.d1[static_cast<std::size_t>(a)] * p;
  return jac;
}

void require_pairs(std::span<const PointPair> pairs) {
  if (pairs.size() < 3) throw Error(Errc::too_few_pairs, "covariance derivatives need at least 3 pairs");
}

}  // namespace

Matrix3d euler_rotation(double roll, double pitch, double yaw) {
  return rot_z(yaw).r * rot_y(pitch).r * rot_x(roll).r;
}

PoseParam pose_to_param(const Rigid3d& transform) {
  const Matrix3d& r = transform.rotation();
  PoseParam x;
  x.head<3>() = transform.translation();
  x(3) = std::atan2(r(2, 1), r(2, 2));
  x(4) = std::atan2(-r(2, 0), std::hypot(r(2, 1), r(2, 2)));
  x(5) = std::atan2(r(1, 0), r(0, 0));
  return x;
}

Rigid3d param_to_pose(const PoseParam& x) {
  return Rigid3d(euler_rotation(x(3), x(4), x(5)), x.head<3>());
}

Matrix6d hessian_xx(std::span<const PointPair> pairs, const PoseParam& x) {
  require_pairs(pairs);
  const RotationDerivatives d = rotation_derivatives(x);
  Matrix6d h = Matrix6d::Zero();
  for (const auto& pr : pairs) {
    const Point3d g = d.r * pr.source + x.head<3>() - pr.target;
    const auto jac = residual_jacobian(d, pr.source);
    Matrix6d hi = 2.0 * jac.transpose() * jac;
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b)
        hi(3 + static_cast<int>(a), 3 + static_cast<int>(b)) += 2.0 * g.dot(d.d2[a][b] * pr.source);
    h += hi;
  }
  return h;
}

Eigen::MatrixXd hessian_zx(std::span<const PointPair> pairs, const PoseParam& x) {
  require_pairs(pairs);
  const RotationDerivatives d = rotation_derivatives(x);
  Eigen::MatrixXd b(6, 6 * static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& pr = pairs[i];
    const Point3d g = d.r * pr.source + x.head<3>() - pr.target;
    const auto jac = residual_jacobian(d, pr.source);
    Eigen::Matrix<double, 6, 6> block;
    // ∂/∂P of 2·Gᵀ·∂G/∂x_a, and ∂/∂Q of the same (∂G/∂Q = −I).
    block.leftCols<3>() = 2.0 * jac.transpose() * d.r;
    for (int a = 0; a < 3; ++a)
      block.block<1, 3>(3 + a, 0) += 2.0 * g.transpose() * d.d1[static_cast<std::size_t>(a)];
    block.rightCols<3>() = -2.0 * jac.transpose();
    b.middleCols<6>(6 * static_cast<Eigen::Index>(i)) = block;
  }
  return b;
}

InformationResult invert_covariance(const Matrix6d& cov) {
  if (!cov.allFinite()) throw Error(Errc::invalid_argument, "information_matrix: non-finite covariance");
  const double scale = std::max(cov.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw Error(Errc::non_symmetric_input, "information_matrix: covariance is not symmetric");

  const Matrix6d sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix6d> es(sym);
  const double floor = 1e-12 * std::max(sym.trace(), std::numeric_limits<double>::min());
  Vector6d lambda = es.eigenvalues();
  InformationResult out;
  for (int i = 0; i < 6; ++i) {
    if (lambda(i) < floor) {
      lambda(i) = floor;
      out.clamped = true;
    }
  }
  const Matrix6d& v = es.eigenvectors();
  out.information = v * lambda.cwiseInverse().asDiagonal() * v.transpose();
  out.information = 0.5 * (out.information + out.information.transpose()).eval();
  return out;
}

Matrix6d information_matrix(const Matrix6d& cov) { return invert_covariance(cov).information; }

CovarianceResult covariance(std::span<const PointPair> pairs, const PoseParam& x, double sigma_z) {
  if (!(sigma_z > 0.0)) throw Error(Errc::invalid_argument, "covariance: sensor noise must be positive");
  CovarianceResult out;
  out.d2J_dx2 = hessian_xx(pairs, x);
  out.d2J_dzdx = hessian_zx(pairs, x);
  out.sigma_z_squared = sigma_z * sigma_z;

  const Vector6d eig = Eigen::SelfAdjointEigenSolver<Matrix6d>(out.d2J_dx2, Eigen::EigenvaluesOnly)
                           .eigenvalues()
                           .cwiseAbs();
  if (!(eig.minCoeff() > 0.0) || eig.maxCoeff() / eig.minCoeff() > 1e12)
    throw Error(Errc::singular_hessian, "∂²J/∂x² is singular: the pair geometry does not constrain the pose");

  // cov(z) = σ²·I collapses the sandwich to σ²·A·Aᵀ with A = H⁻¹·B.
  const Eigen::MatrixXd a = out.d2J_dx2.partialPivLu().solve(out.d2J_dzdx);
  Matrix6d cov = out.sigma_z_squared * (a * a.transpose());
  out.cov_x = 0.5 * (cov + cov.transpose());

  const InformationResult info = invert_covariance(out.cov_x);
  out.information = info.information;
  out.information_clamped = info.clamped;
  return out;
}

std::vector<PointPair> cap_pairs(std::span<const PointPair> pairs, std::size_t cap, std::uint64_t seed) {
  if (pairs.size() <= cap) return {pairs.begin(), pairs.end()};
  std::vector<std::size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < cap; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
    std::swap(idx[k], idx[pick(rng)]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<PointPair> out;
  out.reserve(cap);
  for (std::size_t i : idx) out.push_back(pairs[i]);
  return out;
}

}  // namespace pcr
