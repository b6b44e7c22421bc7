#pragma once

// Dense geometric value types shared by every stage of the registration
// pipeline: points, rigid (SE(3)) and similarity (Sim(3)) transforms, and
// axis-aligned bounds. Everything is templated on the scalar type and
// header-only; `double` aliases are provided for the common case.

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pcr/error.hpp"

namespace pcr {

template <typename Scalar>
using Point3 = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

using Point3d = Point3<double>;
using Matrix3d = Matrix3<double>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

template <typename Scalar>
bool is_finite(const Point3<Scalar>& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

/// Largest elementwise deviation of RᵀR from the identity.
template <typename Derived>
typename Derived::Scalar orthogonality_residual(const Eigen::MatrixBase<Derived>& r) {
  using Scalar = typename Derived::Scalar;
  return (r.transpose() * r - Matrix3<Scalar>::Identity()).cwiseAbs().maxCoeff();
}

/// Nearest rotation matrix in the Frobenius sense (SVD projection onto SO(3)).
template <typename Derived>
Matrix3<typename Derived::Scalar> project_to_rotation(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::JacobiSVD<Matrix3<Scalar>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3<Scalar> d = Matrix3<Scalar>::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < Scalar(0)) d(2, 2) = Scalar(-1);
  return svd.matrixU() * d * svd.matrixV().transpose();
}

/// Rotation angle of R in radians, accurate for both small and large angles.
template <typename Derived>
typename Derived::Scalar rotation_angle(const Eigen::MatrixBase<Derived>& r) {
  using Scalar = typename Derived::Scalar;
  const Point3<Scalar> axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const Scalar c = (r.trace() - Scalar(1)) / Scalar(2);
  return std::atan2(axis.norm() / Scalar(2), c);
}

template <typename Scalar>
Matrix3<Scalar> rotation_about(const Point3<Scalar>& axis, Scalar angle) {
  return Eigen::AngleAxis<Scalar>(angle, axis.normalized()).toRotationMatrix();
}

template <typename Scalar>
Matrix3<Scalar> skew(const Point3<Scalar>& v) {
  Matrix3<Scalar> m;
  m << Scalar(0), -v.z(), v.y(), v.z(), Scalar(0), -v.x(), -v.y(), v.x(), Scalar(0);
  return m;
}

/// Element of SE(3): p ↦ R·p + t.
template <typename Scalar>
class RigidTransform {
 public:
  using Matrix = Matrix3<Scalar>;
  using Vector = Point3<Scalar>;
  using Quaternion = Eigen::Quaternion<Scalar>;

  static constexpr Scalar kOrthoTolerance = Scalar(1e-9);
  // Inputs further than this from SO(3) are rejected rather than projected.
  static constexpr Scalar kRejectTolerance = Scalar(1e-4);

  RigidTransform() : rotation_(Matrix::Identity()), translation_(Vector::Zero()) {}

  RigidTransform(const Matrix& rotation, const Vector& translation)
      : rotation_(rotation), translation_(translation) {
    if (!rotation_.allFinite() || !translation_.allFinite())
      throw Error(Errc::invalid_argument, "rigid transform has non-finite entries");
    const Scalar residual = orthogonality_residual(rotation_);
    if (residual > kRejectTolerance || rotation_.determinant() < Scalar(0))
      throw Error(Errc::invalid_argument, "rotation matrix is not in SO(3)");
    if (residual > kOrthoTolerance) rotation_ = project_to_rotation(rotation_);
  }

  RigidTransform(const Quaternion& q, const Vector& translation)
      : RigidTransform(q.normalized().toRotationMatrix(), translation) {}

  static RigidTransform identity() { return {}; }

  const Matrix& rotation() const { return rotation_; }
  const Vector& translation() const { return translation_; }
  Quaternion quaternion() const { return Quaternion(rotation_); }

  Vector operator()(const Vector& p) const { return rotation_ * p + translation_; }

  RigidTransform inverse() const {
    return RigidTransform(rotation_.transpose(), -(rotation_.transpose() * translation_));
  }

  /// (a * b)(p) == a(b(p))
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
    return RigidTransform(a.rotation_ * b.rotation_, a.rotation_ * b.translation_ + a.translation_);
  }

  template <typename Other>
  RigidTransform<Other> cast() const {
    return RigidTransform<Other>(rotation_.template cast<Other>(), translation_.template cast<Other>());
  }

 private:
  Matrix rotation_;
  Vector translation_;
};

/// Element of Sim(3): p ↦ s·R·p + t with s > 0.
template <typename Scalar>
class SimilarityTransform {
 public:
  using Vector = Point3<Scalar>;
  using Rigid = RigidTransform<Scalar>;

  SimilarityTransform() = default;

  SimilarityTransform(Scalar scale, const Rigid& rigid) : scale_(scale), rigid_(rigid) {
    if (!(scale > Scalar(0)) || !std::isfinite(scale))
      throw Error(Errc::invalid_argument, "similarity scale must be positive and finite");
  }

  SimilarityTransform(Scalar scale, const Matrix3<Scalar>& rotation, const Vector& translation)
      : SimilarityTransform(scale, Rigid(rotation, translation)) {}

  explicit SimilarityTransform(const Rigid& rigid) : SimilarityTransform(Scalar(1), rigid) {}

  static SimilarityTransform identity() { return {}; }

  Scalar scale() const { return scale_; }
  const Rigid& rigid() const { return rigid_; }
  const Matrix3<Scalar>& rotation() const { return rigid_.rotation(); }
  const Vector& translation() const { return rigid_.translation(); }

  Vector operator()(const Vector& p) const {
    return scale_ * (rigid_.rotation() * p) + rigid_.translation();
  }

  SimilarityTransform inverse() const {
    const Matrix3<Scalar> rt = rigid_.rotation().transpose();
    return SimilarityTransform(Scalar(1) / scale_, rt, -(rt * rigid_.translation()) / scale_);
  }

  /// (a * b)(p) == a(b(p)) == s_a·R_a·(s_b·R_b·p + t_b) + t_a
  friend SimilarityTransform operator*(const SimilarityTransform& a, const SimilarityTransform& b) {
    return SimilarityTransform(a.scale_ * b.scale_, a.rotation() * b.rotation(),
                               a.scale_ * (a.rotation() * b.translation()) + a.translation());
  }

 private:
  Scalar scale_ = Scalar(1);
  Rigid rigid_;
};

using Rigid3d = RigidTransform<double>;
using Sim3d = SimilarityTransform<double>;

template <typename Scalar>
SimilarityTransform<Scalar> compose(const SimilarityTransform<Scalar>& a,
                                    const SimilarityTransform<Scalar>& b) {
  return a * b;
}

template <typename Scalar>
SimilarityTransform<Scalar> inverse(const SimilarityTransform<Scalar>& t) {
  return t.inverse();
}

template <typename Scalar>
Point3<Scalar> apply(const SimilarityTransform<Scalar>& t, const Point3<Scalar>& p) {
  return t(p);
}

template <typename Scalar>
Point3<Scalar> apply(const RigidTransform<Scalar>& t, const Point3<Scalar>& p) {
  return t(p);
}

template <typename Transform, typename Scalar>
std::vector<Point3<Scalar>> transform_points(const Transform& t, const std::vector<Point3<Scalar>>& points) {
  std::vector<Point3<Scalar>> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(t(p));
  return out;
}

/// Least-squares Sim(3) (or SE(3) when `with_scale` is false) taking
/// `source` onto `target`, via the SVD closed form with the reflection
/// correction and the variance-ratio scale.
template <typename Scalar>
SimilarityTransform<Scalar> umeyama_align(std::span<const Point3<Scalar>> source,
                                          std::span<const Point3<Scalar>> target, bool with_scale) {
  using Vector = Point3<Scalar>;
  using Matrix = Matrix3<Scalar>;
  if (source.size() != target.size())
    throw Error(Errc::invalid_argument, "umeyama_align: point lists differ in length");
  if (source.size() < 3)
    throw Error(Errc::degenerate_configuration, "umeyama_align: need at least 3 points");

  const Scalar n = static_cast<Scalar>(source.size());
  Vector mu_s = Vector::Zero(), mu_t = Vector::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    mu_s += source[i];
    mu_t += target[i];
  }
  mu_s /= n;
  mu_t /= n;

  Matrix cross = Matrix::Zero();
  Matrix source_cov = Matrix::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Vector ds = source[i] - mu_s;
    cross += (target[i] - mu_t) * ds.transpose();
    source_cov += ds * ds.transpose();
  }
  cross /= n;
  source_cov /= n;

  const Vector spread = Eigen::SelfAdjointEigenSolver<Matrix>(source_cov, Eigen::EigenvaluesOnly)
                            .eigenvalues();  // ascending
  if (!(spread(2) > Scalar(0)) || spread(1) <= Scalar(1e-12) * spread(2))
    throw Error(Errc::degenerate_configuration,
                "umeyama_align: source points are collinear or coincident");

  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vector sign = Vector::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < Scalar(0)) sign(2) = Scalar(-1);

  const Matrix rotation = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
  Scalar scale = Scalar(1);
  if (with_scale) scale = svd.singularValues().dot(sign) / source_cov.trace();
  const Vector translation = mu_t - scale * (rotation * mu_s);
  return SimilarityTransform<Scalar>(scale, rotation, translation);
}

template <typename Scalar>
SimilarityTransform<Scalar> umeyama_align(const std::vector<Point3<Scalar>>& source,
                                          const std::vector<Point3<Scalar>>& target, bool with_scale) {
  return umeyama_align(std::span<const Point3<Scalar>>(source), std::span<const Point3<Scalar>>(target),
                       with_scale);
}

template <typename Scalar>
struct Bounds3 {
  Point3<Scalar> min;
  Point3<Scalar> max;

  Point3<Scalar> extent() const { return max - min; }
  Scalar diagonal() const { return extent().norm(); }
};

using Bounds3d = Bounds3<double>;

template <typename Scalar>
Bounds3<Scalar> bounds(std::span<const Point3<Scalar>> points) {
  if (points.empty()) throw Error(Errc::empty_input, "bounds of an empty point list");
  Bounds3<Scalar> b{points.front(), points.front()};
  for (const auto& p : points) {
    b.min = b.min.cwiseMin(p);
    b.max = b.max.cwiseMax(p);
  }
  return b;
}

template <typename Scalar>
Bounds3<Scalar> bounds(const std::vector<Point3<Scalar>>& points) {
  return bounds(std::span<const Point3<Scalar>>(points));
}

}  // namespace pcr
