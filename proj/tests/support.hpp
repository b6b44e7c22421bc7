#pragma once

// Test-only generators and oracles. Nothing here calls into the code paths
// it is used to check.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pcr/geom.hpp"
#include "pcr/icpcov.hpp"

namespace pcr::test {

inline Point3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Point3d(n(rng), n(rng), n(rng)).normalized();
}

inline Matrix3d random_rotation(std::mt19937_64& rng, double max_angle = M_PI) {
  std::uniform_real_distribution<double> a(0.0, max_angle);
  return rotation_about(random_unit(rng), a(rng));
}

inline std::vector<Point3d> random_cloud(std::mt19937_64& rng, std::size_t n, Point3d half = Point3d(1, 1, 1),
                                         Point3d center = Point3d::Zero()) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point3d> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(center + half.cwiseProduct(Point3d(u(rng), u(rng), u(rng))));
  return out;
}

/// Anisotropic Gaussian blob; its lack of symmetry keeps ICP basins wide.
inline std::vector<Point3d> random_blob(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Point3d> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(1.0 * g(rng), 0.6 * g(rng), 0.35 * g(rng));
  return out;
}

inline std::size_t brute_nearest(const std::vector<Point3d>& cloud, const Point3d& q) {
  std::size_t best = 0;
  double bd = (cloud[0] - q).squaredNorm();
  for (std::size_t i = 1; i < cloud.size(); ++i) {
    const double d = (cloud[i] - q).squaredNorm();
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  return best;
}

// Independent evaluation of the pair objective in extended precision, using
// Eigen's own Euler composition rather than the library's derivative tables.
using Vec3l = Eigen::Matrix<long double, 3, 1>;
using Mat3l = Eigen::Matrix<long double, 3, 3>;

inline Mat3l euler_zyx(long double roll, long double pitch, long double yaw) {
  return (Eigen::AngleAxis<long double>(yaw, Vec3l::UnitZ()) * Eigen::AngleAxis<long double>(pitch, Vec3l::UnitY()) *
          Eigen::AngleAxis<long double>(roll, Vec3l::UnitX()))
      .toRotationMatrix();
}

inline long double pair_cost(const Eigen::Matrix<long double, 6, 1>& x, const Vec3l& p, const Vec3l& q) {
  const Vec3l g = euler_zyx(x(3), x(4), x(5)) * p + x.head<3>() - q;
  return g.squaredNorm();
}

inline long double total_cost(const Eigen::Matrix<long double, 6, 1>& x, std::span<const PointPair> pairs) {
  long double j = 0;
  for (const auto& pr : pairs) j += pair_cost(x, pr.source.cast<long double>(), pr.target.cast<long double>());
  return j;
}

/// Central second differences of J over x.
inline Matrix6d fd_hessian_xx(std::span<const PointPair> pairs, const Vector6d& x0, double h) {
  Matrix6d out;
  const Eigen::Matrix<long double, 6, 1> x = x0.cast<long double>();
  for (int a = 0; a < 6; ++a) {
    for (int b = 0; b < 6; ++b) {
      auto e = [&](int i, long double s) {
        Eigen::Matrix<long double, 6, 1> d = Eigen::Matrix<long double, 6, 1>::Zero();
        d(i) = s;
        return d;
      };
      const long double hh = h;
      const long double v = total_cost(x + e(a, hh) + e(b, hh), pairs) - total_cost(x + e(a, hh) - e(b, hh), pairs) -
                            total_cost(x - e(a, hh) + e(b, hh), pairs) + total_cost(x - e(a, hh) - e(b, hh), pairs);
      out(a, b) = static_cast<double>(v / (4 * hh * hh));
    }
  }
  return out;
}

/// Central mixed differences ∂²J/∂z∂x; only pair i depends on z_i.
inline Eigen::MatrixXd fd_hessian_zx(std::span<const PointPair> pairs, const Vector6d& x0, double hx, double hz) {
  Eigen::MatrixXd out(6, 6 * static_cast<Eigen::Index>(pairs.size()));
  const Eigen::Matrix<long double, 6, 1> x = x0.cast<long double>();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    Eigen::Matrix<long double, 6, 1> z;
    z << pairs[i].source.cast<long double>(), pairs[i].target.cast<long double>();
    auto cost = [&](const Eigen::Matrix<long double, 6, 1>& xx, const Eigen::Matrix<long double, 6, 1>& zz) {
      return pair_cost(xx, zz.head<3>(), zz.tail<3>());
    };
    for (int a = 0; a < 6; ++a) {
      for (int c = 0; c < 6; ++c) {
        Eigen::Matrix<long double, 6, 1> dx = Eigen::Matrix<long double, 6, 1>::Zero();
        Eigen::Matrix<long double, 6, 1> dz = Eigen::Matrix<long double, 6, 1>::Zero();
        dx(a) = hx;
        dz(c) = hz;
        const long double v =
            cost(x + dx, z + dz) - cost(x + dx, z - dz) - cost(x - dx, z + dz) + cost(x - dx, z - dz);
        out(a, 6 * static_cast<Eigen::Index>(i) + c) = static_cast<double>(v / (4.0L * hx * hz));
      }
    }
  }
  return out;
}

/// max |a − b| / max |b|
inline double normwise_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("pcr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace pcr::test
