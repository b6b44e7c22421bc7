#include <doctest.h>

#include "pcr/relpose.hpp"
#include "pcr/scale.hpp"
#include "support.hpp"

using namespace pcr;

namespace {

const CameraIntrinsics kCam{525.0, 525.0, 319.5, 239.5};

struct Scene {
  Matrix3d rotation;
  Point3d direction;
  std::vector<MatchRecord> matches;
  std::vector<Point3d> rays_source, rays_target;
};

Scene make_scene(std::mt19937_64& rng, std::size_t n, double outlier_fraction = 0.0, double pixel_noise = 0.0) {
  Scene s;
  s.rotation = test::random_rotation(rng, 15.0 * M_PI / 180.0);
  Point3d dir = test::random_unit(rng);
  dir.z() = 0.3 * std::abs(dir.z());
  s.direction = dir.normalized();
  const auto pts = test::random_cloud(rng, n, Point3d(1.0, 0.8, 1.0), Point3d(0, 0, 4));
  std::normal_distribution<double> noise(0.0, pixel_noise > 0 ? pixel_noise : 1.0);
  std::uniform_real_distribution<double> ux(0, 640), uy(0, 480);
  const std::size_t outliers = static_cast<std::size_t>(std::llround(outlier_fraction * static_cast<double>(n)));
  for (std::size_t i = 0; i < n; ++i) {
    const Point3d& p = pts[i];
    const Point3d q = s.rotation * p + 0.5 * s.direction;
    Eigen::Vector2d ps = project(p, kCam), pt = project(q, kCam);
    if (pixel_noise > 0) {
      ps += Eigen::Vector2d(noise(rng), noise(rng));
      pt += Eigen::Vector2d(noise(rng), noise(rng));
    }
    if (i < outliers) pt = Eigen::Vector2d(ux(rng), uy(rng));
    s.matches.push_back({ps, p.z(), pt, q.z()});
    s.rays_source.push_back(bearing(ps, kCam));
    s.rays_target.push_back(bearing(pt, kCam));
  }
  return s;
}

double direction_error_deg(const Point3d& a, const Point3d& b) {
  return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0)) * 180.0 / M_PI;
}

double rotation_error_deg(const Matrix3d& a, const Matrix3d& b) {
  return rotation_angle(Matrix3d(a.transpose() * b)) * 180.0 / M_PI;
}

}  // namespace

TEST_CASE("angular_threshold: literal values") {
  CHECK(angular_threshold(1.0, 500.0) == doctest::Approx(1.999993999968197e-06).epsilon(1e-12));
  CHECK(angular_threshold(500.0, 500.0) == doctest::Approx(0.2928932188134524).epsilon(1e-14));
  CHECK_THROWS_AS(angular_threshold(0.0, 500.0), Error);
  CHECK_THROWS_AS(angular_threshold(1.0, 0.0), Error);
  CHECK_THROWS_AS(angular_threshold(-1.0, 500.0), Error);
}

TEST_CASE("bearing is unit length and points through the pixel") {
  const Point3d b = bearing({kCam.cx, kCam.cy}, kCam);
  CHECK((b - Point3d::UnitZ()).norm() < 1e-15);
  const Point3d off = bearing({kCam.cx + kCam.fx, kCam.cy}, kCam);
  CHECK(off.norm() == doctest::Approx(1.0));
  CHECK((off - Point3d(1, 0, 1).normalized()).norm() < 1e-15);
}

TEST_CASE("essential_from_pose: true correspondences score zero") {
  std::mt19937_64 rng(31);
  const Scene s = make_scene(rng, 50);
  const Matrix3d e = essential_from_pose(s.rotation, s.direction);
  for (std::size_t i = 0; i < s.rays_source.size(); ++i)
    CHECK(epipolar_residual(e, s.rays_source[i], s.rays_target[i]) < 1e-14);
}

TEST_CASE("essential_from_rays: recovers the true E up to scale and sign") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const Scene s = make_scene(rng, 8);
    Matrix3d e = essential_from_rays(s.rays_source, s.rays_target);
    Matrix3d truth = essential_from_pose(s.rotation, s.direction);
    e /= e.norm();
    truth /= truth.norm();
    CHECK(std::min((e - truth).norm(), (e + truth).norm()) < 1e-8);
    const Eigen::Vector3d sv = Eigen::JacobiSVD<Matrix3d>(e).singularValues();
    CHECK(sv(0) == doctest::Approx(sv(1)).epsilon(1e-12));
    CHECK(sv(2) < 1e-12);
  }
}

TEST_CASE("essential_from_rays: rays behind the image plane") {
  std::mt19937_64 rng(39);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix3d r = test::random_rotation(rng);
    const Point3d t = test::random_unit(rng);
    std::vector<Point3d> src, dst;
    for (const auto& p : test::random_cloud(rng, 20, Point3d(3, 3, 3))) {
      src.push_back(p.normalized());
      dst.push_back((r * p + t).normalized());
    }
    Matrix3d e = essential_from_rays(src, dst);
    Matrix3d truth = essential_from_pose(r, t);
    e /= e.norm();
    truth /= truth.norm();
    CHECK(std::min((e - truth).norm(), (e + truth).norm()) < 1e-8);
  }
}

TEST_CASE("essential_from_rays: input validation") {
  std::mt19937_64 rng(33);
  const Scene s = make_scene(rng, 8);
  CHECK_THROWS_AS(essential_from_rays(std::span(s.rays_source).first(7), std::span(s.rays_target).first(7)), Error);
  std::vector<Point3d> same(8, Point3d::UnitZ());
  CHECK_THROWS_AS(essential_from_rays(same, same), Error);
}

TEST_CASE("decompose_and_disambiguate: picks the pose with positive depths") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    const Scene s = make_scene(rng, 30);
    const Matrix3d e = essential_from_pose(s.rotation, s.direction);
    const RelativePose pose = decompose_and_disambiguate(e, s.rays_source, s.rays_target);
    CHECK(rotation_error_deg(pose.rotation, s.rotation) < 1e-6);
    CHECK(direction_error_deg(pose.translation_dir, s.direction) < 1e-6);
    CHECK(pose.inliers.size() == 30);
    CHECK(cheirality_count(s.rotation, s.direction, s.rays_source, s.rays_target) == 30);
    CHECK(cheirality_count(s.rotation, -s.direction, s.rays_source, s.rays_target) == 0);
  }
}

TEST_CASE("ransac_relative_pose: noiseless inliers give an exact pose") {
  std::mt19937_64 rng(35);
  const Scene s = make_scene(rng, 100, 0.3);
  const RelativePose pose = ransac_relative_pose(s.matches, kCam, kCam, {});
  CHECK(rotation_error_deg(pose.rotation, s.rotation) < 1e-4);
  CHECK(direction_error_deg(pose.translation_dir, s.direction) < 1e-4);
  CHECK(pose.inliers.size() >= 70);
  for (std::size_t i : pose.inliers) CHECK(i >= 30);
}

TEST_CASE("property: same seed, same answer") {
  std::mt19937_64 rng(36);
  const Scene s = make_scene(rng, 200, 0.3, 0.5);
  RansacConfig cfg;
  cfg.seed = 99;
  const RelativePose a = ransac_relative_pose(s.matches, kCam, kCam, cfg);
  const RelativePose b = ransac_relative_pose(s.matches, kCam, kCam, cfg);
  CHECK(a.rotation == b.rotation);
  CHECK(a.translation_dir == b.translation_dir);
  CHECK(a.inliers == b.inliers);
}

TEST_CASE("property: swapping views inverts the pose") {
  std::mt19937_64 rng(37);
  const Scene s = make_scene(rng, 150, 0.2);
  auto swapped = s.matches;
  for (auto& m : swapped) {
    std::swap(m.source_pixel, m.target_pixel);
    std::swap(m.source_depth, m.target_depth);
  }
  const RelativePose fwd = ransac_relative_pose(s.matches, kCam, kCam, {});
  const RelativePose bwd = ransac_relative_pose(swapped, kCam, kCam, {});
  CHECK(rotation_error_deg(bwd.rotation, fwd.rotation.transpose()) < 1e-4);
  CHECK(direction_error_deg(bwd.translation_dir, -(fwd.rotation.transpose() * fwd.translation_dir)) < 1e-4);
  CHECK(bwd.inliers == fwd.inliers);
}

TEST_CASE("ransac_relative_pose: too few matches") {
  std::mt19937_64 rng(38);
  const Scene s = make_scene(rng, 7);
  try {
    ransac_relative_pose(s.matches, kCam, kCam, {});
    FAIL("expected insufficient matches");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::insufficient_matches);
  }
}
