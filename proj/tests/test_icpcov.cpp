#include <doctest.h>

#include "pcr/icpcov.hpp"
#include "support.hpp"

using namespace pcr;

namespace {

std::vector<PointPair> make_pairs(std::mt19937_64& rng, std::size_t n, const Rigid3d& motion, double noise = 0.0) {
  std::normal_distribution<double> g(0.0, noise > 0 ? noise : 1.0);
  std::vector<PointPair> out;
  for (const auto& p : test::random_blob(rng, n)) {
    Point3d q = motion(p);
    if (noise > 0) q += Point3d(g(rng), g(rng), g(rng));
    out.push_back({p, q});
  }
  return out;
}

PoseParam random_param(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> t(-2, 2), a(-1.2, 1.2);
  PoseParam x;
  x << t(rng), t(rng), t(rng), a(rng), a(rng), a(rng);
  return x;
}

}  // namespace

TEST_CASE("euler_rotation matches an independent axis-angle composition") {
  std::mt19937_64 rng(61);
  for (int i = 0; i < 50; ++i) {
    const PoseParam x = random_param(rng);
    const Matrix3d mine = euler_rotation(x(3), x(4), x(5));
    const Matrix3d ref = test::euler_zyx(x(3), x(4), x(5)).cast<double>();
    CHECK((mine - ref).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("property: pose_to_param inverts param_to_pose away from gimbal lock") {
  std::mt19937_64 rng(62);
  for (int i = 0; i < 100; ++i) {
    const PoseParam x = random_param(rng);
    CHECK((pose_to_param(param_to_pose(x)) - x).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("hessian_xx: single-pair yaw-yaw entry by hand") {
  const std::vector<PointPair> one{{{2, 0, 0}, {1, 3, 0}}};
  std::vector<PointPair> three = one;
  // Extra pairs at the origin touch only the translation block.
  three.push_back({{0, 0, 0}, {0, 0, 0}});
  three.push_back({{0, 0, 0}, {0, 0, 0}});
  PoseParam x = PoseParam::Zero();
  CHECK(hessian_xx(three, x)(5, 5) == doctest::Approx(4.0).epsilon(1e-14));
  x(5) = M_PI / 6.0;
  CHECK(hessian_xx(three, x)(5, 5) == doctest::Approx(9.464101615137753).epsilon(1e-14));
  three[0].source = Point3d(0, 0, 2);
  CHECK(std::abs(hessian_xx(three, x)(5, 5)) < 1e-15);
}

TEST_CASE("hessian_xx: translation block is 2n·I") {
  std::mt19937_64 rng(63);
  const auto pairs = make_pairs(rng, 17, Rigid3d(), 0.1);
  const Matrix6d h = hessian_xx(pairs, random_param(rng));
  CHECK((h.topLeftCorner<3, 3>() - 34.0 * Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((h - h.transpose()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("hessian_zx: translation rows cancel at zero rotation") {
  std::mt19937_64 rng(64);
  const auto pairs = make_pairs(rng, 5, Rigid3d(), 0.1);
  PoseParam x = PoseParam::Zero();
  x.head<3>() = Point3d(0.3, -0.2, 0.1);
  const Eigen::MatrixXd b = hessian_zx(pairs, x);
  REQUIRE(b.cols() == 30);
  for (Eigen::Index i = 0; i < 5; ++i) {
    const Matrix3d sum = b.block<3, 3>(0, 6 * i) + b.block<3, 3>(0, 6 * i + 3);
    CHECK(sum.cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("property: analytic derivatives match finite differences") {
  std::mt19937_64 rng(65);
  for (int trial = 0; trial < 20; ++trial) {
    const PoseParam x = random_param(rng);
    const auto pairs = make_pairs(rng, 6, param_to_pose(random_param(rng)), 0.5);
    const Matrix6d h = hessian_xx(pairs, x);
    const Eigen::MatrixXd b = hessian_zx(pairs, x);
    CHECK(test::normwise_relative_error(h, test::fd_hessian_xx(pairs, x, 1e-4)) < 1e-4);
    CHECK(test::normwise_relative_error(b, test::fd_hessian_zx(pairs, x, 1e-4, 1e-4)) < 1e-4);
  }
}

TEST_CASE("derivatives refuse gimbal lock and too few pairs") {
  std::mt19937_64 rng(66);
  const auto pairs = make_pairs(rng, 5, Rigid3d());
  PoseParam x = PoseParam::Zero();
  x(4) = M_PI / 2.0;
  try {
    hessian_xx(pairs, x);
    FAIL("expected gimbal lock");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::gimbal_lock);
  }
  CHECK_THROWS_AS(hessian_zx(std::span(pairs).first(2), PoseParam::Zero()), Error);
}

TEST_CASE("covariance: symmetric, PSD, and scales with sigma squared") {
  std::mt19937_64 rng(67);
  const auto pairs = make_pairs(rng, 200, Rigid3d());
  const CovarianceResult a = covariance(pairs, PoseParam::Zero(), 0.01);
  const CovarianceResult b = covariance(pairs, PoseParam::Zero(), 0.03);
  CHECK((a.cov_x - a.cov_x.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix6d>(a.cov_x).eigenvalues().minCoeff() > 0.0);
  CHECK(test::normwise_relative_error(b.cov_x, 9.0 * a.cov_x) < 1e-12);
  CHECK_THROWS_AS(covariance(pairs, PoseParam::Zero(), 0.0), Error);
}

TEST_CASE("covariance: collinear pairs leave rotation about the line free") {
  std::vector<PointPair> line;
  for (int i = 0; i < 20; ++i) line.push_back({Point3d(i, 0, 0), Point3d(i, 0, 0)});
  try {
    covariance(line, PoseParam::Zero(), 0.01);
    FAIL("expected singular Hessian");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::singular_hessian);
  }
}

TEST_CASE("property: doubling the pair count halves the trace") {
  std::mt19937_64 rng(68);
  const auto pairs = make_pairs(rng, 2000, Rigid3d());
  const double small = covariance(std::span(pairs).first(1000), PoseParam::Zero(), 0.01).cov_x.trace();
  const double big = covariance(pairs, PoseParam::Zero(), 0.01).cov_x.trace();
  CHECK(big / small == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("property: Monte Carlo spread within a factor of 3") {
  std::mt19937_64 rng(69);
  const Rigid3d truth(euler_rotation(0.1, -0.2, 0.3), Point3d(0.5, 0.2, -0.1));
  const auto clean = make_pairs(rng, 300, truth);
  const double sigma = 0.01;
  const CovarianceResult cr = covariance(clean, pose_to_param(truth), sigma);

  std::normal_distribution<double> g(0.0, sigma);
  std::vector<PoseParam> samples;
  for (int run = 0; run < 200; ++run) {
    std::vector<Point3d> p, q;
    for (const auto& pr : clean) {
      p.push_back(pr.source + Point3d(g(rng), g(rng), g(rng)));
      q.push_back(pr.target + Point3d(g(rng), g(rng), g(rng)));
    }
    samples.push_back(pose_to_param(umeyama_align(p, q, false).rigid()));
  }
  PoseParam mean = PoseParam::Zero();
  for (const auto& s : samples) mean += s;
  mean /= static_cast<double>(samples.size());
  PoseParam var = PoseParam::Zero();
  for (const auto& s : samples) var += (s - mean).cwiseAbs2();
  var /= static_cast<double>(samples.size() - 1);
  for (int a = 0; a < 6; ++a) {
    const double ratio = std::sqrt(cr.cov_x(a, a) / var(a));
    CHECK(ratio > 1.0 / 3.0);
    CHECK(ratio < 3.0);
  }
}

TEST_CASE("information_matrix: inverse of the covariance") {
  std::mt19937_64 rng(70);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pairs = make_pairs(rng, 100, param_to_pose(random_param(rng)), 0.01);
    const CovarianceResult cr = covariance(pairs, random_param(rng), 0.01);
    REQUIRE_FALSE(cr.information_clamped);
    CHECK((cr.information * cr.cov_x - Matrix6d::Identity()).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("information_matrix: clamps rank-deficient input and rejects asymmetry") {
  Matrix6d cov = Matrix6d::Zero();
  cov.diagonal() << 1, 1, 1, 1, 1, 0;
  const InformationResult r = invert_covariance(cov);
  CHECK(r.clamped);
  CHECK(r.information.allFinite());
  Matrix6d asym = Matrix6d::Identity();
  asym(0, 1) = 0.5;
  try {
    information_matrix(asym);
    FAIL("expected asymmetry error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::non_symmetric_input);
  }
}

TEST_CASE("cap_pairs: seeded, order preserving, bounded") {
  std::vector<PointPair> pairs;
  for (int i = 0; i < 100; ++i) pairs.push_back({Point3d(i, 0, 0), Point3d(i, 0, 0)});
  const auto a = cap_pairs(pairs, 30, 5);
  const auto b = cap_pairs(pairs, 30, 5);
  REQUIRE(a.size() == 30);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].source == b[i].source);
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i].source.x() > a[i - 1].source.x());
  CHECK(cap_pairs(pairs, 500, 5).size() == 100);
}
