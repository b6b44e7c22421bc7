#include "pcr/relpose.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include <unsupported/Eigen/NumericalDiff>
#include <unsupported/Eigen/NonLinearOptimization>

namespace pcr {

namespace {

// Depths (λs, λt) of the closest approach between the rays λs·R·f_s + t
// and λt·f_t, both expressed in the target frame.
bool in_front_of_both(const Matrix3d& rotation, const Point3d& translation, const Point3d& ray_source,
                      const Point3d& ray_target) {
  const Point3d a = (rotation * ray_source).normalized();
  const Point3d b = ray_target.normalized();
  const double c = a.dot(b);
  const double denom = 1.0 - c * c;
  if (denom < 1e-12) return c > 0.0;  // parallel rays: point at infinity
  const double at = a.dot(translation);
  const double bt = b.dot(translation);
  const double depth_source = (-at + c * bt) / denom;
  const double depth_target = (bt - c * at) / denom;
  return depth_source > 0.0 && depth_target > 0.0;
}

// Similarity on the z = 1 plane that centres the points and sets their mean
// distance from the origin to √2.
Matrix3d conditioning(std::span<const Point3d> rays) {
  Eigen::Vector2d centre = Eigen::Vector2d::Zero();
  for (const auto& r : rays) centre += r.head<2>() / r.z();
  centre /= static_cast<double>(rays.size());
  double spread = 0.0;
  for (const auto& r : rays) spread += (r.head<2>() / r.z() - centre).norm();
  spread /= static_cast<double>(rays.size());
  const double k = spread > 0.0 ? std::sqrt(2.0) / spread : 1.0;
  Matrix3d m;
  m << k, 0, -k * centre.x(), 0, k, -k * centre.y(), 0, 0, 1;
  return m;
}

std::vector<Point3d> gather(std::span<const Point3d> rays, std::span<const std::size_t> idx) {
  std::vector<Point3d> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(rays[i]);
  return out;
}

struct Consensus {
  std::vector<std::size_t> inliers;
  double total_residual = 0.0;
};

Consensus score(const Matrix3d& essential, std::span<const Point3d> rays_source,
                std::span<const Point3d> rays_target, double threshold) {
  Consensus c;
  for (std::size_t i = 0; i < rays_source.size(); ++i) {
    const double r = epipolar_residual(essential, rays_source[i], rays_target[i]);
    if (r <= threshold) {
      c.inliers.push_back(i);
      c.total_residual += r;
    }
  }
  return c;
}

bool better(const Consensus& a, const Consensus& b) {
  return a.inliers.size() > b.inliers.size() ||
         (a.inliers.size() == b.inliers.size() && a.total_residual < b.total_residual);
}

std::optional<Matrix3d> refit(std::span<const Point3d> rays_source, std::span<const Point3d> rays_target,
                              std::span<const std::size_t> inliers) {
  if (inliers.size() < 8) return std::nullopt;
  try {
    return essential_from_rays(gather(rays_source, inliers), gather(rays_target, inliers));
  } catch (const Error&) {
    return std::nullopt;
  }
}

// Local optimisation of a hypothesis: refit on its support under a widened
// threshold that shrinks back to the nominal one, then refit at the nominal
// threshold until support stops growing. The residual is quadratic in the
// angle, so widening the angle by k scales the threshold by k².
Consensus local_refine(Consensus c, std::span<const Point3d> rays_source, std::span<const Point3d> rays_target,
                       double threshold) {
  Consensus work = c;
  for (double k : {4.0, 3.0, 2.0}) {
    const auto essential = refit(rays_source, rays_target, work.inliers);
    if (!essential) break;
    work = score(*essential, rays_source, rays_target, k * k * threshold);
    Consensus nominal = score(*essential, rays_source, rays_target, threshold);
    if (better(nominal, c)) c = std::move(nominal);
  }
  for (int round = 0; round < 10; ++round) {
    const auto essential = refit(rays_source, rays_target, c.inliers);
    if (!essential) break;
    Consensus next = score(*essential, rays_source, rays_target, threshold);
    if (!better(next, c)) break;
    c = std::move(next);
  }
  return c;
}

// Epipolar error of each unit ray pair, normalised by both epipolar plane
// normals so that swapping the views leaves it unchanged. Parameters: a rotation increment (3) applied on the left of
// the base rotation and a step (2) in the tangent plane of the base direction.
struct EpipolarResiduals {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  Matrix3d base_rotation;
  Point3d base_dir;
  Eigen::Matrix<double, 3, 2> tangent;
  std::vector<Point3d> source;
  std::vector<Point3d> target;

  int inputs() const { return 5; }
  int values() const { return static_cast<int>(source.size()); }

  Matrix3d rotation(const Eigen::VectorXd& x) const {
    const Point3d w = x.head<3>();
    const double angle = w.norm();
    const Matrix3d step = angle > 0.0 ? Matrix3d(Eigen::AngleAxisd(angle, w / angle)) : Matrix3d::Identity();
    return step * base_rotation;
  }
  Point3d direction(const Eigen::VectorXd& x) const { return (base_dir + tangent * x.tail<2>()).normalized(); }

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    const Matrix3d r = rotation(x);
    const Point3d t = direction(x);
    for (std::size_t i = 0; i < source.size(); ++i) {
      const Point3d normal_source = t.cross(r * source[i]);
      const Point3d normal_target = r.transpose() * target[i].cross(t);
      const double nn = std::sqrt(normal_source.squaredNorm() + normal_target.squaredNorm());
      out(static_cast<Eigen::Index>(i)) = nn > 0.0 ? normal_source.dot(target[i]) / nn : 0.0;
    }
    return 0;
  }
};

// Levenberg-Marquardt on the angular epipolar residual. The linear fit
// minimises an algebraic error that is poorly conditioned for narrow fields
// of view; this polishes it on the consensus set.
RelativePose polish(const RelativePose& start, std::span<const Point3d> rays_source,
                    std::span<const Point3d> rays_target, std::span<const std::size_t> inliers) {
  EpipolarResiduals f;
  f.base_rotation = start.rotation;
  f.base_dir = start.translation_dir.normalized();
  Eigen::JacobiSVD<Eigen::Matrix<double, 1, 3>> svd(f.base_dir.transpose(), Eigen::ComputeFullV);
  f.tangent = svd.matrixV().rightCols<2>();
  for (std::size_t i : inliers) {
    f.source.push_back(rays_source[i].normalized());
    f.target.push_back(rays_target[i].normalized());
  }

  Eigen::NumericalDiff<EpipolarResiduals, Eigen::Central> diff(f);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<EpipolarResiduals, Eigen::Central>> lm(diff);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(5);
  lm.minimize(x);

  RelativePose out = start;
  out.rotation = project_to_rotation(f.rotation(x));
  out.translation_dir = f.direction(x);
  return out;
}

}  // namespace

double angular_threshold(double pixel_threshold, double focal_length) {
  if (!(pixel_threshold > 0.0) || !(focal_length > 0.0))
    throw Error(Errc::nonpositive_input, "angular_threshold: inputs must be positive");
  return 1.0 - std::cos(std::atan(pixel_threshold / focal_length));
}

Point3d bearing(const Eigen::Vector2d& pixel, const CameraIntrinsics& k) {
  return Point3d((pixel.x() - k.cx) / k.fx, (pixel.y() - k.cy) / k.fy, 1.0).normalized();
}

Matrix3d essential_from_pose(const Matrix3d& rotation, const Point3d& translation) {
  return skew(translation) * rotation;
}

Matrix3d essential_from_rays(std::span<const Point3d> rays_source, std::span<const Point3d> rays_target) {
  if (rays_source.size() != rays_target.size())
    throw Error(Errc::invalid_argument, "essential_from_rays: ray lists differ in length");
  if (rays_source.size() < 8)
    throw Error(Errc::insufficient_matches, "essential_from_rays: need at least 8 correspondences");

  // Rays in front of both cameras are moved to the z = 1 plane and
  // conditioned there; other rays are used as unit vectors.
  const bool planar = std::all_of(rays_source.begin(), rays_source.end(), [](const Point3d& r) { return r.z() > 0.0; }) &&
                      std::all_of(rays_target.begin(), rays_target.end(), [](const Point3d& r) { return r.z() > 0.0; });
  const Matrix3d cond_s = planar ? conditioning(rays_source) : Matrix3d::Identity();
  const Matrix3d cond_t = planar ? conditioning(rays_target) : Matrix3d::Identity();

  const auto n = static_cast<Eigen::Index>(rays_source.size());
  Eigen::Matrix<double, Eigen::Dynamic, 9> a(n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point3d& rs = rays_source[static_cast<std::size_t>(i)];
    const Point3d& rt = rays_target[static_cast<std::size_t>(i)];
    const Point3d s = planar ? Point3d(cond_s * (rs / rs.z())) : Point3d(rs.normalized());
    const Point3d t = planar ? Point3d(cond_t * (rt / rt.z())) : Point3d(rt.normalized());
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) a(i, 3 * r + c) = t(r) * s(c);
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv.size() < 8 || !(sv(0) > 0.0) || sv(7) <= 1e-10 * sv(0))
    throw Error(Errc::degenerate_configuration, "essential_from_rays: data matrix has rank below 8");

  const Eigen::Matrix<double, 9, 1> e = svd.matrixV().col(8);
  const Matrix3d conditioned = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(e.data());
  const Matrix3d raw = cond_t.transpose() * conditioned * cond_s;

  Eigen::JacobiSVD<Matrix3d> esvd(raw, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double sigma = 0.5 * (esvd.singularValues()(0) + esvd.singularValues()(1));
  return esvd.matrixU() * Eigen::Vector3d(sigma, sigma, 0.0).asDiagonal() * esvd.matrixV().transpose();
}

double epipolar_residual(const Matrix3d& essential, const Point3d& ray_source, const Point3d& ray_target) {
  const Point3d normal = essential * ray_source;
  const double nn = normal.norm() * ray_target.norm();
  if (!(nn > 0.0)) return 0.0;
  const double sin_angle = normal.dot(ray_target) / nn;
  const double x = std::min(1.0, sin_angle * sin_angle);
  return x / (1.0 + std::sqrt(1.0 - x));  // 1 − cos, cancellation-free
}

std::size_t cheirality_count(const Matrix3d& rotation, const Point3d& translation,
                             std::span<const Point3d> rays_source, std::span<const Point3d> rays_target) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < rays_source.size(); ++i)
    if (in_front_of_both(rotation, translation, rays_source[i], rays_target[i])) ++count;
  return count;
}

RelativePose decompose_and_disambiguate(const Matrix3d& essential, std::span<const Point3d> rays_source,
                                        std::span<const Point3d> rays_target) {
  if (rays_source.empty() || rays_source.size() != rays_target.size())
    throw Error(Errc::invalid_argument, "decompose_and_disambiguate: need matching, non-empty ray lists");

  Eigen::JacobiSVD<Matrix3d> svd(essential, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d u = svd.matrixU();
  Matrix3d v = svd.matrixV();
  if (u.determinant() < 0.0) u = -u;
  if (v.determinant() < 0.0) v = -v;
  Matrix3d w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;

  const std::array<Matrix3d, 2> rotations{u * w * v.transpose(), u * w.transpose() * v.transpose()};
  const Point3d t = u.col(2).normalized();

  std::size_t best = 0, runner_up = 0;
  RelativePose pose;
  for (const Matrix3d& r : rotations) {
    for (const Point3d& cand : {t, Point3d(-t)}) {
      const std::size_t count = cheirality_count(r, cand, rays_source, rays_target);
      if (count > best) {
        runner_up = best;
        best = count;
        pose.rotation = r;
        pose.translation_dir = cand;
      } else if (count > runner_up) {
        runner_up = count;
      }
    }
  }
  if (best == runner_up)
    throw Error(Errc::ambiguous_decomposition, "essential matrix decomposition is ambiguous under cheirality");

  pose.rotation = project_to_rotation(pose.rotation);
  for (std::size_t i = 0; i < rays_source.size(); ++i)
    if (in_front_of_both(pose.rotation, pose.translation_dir, rays_source[i], rays_target[i]))
      pose.inliers.push_back(i);
  return pose;
}

RelativePose ransac_relative_pose(std::span<const MatchRecord> matches, const CameraIntrinsics& k_source,
                                  const CameraIntrinsics& k_target, const RansacConfig& cfg) {
  constexpr std::size_t kSample = 8;
  if (matches.size() < kSample)
    throw Error(Errc::insufficient_matches, "relative pose needs at least 8 matches");
  if (cfg.max_iterations < 1) throw Error(Errc::invalid_argument, "RANSAC needs at least one iteration");

  const double threshold = angular_threshold(cfg.pixel_threshold, cfg.focal_length.value_or(k_target.fx));

  std::vector<Point3d> rays_s, rays_t;
  rays_s.reserve(matches.size());
  rays_t.reserve(matches.size());
  for (const auto& m : matches) {
    rays_s.push_back(bearing(m.source_pixel, k_source));
    rays_t.push_back(bearing(m.target_pixel, k_target));
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(matches.size());
  std::array<std::size_t, kSample> sample{};
  Consensus best;
  bool have_best = false;

  for (int it = 0; it < cfg.max_iterations; ++it) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = 0; k < kSample; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, order.size() - 1);
      std::swap(order[k], order[pick(rng)]);
      sample[k] = order[k];
    }
    Matrix3d essential;
    try {
      essential = essential_from_rays(gather(rays_s, sample), gather(rays_t, sample));
    } catch (const Error&) {
      continue;
    }
    // Minimal eight-point fits are noise-sensitive, so every hypothesis is
    // refined on its own consensus set before it competes. Equal counts are
    // broken by the summed residual; an exact tie keeps the earlier model so
    // the outcome depends only on the seed.
    Consensus c = local_refine(score(essential, rays_s, rays_t, threshold), rays_s, rays_t, threshold);
    if (!have_best || better(c, best)) {
      best = std::move(c);
      have_best = true;
    }
  }
  if (!have_best || best.inliers.size() < kSample)
    throw Error(Errc::no_consensus, "RANSAC found no model with at least 8 inliers");

  // Refit on the consensus set, polish the decomposed pose, then re-score
  // so every reported inlier satisfies the threshold for the returned model.
  // A round that loses support keeps the previous pose.
  std::optional<RelativePose> pose;
  std::vector<std::size_t> inliers = best.inliers;
  for (int round = 0; round < 5; ++round) {
    const auto in_s = gather(rays_s, inliers);
    const auto in_t = gather(rays_t, inliers);
    RelativePose candidate;
    try {
      candidate = decompose_and_disambiguate(essential_from_rays(in_s, in_t), in_s, in_t);
      candidate = polish(candidate, rays_s, rays_t, inliers);
    } catch (const Error&) {
      if (pose) break;
      throw;
    }
    Consensus refit =
        score(essential_from_pose(candidate.rotation, candidate.translation_dir), rays_s, rays_t, threshold);
    if (pose && refit.inliers.size() < pose->inliers.size()) break;
    if (refit.inliers.size() < kSample) break;
    const bool stable = refit.inliers == inliers;
    candidate.inliers = refit.inliers;
    pose = std::move(candidate);
    inliers = std::move(refit.inliers);
    if (stable) break;
  }
  if (!pose) throw Error(Errc::no_consensus, "refit relative pose keeps fewer than 8 inliers");
  return *pose;
}

}  // namespace pcr
