#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <json.hpp>

#include "pcr/pipeline.hpp"

namespace pcr {

namespace {

constexpr double kImageWidth = 640.0;
constexpr double kImageHeight = 480.0;
constexpr double kPixelNoisePerUnit = 60.0;
// Outlier keypoints land at least this far from their true projection.
constexpr double kOutlierMinPixels = 25.0;

Point3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Point3d v;
  do {
    v = Point3d(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

SyntheticScene make_synthetic_scene(const SyntheticSpec& spec) {
  if (!(spec.scale > 0.0) || spec.points < 8 || spec.matches < 8 || spec.matches > spec.points ||
      spec.noise < 0.0 || spec.outlier_fraction < 0.0 || spec.outlier_fraction > 1.0)
    throw Error(Errc::invalid_argument, "synthetic scene specification is out of range");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SyntheticScene scene;
  scene.k_source = {525.0, 525.0, 319.5, 239.5};
  scene.k_target = scene.k_source;
  scene.source.label = "synthetic-source";
  scene.target.label = "synthetic-target";

  // A box of points in front of the source camera.
  scene.source.points.reserve(spec.points);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t i = 0; i < spec.points; ++i)
    scene.source.points.emplace_back(unit(rng), unit(rng), 4.0 + unit(rng));

  const Point3d axis = random_unit(rng);
  const Matrix3d rotation = rotation_about(axis, spec.rotation_deg * std::numbers::pi / 180.0);
  const double target_diag = spec.scale * bounds(scene.source.points).diagonal();
  // Keep the target session in front of its camera as well.
  Point3d dir = random_unit(rng);
  if (dir.z() < 0.0) dir.z() = -dir.z();
  scene.truth = Sim3d(spec.scale, rotation, spec.translation_fraction * target_diag * dir);

  std::vector<Point3d> clean = transform_points(scene.truth, scene.source.points);
  const double sigma = spec.noise * bounds(clean).diagonal();
  scene.target.points.reserve(clean.size());
  for (const auto& q : clean)
    scene.target.points.push_back(q + sigma * Point3d(gauss(rng), gauss(rng), gauss(rng)));

  // Keypoints: a random subset of cloud points seen by both cameras.
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < clean.size(); ++i)
    if (clean[i].z() > 0.1 * target_diag) candidates.push_back(i);
  if (candidates.size() < spec.matches)
    throw Error(Errc::invalid_argument, "too few points project into the target camera");
  std::shuffle(candidates.begin(), candidates.end(), rng);
  candidates.resize(spec.matches);

  const double pixel_sigma = kPixelNoisePerUnit * spec.noise;
  for (std::size_t idx : candidates) {
    const Point3d& p = scene.source.points[idx];
    const Point3d& q = clean[idx];
    MatchRecord m;
    m.source_pixel = project(p, scene.k_source) + pixel_sigma * Eigen::Vector2d(gauss(rng), gauss(rng));
    m.source_depth = p.z();
    m.target_pixel = project(q, scene.k_target) + pixel_sigma * Eigen::Vector2d(gauss(rng), gauss(rng));
    m.target_depth = q.z() * (1.0 + spec.noise * gauss(rng));
    scene.matches.push_back(m);
  }

  const auto outliers = static_cast<std::size_t>(std::llround(spec.outlier_fraction * double(spec.matches)));
  std::vector<std::size_t> rows(spec.matches);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(outliers);
  std::sort(rows.begin(), rows.end());

  double dmin = scene.matches.front().target_depth.value(), dmax = dmin;
  for (const auto& m : scene.matches) {
    dmin = std::min(dmin, *m.target_depth);
    dmax = std::max(dmax, *m.target_depth);
  }
  std::uniform_real_distribution<double> px(0.0, kImageWidth), py(0.0, kImageHeight), depth(dmin, dmax);
  for (std::size_t row : rows) {
    MatchRecord& m = scene.matches[row];
    const Eigen::Vector2d truth = project(clean[candidates[row]], scene.k_target);
    do {
      m.target_pixel = {px(rng), py(rng)};
    } while ((m.target_pixel - truth).norm() < kOutlierMinPixels);
    m.target_depth = depth(rng);
  }
  scene.outlier_rows = std::move(rows);
  return scene;
}

std::string format_ground_truth(const SyntheticScene& scene) {
  const Matrix3d& r = scene.truth.rotation();
  const Point3d& t = scene.truth.translation();
  std::string out = "{\n  \"scale\": " + format_number(scene.truth.scale()) + ",\n  \"rotation\": [";
  for (int i = 0; i < 9; ++i) out += (i ? ", " : "") + format_number(r(i / 3, i % 3));
  out += "],\n  \"translation\": [";
  for (int i = 0; i < 3; ++i) out += (i ? ", " : "") + format_number(t(i));
  out += "],\n  \"outlier_rows\": [";
  for (std::size_t i = 0; i < scene.outlier_rows.size(); ++i)
    out += (i ? ", " : "") + std::to_string(scene.outlier_rows[i]);
  out += "]\n}\n";
  return out;
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::parse_error, "ground truth is not a JSON object");
  try {
    Matrix3d r;
    for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = j.at("rotation").at(static_cast<std::size_t>(i)).get<double>();
    Point3d t;
    for (int i = 0; i < 3; ++i) t(i) = j.at("translation").at(static_cast<std::size_t>(i)).get<double>();
    GroundTruth gt{Sim3d(j.at("scale").get<double>(), r, t), j.at("outlier_rows").get<std::vector<std::size_t>>()};
    return gt;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("ground truth: ") + e.what());
  }
}

SyntheticPaths synthetic_paths(const std::filesystem::path& dir) {
  return {dir / "source.ply",
          dir / "target.ply",
          dir / "matches.csv",
          dir / "intrinsics_source.json",
          dir / "intrinsics_target.json",
          dir / "ground_truth.json"};
}

SyntheticPaths generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir) {
  const SyntheticScene scene = make_synthetic_scene(spec);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_error, "cannot create '" + dir.string() + "': " + ec.message());
  const SyntheticPaths paths = synthetic_paths(dir);
  write_ply(scene.source, paths.source, PlyFormat::binary_little_endian);
  write_ply(scene.target, paths.target, PlyFormat::binary_little_endian);
  write_file(paths.matches, format_matches(scene.matches));
  write_file(paths.intrinsics_source, format_intrinsics(scene.k_source));
  write_file(paths.intrinsics_target, format_intrinsics(scene.k_target));
  write_file(paths.ground_truth, format_ground_truth(scene));
  return paths;
}

}  // namespace pcr
