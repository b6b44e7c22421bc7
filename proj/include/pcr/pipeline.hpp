#pragma once

// End-to-end registration: scale detection, keyframe relative pose and
// Kalman scale estimation, filtering, trimmed ICP, and the 6×6 covariance /
// information matrix of the resulting edge.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pcr/cloudio.hpp"
#include "pcr/filters.hpp"
#include "pcr/icp.hpp"
#include "pcr/icpcov.hpp"
#include "pcr/relpose.hpp"
#include "pcr/scale.hpp"

namespace pcr {

enum class Stage { io = 1, scale = 2, relpose = 3, icp = 4, covariance = 5 };

std::string_view stage_name(Stage stage) noexcept;

/// A module error tagged with the pipeline stage that raised it. The stage
/// number doubles as the process exit code.
class PipelineError : public Error {
 public:
  PipelineError(Stage stage, Errc code, const std::string& what)
      : Error(code, std::string(stage_name(stage)) + ": " + what), stage_(stage) {}

  Stage stage() const noexcept { return stage_; }
  int exit_code() const noexcept { return static_cast<int>(stage_); }

 private:
  Stage stage_;
};

struct PipelineConfig {
  std::filesystem::path source_path;
  std::filesystem::path target_path;
  std::optional<std::filesystem::path> matches_path;
  std::optional<std::filesystem::path> intrinsics_source_path;
  std::optional<std::filesystem::path> intrinsics_target_path;
  std::filesystem::path report_path;
  std::optional<std::filesystem::path> transformed_path;

  bool use_scale = true;
  bool use_filter = true;
  double detection_tolerance = kDefaultDetectionTolerance;
  KalmanConfig kalman;  // initial_scale is replaced by the detected ratio
  RansacConfig ransac;
  FilterConfig filter;
  IcpConfig icp;
  double sigma_z = 0.01;
  std::size_t correspondence_cap = 2000;
  std::uint64_t seed = 42;
};

struct PipelineInputs {
  Cloud source;
  Cloud target;
  std::optional<std::vector<MatchRecord>> matches;
  std::optional<CameraIntrinsics> k_source;
  std::optional<CameraIntrinsics> k_target;
};

struct PipelineResult {
  PipelineReport report;
  Cloud transformed;  // original source under the final similarity
  std::optional<ScaleDetection> detection;
  std::optional<RelativePose> relative_pose;
  std::optional<ScaleEstimate> scale_estimate;
  IcpResult icp;
  CovarianceResult covariance;
};

/// In-memory pipeline. Clouds are taken to be expressed in their keyframe
/// camera frames, so the keyframe relative pose seeds the ICP stage.
PipelineResult register_clouds(const PipelineInputs& inputs, const PipelineConfig& cfg);

/// Reads every input named in `cfg`, runs register_clouds, and writes the
/// report (and the transformed cloud when requested).
PipelineReport run_pipeline(const PipelineConfig& cfg);

// ---------------------------------------------------------------- synthetic

struct SyntheticSpec {
  double scale = 2.5;
  double rotation_deg = 15.0;
  double translation_fraction = 0.5;  // |t| as a fraction of the target diagonal
  std::size_t points = 2000;
  std::size_t matches = 200;
  // Cloud noise std as a fraction of the target diagonal. Match depths get
  // the same relative noise and keypoints 60·noise pixels.
  double noise = 0.005;
  double outlier_fraction = 0.3;
  std::uint64_t seed = 7;
};

struct SyntheticScene {
  Cloud source;
  Cloud target;
  std::vector<MatchRecord> matches;
  CameraIntrinsics k_source;
  CameraIntrinsics k_target;
  Sim3d truth;
  std::vector<std::size_t> outlier_rows;
};

SyntheticScene make_synthetic_scene(const SyntheticSpec& spec);

struct SyntheticPaths {
  std::filesystem::path source, target, matches, intrinsics_source, intrinsics_target, ground_truth;
};

SyntheticPaths synthetic_paths(const std::filesystem::path& dir);

/// Writes source.ply, target.ply, matches.csv, intrinsics_source.json,
/// intrinsics_target.json and ground_truth.json into `dir`.
SyntheticPaths generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir);

std::string format_ground_truth(const SyntheticScene& scene);

struct GroundTruth {
  Sim3d transform;
  std::vector<std::size_t> outlier_rows;
};

GroundTruth read_ground_truth(const std::filesystem::path& path);

}  // namespace pcr
