#pragma once

// File formats: PLY point clouds (ASCII and binary little-endian), keypoint
// match CSV files, camera intrinsics JSON and the pipeline report JSON.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pcr/geom.hpp"

namespace pcr {

struct Cloud {
  std::vector<Point3d> points;
  std::string label;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// A matched keypoint pair; depths are in each session's own units.
struct MatchRecord {
  Eigen::Vector2d source_pixel = Eigen::Vector2d::Zero();
  std::optional<double> source_depth;
  Eigen::Vector2d target_pixel = Eigen::Vector2d::Zero();
  std::optional<double> target_depth;
};

struct PipelineReport {
  bool scale_detected = false;
  double scale = 1.0;
  // Keyframe relative pose; the translation is a unit direction (zero when
  // the relative-pose stage did not run).
  Rigid3d relative_pose;
  Rigid3d icp_transform;
  Sim3d final_transform;
  double rms = 0.0;
  int iterations = 0;
  Matrix6d covariance = Matrix6d::Identity();
  Matrix6d information = Matrix6d::Identity();
};

enum class PlyFormat { ascii, binary_little_endian };

Cloud read_ply(const std::filesystem::path& path);
/// Parses PLY bytes already in memory. Never throws anything but pcr::Error.
Cloud parse_ply(std::string_view bytes, std::string label = {});
void write_ply(const Cloud& cloud, const std::filesystem::path& path, PlyFormat format);
std::string format_ply(const Cloud& cloud, PlyFormat format);

std::vector<MatchRecord> read_matches(const std::filesystem::path& path);
std::vector<MatchRecord> parse_matches(std::string_view text);
std::string format_matches(const std::vector<MatchRecord>& matches);

CameraIntrinsics read_intrinsics(const std::filesystem::path& path);
CameraIntrinsics parse_intrinsics(std::string_view text);
std::string format_intrinsics(const CameraIntrinsics& k);

void write_report(const PipelineReport& report, const std::filesystem::path& path);
std::string format_report(const PipelineReport& report);
PipelineReport read_report(const std::filesystem::path& path);
PipelineReport parse_report(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace pcr
