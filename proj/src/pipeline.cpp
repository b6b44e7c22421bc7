#include "pcr/pipeline.hpp"

#include <utility>

namespace pcr {

namespace {

template <typename F>
auto at_stage(Stage stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const Error& e) {
    throw PipelineError(stage, e.code(), e.what());
  }
}

Cloud scaled(const Cloud& cloud, double s) {
  Cloud out;
  out.label = cloud.label;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(s * p);
  return out;
}

Cloud transformed(const Cloud& cloud, const Rigid3d& t) {
  Cloud out;
  out.label = cloud.label;
  out.points = transform_points(t, cloud.points);
  return out;
}

Cloud filtered(const Cloud& cloud, const FilterConfig& cfg) { return remove_remote(crop_lower(cloud, cfg), cfg); }

}  // namespace

std::string_view stage_name(Stage stage) noexcept {
  switch (stage) {
    case Stage::io: return "io";
    case Stage::scale: return "scale";
    case Stage::relpose: return "relpose";
    case Stage::icp: return "icp";
    case Stage::covariance: return "covariance";
  }
  return "unknown";
}

PipelineResult register_clouds(const PipelineInputs& in, const PipelineConfig& cfg) {
  PipelineResult out;
  PipelineReport& report = out.report;

  double scale = 1.0;
  Rigid3d initial;
  if (cfg.use_scale) {
    const ScaleDetection detection =
        at_stage(Stage::scale, [&] { return detect_scale(in.source, in.target, cfg.detection_tolerance); });
    out.detection = detection;
    report.scale_detected = detection.differs;
    if (detection.differs) {
      if (!in.matches || !in.k_source || !in.k_target)
        throw PipelineError(Stage::scale, Errc::missing_input, "scale estimation requires matches");
      RansacConfig ransac = cfg.ransac;
      ransac.seed = cfg.seed;
      const RelativePose pose =
          at_stage(Stage::relpose, [&] { return ransac_relative_pose(*in.matches, *in.k_source, *in.k_target, ransac); });
      KalmanConfig kalman = cfg.kalman;
      kalman.initial_scale = detection.ratio;
      const ScaleEstimate est = at_stage(
          Stage::scale, [&] { return estimate_scale_kalman(*in.matches, *in.k_source, *in.k_target, pose, kalman); });
      scale = est.scale;
      initial = Rigid3d(pose.rotation, est.translation_magnitude * pose.translation_dir);
      report.relative_pose = Rigid3d(pose.rotation, pose.translation_dir);
      out.relative_pose = pose;
      out.scale_estimate = est;
    }
  }
  report.scale = scale;

  // Bring the source into the target frame with the keyframe estimate, then
  // let ICP refine the rigid part on the filtered clouds.
  const Cloud source_scaled = scaled(in.source, scale);
  const Cloud source_seeded = transformed(source_scaled, initial);
  const auto [icp_source, icp_target] = at_stage(Stage::icp, [&] {
    return cfg.use_filter ? std::pair{filtered(source_seeded, cfg.filter), filtered(in.target, cfg.filter)}
                          : std::pair{source_seeded, in.target};
  });
  out.icp = at_stage(Stage::icp, [&] { return icp_register(icp_source, icp_target, cfg.icp); });

  const Rigid3d rigid = out.icp.transform * initial;
  report.icp_transform = rigid;
  report.final_transform = Sim3d(scale, rigid);
  report.rms = out.icp.rms();
  report.iterations = out.icp.iterations;

  out.transformed.label = in.source.label;
  out.transformed.points = transform_points(report.final_transform, in.source.points);

  out.covariance = at_stage(Stage::covariance, [&] {
    const Rigid3d back = initial.inverse();
    std::vector<PointPair> pairs;
    pairs.reserve(out.icp.correspondences.size());
    for (const auto& c : out.icp.correspondences)
      pairs.push_back({back(icp_source.points[c.source]), icp_target.points[c.target]});
    const auto capped = cap_pairs(pairs, cfg.correspondence_cap, cfg.seed);
    return covariance(capped, pose_to_param(rigid), cfg.sigma_z);
  });
  report.covariance = out.covariance.cov_x;
  report.information = out.covariance.information;
  return out;
}

PipelineReport run_pipeline(const PipelineConfig& cfg) {
  PipelineInputs in;
  at_stage(Stage::io, [&] {
    in.source = read_ply(cfg.source_path);
    in.target = read_ply(cfg.target_path);
    if (cfg.matches_path) in.matches = read_matches(*cfg.matches_path);
    if (cfg.intrinsics_source_path) in.k_source = read_intrinsics(*cfg.intrinsics_source_path);
    if (cfg.intrinsics_target_path) in.k_target = read_intrinsics(*cfg.intrinsics_target_path);
    if (in.matches && (!in.k_source || !in.k_target))
      throw Error(Errc::missing_input, "matches require intrinsics for both keyframes");
  });

  const PipelineResult result = register_clouds(in, cfg);

  at_stage(Stage::io, [&] {
    write_report(result.report, cfg.report_path);
    if (cfg.transformed_path) write_ply(result.transformed, *cfg.transformed_path, PlyFormat::binary_little_endian);
  });
  return result.report;
}

}  // namespace pcr
