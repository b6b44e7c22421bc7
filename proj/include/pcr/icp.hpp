#pragma once

// Trimmed point-to-point ICP. Each iteration pairs every transformed source
// point with its nearest target point, rejects pairs longer than
// τ × median pair length, and re-solves R, T in closed form for
// J = Σ‖R·P_i + T − Q_i‖².

#include <span>
#include <vector>

#include "pcr/cloudio.hpp"
#include "pcr/nn_index.hpp"

namespace pcr {

struct IcpConfig {
  int max_iterations = 100;
  double rotation_tolerance = 1e-6;     // radians
  double translation_tolerance = 1e-6;  // fraction of the target diagonal
  double error_change_tolerance = 1e-9; // relative RMS change
  double trim_multiplier = 3.0;
};

struct Correspondence {
  std::size_t source = 0;
  std::size_t target = 0;
  double distance = 0.0;
};

struct IcpResult {
  Rigid3d transform;
  // Surviving pairs of the final iteration: θ(source) = target.
  std::vector<Correspondence> correspondences;
  std::vector<double> rms_trace;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;

  double rms() const { return rms_trace.empty() ? 0.0 : rms_trace.back(); }
};

std::vector<Correspondence> correspond(std::span<const Point3d> source, const NNIndex& index,
                                       const Rigid3d& transform, double trim_multiplier);

IcpResult icp_register(const Cloud& source, const Cloud& target, const IcpConfig& cfg = {});

/// Σ‖R·P_i + T − Q_{θ(i)}‖² with θ given as a full map over source indices.
double objective(std::span<const Point3d> source, std::span<const Point3d> target,
                 std::span<const std::size_t> theta, const Rigid3d& transform);

/// Same objective restricted to an explicit pair list.
double objective(std::span<const Point3d> source, std::span<const Point3d> target,
                 std::span<const Correspondence> pairs, const Rigid3d& transform);

}  // namespace pcr
