#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kwnav/geometry.hpp"

namespace kwnav {

/// Marker-body poses in the tracker frame recorded while the tool tip pivots
/// about a fixed point.
struct PivotDataset {
  std::vector<RigidTransform> observations;
};

struct PivotResult {
  Vec3 tip_offset{0.0, 0.0, 0.0};   // p_tip in the marker-body frame (mm)
  Vec3 pivot_point{0.0, 0.0, 0.0};  // fixed point in the tracker frame (mm)
  double rms_mm = 0.0;              // sqrt(mean ||r_i||^2)
  double mean_mm = 0.0;             // mean ||r_i||
  double condition_number = 0.0;    // of the stacked least-squares system
};

struct PivotOptions {
  std::size_t min_observations = 10;
  // Rotation-dispersion guard. The smallest singular value of the stacked
  // [R_i | -I] system, normalized by sqrt(n), equals
  // sqrt(1 - sigma_max(mean rotation)); it is zero iff all orientations
  // coincide. Reject below this threshold.
  double min_dispersion = 1e-3;
};

/// Solves R_i * p_tip + t_i = pivot_point for (p_tip, pivot_point) as one
/// linear least-squares system over all observations.
///
/// Residuals are r_i = R_i * p_tip + t_i - pivot_point; rms and mean of the
/// residual norms are reported independently (neither is derived from the
/// other).
///
/// Throws InsufficientDataError below min_observations and
/// DegenerateInputError when the orientations do not span enough rotation
/// (the condition number is included in the message).
PivotResult pivot_calibrate(const PivotDataset& data, const PivotOptions& options = {});

struct ShaftAxisFit {
  Line3 axis;                // in the marker-body frame
  double residual_rms_mm = 0.0;  // rms orthogonal distance of inputs to the axis
};

/// Total-least-squares line through tip offsets collected at successive wire
/// extensions: centroid plus principal direction of the centered points.
/// Direction sign is arbitrary. Throws InsufficientDataError for fewer than
/// 3 points or a coincident point set.
ShaftAxisFit shaft_axis_fit(std::span<const Vec3> tip_offsets);

}  // namespace kwnav
