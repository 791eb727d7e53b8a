#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "kwnav/geometry.hpp"

namespace kwnav {

/// Planned corridor in CT-image coordinates.
struct TrajectoryPlan {
  Vec3 entry{0.0, 0.0, 0.0};
  Vec3 exit{0.0, 0.0, 0.0};
};

/// Throws DegenerateInputError when entry and exit are closer than 1 mm.
TrajectoryPlan make_plan(const Vec3& entry, const Vec3& exit);

struct WorldTrajectory {
  Vec3 entry_w{0.0, 0.0, 0.0};
  Vec3 exit_w{0.0, 0.0, 0.0};
  Line3 axis;  // direction = normalize(entry_w - exit_w), i.e. out of the body
};

/// Maps the planned corridor through F^W_H * F^H_P * F^P_I.
WorldTrajectory world_trajectory(const FramedTransform& f_wh,
                                 const FramedTransform& f_hp,
                                 const FramedTransform& f_pi,
                                 const TrajectoryPlan& plan);

/// Maps the calibrated shaft axis through F^W_H * F^H_C.
Line3 tool_axis_world(const FramedTransform& f_wh, const FramedTransform& f_hc,
                      const Line3& shaft_in_cannula);

/// Deviation circles at the entry and end planes. Each plane is orthogonal to
/// the desired trajectory through its planned point; the circle is centered
/// on that point, its radius is the in-plane distance to where the tool line
/// crosses the plane, and the hatch points from the crossing back toward the
/// center (the correction direction). Hatches are null at zero radius.
struct IndicatorGeometry {
  Vec3 entry_center{0.0, 0.0, 0.0};
  double entry_radius_mm = 0.0;
  std::optional<Vec3> entry_hatch;
  Vec3 end_center{0.0, 0.0, 0.0};
  double end_radius_mm = 0.0;
  std::optional<Vec3> end_hatch;
};

/// Tool line more than 89 degrees off the desired axis has no usable plane
/// intersection and throws NoIntersectionError (callers display a suspended
/// cue).
IndicatorGeometry error_indicator(const Line3& tool_w, const Vec3& entry_w,
                                  const Vec3& exit_w);

struct PointCloud {
  std::vector<Vec3> points;
};

/// Throws InputError if any coordinate is non-finite.
void validate_cloud(const PointCloud& cloud);

struct SurfaceMarker {
  Vec3 position{0.0, 0.0, 0.0};  // member of the input cloud
  Vec3 normal{0.0, 0.0, 1.0};    // unit, oriented toward the approaching tool
};

/// Skin insertion point: the cloud point nearest the desired trajectory,
/// with the local plane normal from the k nearest neighbors (SVD of their
/// covariance). k is clamped to the cloud size. The normal is oriented into
/// the half-space the tool approaches from, i.e. the side `axis.direction`
/// points to under this project's exit-to-entry axis convention.
SurfaceMarker surface_marker(const PointCloud& cloud, const Line3& axis_w,
                             std::size_t k = 500);

}  // namespace kwnav
