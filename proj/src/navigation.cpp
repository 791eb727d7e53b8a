#include "kwnav/navigation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kwnav {

namespace {

constexpr double kPlaneGuardDeg = 89.0;

// Intersection of `line` with the plane through `anchor` orthogonal to
// `axis_dir` (unit). Throws when the line is within 1 degree of the plane.
Vec3 intersect_plane(const Line3& line, const Vec3& anchor, const Vec3& axis_dir) {
  if (axis_deviation_deg(line.direction, axis_dir) > kPlaneGuardDeg) {
    throw NoIntersectionError(
        "tool line is near-parallel to the deviation plane; no intersection");
  }
  const double denom = line.direction.dot(axis_dir);
  const double t = (anchor - line.point).dot(axis_dir) / denom;
  return line.point + t * line.direction;
}

struct CircleResult {
  double radius;
  std::optional<Vec3> hatch;
};

CircleResult deviation_circle(const Line3& tool, const Vec3& anchor,
                              const Vec3& axis_dir) {
  const Vec3 hit = intersect_plane(tool, anchor, axis_dir);
  const Vec3 offset = anchor - hit;  // in-plane by construction
  const double radius = offset.norm();
  if (radius < 1e-9) return {radius, std::nullopt};
  return {radius, offset / radius};
}

}  // namespace

TrajectoryPlan make_plan(const Vec3& entry, const Vec3& exit) {
  if ((entry - exit).norm() <= 1.0) {
    throw DegenerateInputError(
        "trajectory plan: entry and exit must be more than 1 mm apart");
  }
  return {entry, exit};
}

WorldTrajectory world_trajectory(const FramedTransform& f_wh,
                                 const FramedTransform& f_hp,
                                 const FramedTransform& f_pi,
                                 const TrajectoryPlan& plan) {
  const FramedTransform chain = f_wh * f_hp * f_pi;  // W <- I, frame-checked
  WorldTrajectory out;
  out.entry_w = transform_point(chain, plan.entry);
  out.exit_w = transform_point(chain, plan.exit);
  out.axis = make_line(out.entry_w, out.entry_w - out.exit_w);
  return out;
}

Line3 tool_axis_world(const FramedTransform& f_wh, const FramedTransform& f_hc,
                      const Line3& shaft_in_cannula) {
  return transform_line(f_wh * f_hc, shaft_in_cannula);
}

IndicatorGeometry error_indicator(const Line3& tool_w, const Vec3& entry_w,
                                  const Vec3& exit_w) {
  const Vec3 axis_dir = (entry_w - exit_w).normalized();
  IndicatorGeometry out;
  out.entry_center = entry_w;
  out.end_center = exit_w;
  const CircleResult entry = deviation_circle(tool_w, entry_w, axis_dir);
  const CircleResult end = deviation_circle(tool_w, exit_w, axis_dir);
  out.entry_radius_mm = entry.radius;
  out.entry_hatch = entry.hatch;
  out.end_radius_mm = end.radius;
  out.end_hatch = end.hatch;
  return out;
}

void validate_cloud(const PointCloud& cloud) {
  for (const Vec3& p : cloud.points) {
    if (!p.allFinite()) throw InputError("point cloud contains non-finite coordinates");
  }
}

SurfaceMarker surface_marker(const PointCloud& cloud, const Line3& axis_w,
                             std::size_t k) {
  if (cloud.points.empty()) throw InputError("surface marker: empty point cloud");
  validate_cloud(cloud);

  // Nearest point to the axis; ties resolved by coordinate so the result does
  // not depend on cloud ordering.
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const double d = orthogonal_distance(axis_w, cloud.points[i]);
    const bool closer =
        d < best_dist ||
        (d == best_dist &&
         std::lexicographical_compare(cloud.points[i].data(), cloud.points[i].data() + 3,
                                      cloud.points[best].data(),
                                      cloud.points[best].data() + 3));
    if (closer) {
      best = i;
      best_dist = d;
    }
  }
  const Vec3 position = cloud.points[best];

  const std::size_t n_neighbors = std::min(k, cloud.points.size());
  if (n_neighbors < 3) {
    throw InsufficientDataError("surface marker: fewer than 3 neighbors for the "
                                "plane fit");
  }
  std::vector<std::size_t> order(cloud.points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double da = (cloud.points[a] - position).squaredNorm();
    const double db = (cloud.points[b] - position).squaredNorm();
    if (da != db) return da < db;
    return std::lexicographical_compare(cloud.points[a].data(), cloud.points[a].data() + 3,
                                        cloud.points[b].data(),
                                        cloud.points[b].data() + 3);
  });

  Vec3 centroid = Vec3::Zero();
  for (std::size_t i = 0; i < n_neighbors; ++i) centroid += cloud.points[order[i]];
  centroid /= static_cast<double>(n_neighbors);

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n_neighbors; ++i) {
    const Vec3 rel = cloud.points[order[i]] - centroid;
    cov += rel * rel.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  Vec3 normal = eig.eigenvectors().col(0);  // least-variance direction
  normal.normalize();

  // Face the tool side. axis_w points from the exit toward the entry, out of
  // the body, which is the side the tool approaches from.
  const double facing = normal.dot(axis_w.direction);
  if (facing < 0.0) {
    normal = -normal;
  } else if (facing == 0.0) {
    // Deterministic sign for the pathological in-plane case.
    for (int i = 0; i < 3; ++i) {
      if (normal(i) != 0.0) {
        if (normal(i) < 0.0) normal = -normal;
        break;
      }
    }
  }

  return {position, normal};
}

}  // namespace kwnav
