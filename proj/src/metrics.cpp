#include "kwnav/metrics.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <vector>

namespace kwnav {

namespace {

constexpr double kPlaneGuardDeg = 89.0;

// In-plane distance between the line's crossing of the plane through `anchor`
// (orthogonal to unit `axis_dir`) and the anchor itself.
double in_plane_distance(const Line3& line, const Vec3& anchor, const Vec3& axis_dir) {
  const double denom = line.direction.dot(axis_dir);
  const double t = (anchor - line.point).dot(axis_dir) / denom;
  return (line.point + t * line.direction - anchor).norm();
}

}  // namespace

PlacementError placement_error(const Vec3& plan_entry_w, const Vec3& plan_exit_w,
                               const Line3& actual_w) {
  const Vec3 axis_dir = (plan_entry_w - plan_exit_w).normalized();
  if (axis_deviation_deg(actual_w.direction, axis_dir) > kPlaneGuardDeg) {
    throw NoIntersectionError(
        "placement error: actual wire is near-orthogonal to the planned axis");
  }
  PlacementError out;
  out.entry_mm = in_plane_distance(actual_w, plan_entry_w, axis_dir);
  out.mid_mm = in_plane_distance(actual_w, 0.5 * (plan_entry_w + plan_exit_w), axis_dir);
  out.end_mm = in_plane_distance(actual_w, plan_exit_w, axis_dir);
  out.rotation_deg = axis_deviation_deg(actual_w.direction, axis_dir);
  return out;
}

double end_to_end_error(const Vec3& predicted_mm, const Vec3& measured_mm) {
  return (predicted_mm - measured_mm).norm();
}

FieldStats mean_std(std::span<const double> samples) {
  if (samples.size() < 2) {
    throw InsufficientDataError("mean/std needs at least 2 samples");
  }
  const double n = static_cast<double>(samples.size());
  double sum = 0.0;
  for (double s : samples) sum += s;
  const double mean = sum / n;
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

std::string format_mean_std(const FieldStats& stats, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f ± %.*f", precision, stats.mean, precision,
                stats.std);
  return buf;
}

StudySummary summarize(std::span<const PlacementError> samples) {
  if (samples.size() < 2) {
    throw InsufficientDataError("study summary needs at least 2 trials");
  }
  std::vector<double> entry, mid, end, rot;
  entry.reserve(samples.size());
  mid.reserve(samples.size());
  end.reserve(samples.size());
  rot.reserve(samples.size());
  for (const PlacementError& s : samples) {
    entry.push_back(s.entry_mm);
    mid.push_back(s.mid_mm);
    end.push_back(s.end_mm);
    rot.push_back(s.rotation_deg);
  }
  StudySummary out;
  out.entry_mm = mean_std(entry);
  out.mid_mm = mean_std(mid);
  out.end_mm = mean_std(end);
  out.rotation_deg = mean_std(rot);
  out.n = static_cast<int>(samples.size());
  return out;
}

double significance(std::span<const double> group_a, std::span<const double> group_b) {
  if (group_a.size() < 2 || group_b.size() < 2) {
    throw InsufficientDataError("significance test needs >= 2 samples per group");
  }
  const FieldStats a = mean_std(group_a);
  const FieldStats b = mean_std(group_b);
  const double na = static_cast<double>(group_a.size());
  const double nb = static_cast<double>(group_b.size());
  const double va = a.std * a.std / na;
  const double vb = b.std * b.std / nb;
  if (va + vb == 0.0) {
    throw DegenerateInputError("significance test: both groups have zero variance");
  }
  const double t = (a.mean - b.mean) / std::sqrt(va + vb);
  // Welch-Satterthwaite degrees of freedom.
  const double dof = (va + vb) * (va + vb) /
                     (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  const boost::math::students_t dist(dof);
  return 2.0 * boost::math::cdf(dist, -std::abs(t));
}

}  // namespace kwnav
