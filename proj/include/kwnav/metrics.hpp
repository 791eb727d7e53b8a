#pragma once

#include <span>
#include <string>

#include "kwnav/geometry.hpp"

namespace kwnav {

/// One trial's wire placement error against the planned corridor: in-plane
/// distances at planes orthogonal to the planned axis through the entry,
/// midpoint, and end, plus the axis-deviation angle. A pure lateral offset
/// therefore reads equally at all three depths.
struct PlacementError {
  double entry_mm = 0.0;
  double mid_mm = 0.0;
  double end_mm = 0.0;
  double rotation_deg = 0.0;  // axis-deviation mode, <= 90
};

/// Throws NoIntersectionError when the actual line is within 1 degree of the
/// measurement planes (same guard as the error indicator).
PlacementError placement_error(const Vec3& plan_entry_w, const Vec3& plan_exit_w,
                               const Line3& actual_w);

/// Euclidean distance between a chain-predicted and a measured landmark.
double end_to_end_error(const Vec3& predicted_mm, const Vec3& measured_mm);

struct FieldStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n-1)
};

FieldStats mean_std(std::span<const double> samples);

/// "5.26 ± 2.29" rendering used by the study tables.
std::string format_mean_std(const FieldStats& stats, int precision = 2);

struct StudySummary {
  FieldStats entry_mm;
  FieldStats mid_mm;
  FieldStats end_mm;
  FieldStats rotation_deg;
  int n = 0;
};

/// Per-field mean and sample standard deviation. Throws
/// InsufficientDataError for fewer than 2 samples.
StudySummary summarize(std::span<const PlacementError> samples);

/// Welch's two-sample t-test, two-sided p-value. Each group needs >= 2
/// samples; zero variance in both groups throws DegenerateInputError.
double significance(std::span<const double> group_a, std::span<const double> group_b);

}  // namespace kwnav
