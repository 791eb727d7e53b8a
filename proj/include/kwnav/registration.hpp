#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kwnav/geometry.hpp"

namespace kwnav {

/// Named marker positions in a rigid body's own frame. Layouts must be
/// non-collinear and have pairwise distances distinct enough to identify
/// markers by their distance signature.
struct MarkerLayout {
  std::string name;
  std::vector<std::string> labels;
  std::vector<Vec3> points;
  FrameId frame = FrameId::Cannula;
};

struct LayoutOptions {
  double collinearity_tol_mm = 1e-6;   // rms line-fit residual at/below this is degenerate
  double min_distance_separation_mm = 3.0;  // pairwise distances must differ by more
};

/// Validates the layout invariants; throws DegenerateInputError on failure.
void validate_layout(const MarkerLayout& layout, const LayoutOptions& options = {});

struct RegistrationResult {
  FramedTransform xf;     // maps body/model-frame points into the observing frame
  double fre_rms_mm = 0.0;  // fiducial registration error, sqrt(mean ||residual||^2)
};

/// Closed-form absolute orientation (SVD of the cross-covariance with a
/// reflection guard). The result xf satisfies
///     transform_point(xf, model[i]) ~= observed[i]
/// so xf has from = observed_frame, to = model_frame under the project's
/// chain convention.
///
/// Throws InputError on length mismatch, InsufficientDataError for fewer
/// than 3 pairs, DegenerateInputError for a collinear model set.
RegistrationResult paired_point_register(std::span<const Vec3> model,
                                         std::span<const Vec3> observed,
                                         FrameId model_frame,
                                         FrameId observed_frame,
                                         double collinearity_tol_mm = 1e-6);

struct CorrespondenceOptions {
  double distance_tol_mm = 1.5;    // pairwise-distance match tolerance
  std::size_t max_spurious = 2;    // detections allowed to stay unmatched
  std::size_t min_matches = 3;
  double fre_limit_mm = 4.5;       // reject assignments registering worse than this
};

/// Estimates the body pose from unordered, possibly incomplete detections.
/// Correspondences come from matching each point's multiset of pairwise
/// distances; greedy best-score assignment, no RANSAC (marker counts are
/// 3..7). Throws AmbiguityError when two assignments tie and
/// TrackingFailure when too few markers match.
RegistrationResult pose_from_markers(const MarkerLayout& layout,
                                     std::span<const Vec3> detections,
                                     FrameId detected_frame,
                                     const CorrespondenceOptions& options = {});

/// CT-to-patient registration chain: composes (F^T_P)^-1 * F^T_M * F^M_I
/// into F^P_I. Frame tags are checked.
FramedTransform ct_register(const FramedTransform& f_tp, const FramedTransform& f_tm,
                            const FramedTransform& f_mi);

}  // namespace kwnav
