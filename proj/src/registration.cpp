#include "kwnav/registration.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

namespace kwnav {

namespace {

// rms orthogonal residual of the best-fit line through `points`.
double line_fit_residual_rms(std::span<const Vec3> points) {
  const std::size_t n = points.size();
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(n);
  Eigen::MatrixXd centered(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    centered.row(i) = (points[i] - centroid).transpose();
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered);
  const Eigen::Vector3d sigma = svd.singularValues();
  return std::sqrt((sigma(1) * sigma(1) + sigma(2) * sigma(2)) / static_cast<double>(n));
}

// Sorted distances from point `i` to every other point in `points`.
std::vector<double> distance_signature(std::span<const Vec3> points, std::size_t i) {
  std::vector<double> sig;
  sig.reserve(points.size() - 1);
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (j != i) sig.push_back((points[j] - points[i]).norm());
  }
  std::sort(sig.begin(), sig.end());
  return sig;
}

// Greedy count of entries of two sorted lists that pair within tolerance.
std::size_t matched_distance_count(const std::vector<double>& a,
                                   const std::vector<double>& b, double tol) {
  std::size_t i = 0, j = 0, count = 0;
  while (i < a.size() && j < b.size()) {
    const double diff = a[i] - b[j];
    if (std::abs(diff) <= tol) {
      ++count;
      ++i;
      ++j;
    } else if (diff < 0.0) {
      ++i;
    } else {
      ++j;
    }
  }
  return count;
}

}  // namespace

void validate_layout(const MarkerLayout& layout, const LayoutOptions& options) {
  if (layout.points.size() < 3) {
    throw InsufficientDataError("marker layout '" + layout.name +
                                "' needs at least 3 points");
  }
  if (layout.labels.size() != layout.points.size()) {
    throw InputError("marker layout '" + layout.name + "' label/point count mismatch");
  }
  if (line_fit_residual_rms(layout.points) <= options.collinearity_tol_mm) {
    throw DegenerateInputError("marker layout '" + layout.name + "' is collinear");
  }
  std::vector<double> distances;
  for (std::size_t i = 0; i < layout.points.size(); ++i) {
    for (std::size_t j = i + 1; j < layout.points.size(); ++j) {
      distances.push_back((layout.points[i] - layout.points[j]).norm());
    }
  }
  std::sort(distances.begin(), distances.end());
  for (std::size_t i = 1; i < distances.size(); ++i) {
    if (distances[i] - distances[i - 1] < options.min_distance_separation_mm) {
      throw DegenerateInputError(
          "marker layout '" + layout.name +
          "' has near-duplicate pairwise distances; distance-signature "
          "correspondence would be ambiguous");
    }
  }
}

RegistrationResult paired_point_register(std::span<const Vec3> model,
                                         std::span<const Vec3> observed,
                                         FrameId model_frame, FrameId observed_frame,
                                         double collinearity_tol_mm) {
  if (model.size() != observed.size()) {
    throw InputError("paired-point registration: " + std::to_string(model.size()) +
                     " model vs " + std::to_string(observed.size()) +
                     " observed points");
  }
  const std::size_t n = model.size();
  if (n < 3) {
    throw InsufficientDataError("paired-point registration needs at least 3 pairs");
  }
  if (line_fit_residual_rms(model) <= collinearity_tol_mm) {
    throw DegenerateInputError(
        "paired-point registration: model points are collinear");
  }

  Vec3 model_centroid = Vec3::Zero();
  Vec3 observed_centroid = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    model_centroid += model[i];
    observed_centroid += observed[i];
  }
  model_centroid /= static_cast<double>(n);
  observed_centroid /= static_cast<double>(n);

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    h += (model[i] - model_centroid) * (observed[i] - observed_centroid).transpose();
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  // Reflection guard: force det(R) = +1.
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();

  RegistrationResult result;
  result.xf.from = observed_frame;
  result.xf.to = model_frame;
  result.xf.xf.rotation = Quat(r).normalized();
  result.xf.xf.translation = observed_centroid - r * model_centroid;

  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum_sq += (transform_point(result.xf, model[i]) - observed[i]).squaredNorm();
  }
  result.fre_rms_mm = std::sqrt(sum_sq / static_cast<double>(n));
  return result;
}

RegistrationResult pose_from_markers(const MarkerLayout& layout,
                                     std::span<const Vec3> detections,
                                     FrameId detected_frame,
                                     const CorrespondenceOptions& options) {
  validate_layout(layout);
  const std::size_t n_layout = layout.points.size();
  const std::size_t n_det = detections.size();
  if (n_det < options.min_matches) {
    throw TrackingFailure("marker tracking lost: " + std::to_string(n_det) +
                          " detections, need " + std::to_string(options.min_matches));
  }

  std::vector<std::vector<double>> layout_sigs(n_layout);
  for (std::size_t i = 0; i < n_layout; ++i) {
    layout_sigs[i] = distance_signature(layout.points, i);
  }
  std::vector<std::vector<double>> det_sigs(n_det);
  for (std::size_t k = 0; k < n_det; ++k) {
    det_sigs[k] = distance_signature(detections, k);
  }

  std::vector<std::vector<std::size_t>> score(n_layout, std::vector<std::size_t>(n_det));
  for (std::size_t i = 0; i < n_layout; ++i) {
    for (std::size_t k = 0; k < n_det; ++k) {
      score[i][k] =
          matched_distance_count(layout_sigs[i], det_sigs[k], options.distance_tol_mm);
    }
  }

  // Greedy assignment by descending score. At each round every pair carrying
  // the current maximum is taken; if two of those pairs share a layout point
  // or a detection, the correspondence is genuinely ambiguous. Scores depend
  // on geometry only, so the outcome is independent of detection order.
  std::vector<bool> layout_used(n_layout, false);
  std::vector<bool> det_used(n_det, false);
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  for (;;) {
    std::size_t best = 1;  // a single matched distance is not evidence
    for (std::size_t i = 0; i < n_layout; ++i) {
      if (layout_used[i]) continue;
      for (std::size_t k = 0; k < n_det; ++k) {
        if (!det_used[k]) best = std::max(best, score[i][k]);
      }
    }
    if (best < 2) break;

    std::vector<std::pair<std::size_t, std::size_t>> round;
    for (std::size_t i = 0; i < n_layout; ++i) {
      if (layout_used[i]) continue;
      for (std::size_t k = 0; k < n_det; ++k) {
        if (!det_used[k] && score[i][k] == best) round.emplace_back(i, k);
      }
    }
    for (std::size_t a = 0; a < round.size(); ++a) {
      for (std::size_t b = a + 1; b < round.size(); ++b) {
        if (round[a].first == round[b].first || round[a].second == round[b].second) {
          throw AmbiguityError(
              "marker correspondence is ambiguous: two assignments match the "
              "distance signature of '" + layout.name + "' equally well");
        }
      }
    }
    for (const auto& [i, k] : round) {
      layout_used[i] = true;
      det_used[k] = true;
      matches.emplace_back(i, k);
    }
  }

  if (matches.size() < options.min_matches) {
    throw TrackingFailure("marker tracking lost: only " +
                          std::to_string(matches.size()) + " of " +
                          std::to_string(n_layout) + " markers identified");
  }
  const std::size_t unmatched_detections = n_det - matches.size();
  if (unmatched_detections > options.max_spurious) {
    throw TrackingFailure("marker tracking rejected: " +
                          std::to_string(unmatched_detections) +
                          " detections have no corresponding layout marker");
  }

  std::sort(matches.begin(), matches.end());
  std::vector<Vec3> model_pts, observed_pts;
  model_pts.reserve(matches.size());
  observed_pts.reserve(matches.size());
  for (const auto& [i, k] : matches) {
    model_pts.push_back(layout.points[i]);
    observed_pts.push_back(detections[k]);
  }

  RegistrationResult result =
      paired_point_register(model_pts, observed_pts, layout.frame, detected_frame);
  if (result.fre_rms_mm > options.fre_limit_mm) {
    throw TrackingFailure("marker tracking rejected: registration residual " +
                          std::to_string(result.fre_rms_mm) + " mm exceeds limit");
  }
  return result;
}

FramedTransform ct_register(const FramedTransform& f_tp, const FramedTransform& f_tm,
                            const FramedTransform& f_mi) {
  auto expect = [](const FramedTransform& f, FrameId from, FrameId to) {
    if (f.from != from || f.to != to) {
      throw FrameMismatchError("ct_register: expected " +
                               std::string(frame_name(from)) + "->" +
                               std::string(frame_name(to)) + ", got " +
                               std::string(frame_name(f.from)) + "->" +
                               std::string(frame_name(f.to)));
    }
  };
  expect(f_tp, FrameId::Tracker, FrameId::Patient);
  expect(f_tm, FrameId::Tracker, FrameId::Machine);
  expect(f_mi, FrameId::Machine, FrameId::Image);
  return invert(f_tp) * f_tm * f_mi;
}

}  // namespace kwnav
