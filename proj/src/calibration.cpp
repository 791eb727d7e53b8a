#include "kwnav/calibration.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <string>

namespace kwnav {

// The pivot constraint R_i * p_tip + t_i = pivot_point, stacked over all
// observations, is the linear system
//
//   [ R_i | -I ] [ p_tip       ] = [ -t_i ]
//                [ pivot_point ]
//
// with a 3n x 6 coefficient matrix. One SVD gives the solution, the
// dispersion guard, and the condition number.
PivotResult pivot_calibrate(const PivotDataset& data, const PivotOptions& options) {
  const std::size_t n = data.observations.size();
  if (n < options.min_observations) {
    throw InsufficientDataError("pivot calibration needs at least " +
                                std::to_string(options.min_observations) +
                                " poses, got " + std::to_string(n));
  }

  Eigen::MatrixXd a(3 * n, 6);
  Eigen::VectorXd b(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Matrix3d r = data.observations[i].rotation.toRotationMatrix();
    a.block<3, 3>(3 * i, 0) = r;
    a.block<3, 3>(3 * i, 3) = -Eigen::Matrix3d::Identity();
    b.segment<3>(3 * i) = -data.observations[i].translation;
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double sigma_max = svd.singularValues()(0);
  const double sigma_min = svd.singularValues()(5);
  const double dispersion = sigma_min / std::sqrt(static_cast<double>(n));
  const double condition = sigma_min > 0.0 ? sigma_max / sigma_min
                                           : std::numeric_limits<double>::infinity();
  if (dispersion <= options.min_dispersion) {
    throw DegenerateInputError(
        "pivot calibration is ill-conditioned: rotation dispersion " +
        std::to_string(dispersion) + " below threshold (condition number " +
        std::to_string(condition) + ")");
  }

  const Eigen::VectorXd x = svd.solve(b);

  PivotResult result;
  result.tip_offset = x.head<3>();
  result.pivot_point = x.tail<3>();
  result.condition_number = condition;

  double sum_sq = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 r = transform_point(data.observations[i], result.tip_offset) -
                   result.pivot_point;
    sum_sq += r.squaredNorm();
    sum += r.norm();
  }
  result.rms_mm = std::sqrt(sum_sq / static_cast<double>(n));
  result.mean_mm = sum / static_cast<double>(n);
  return result;
}

ShaftAxisFit shaft_axis_fit(std::span<const Vec3> tip_offsets) {
  const std::size_t n = tip_offsets.size();
  if (n < 3) {
    throw InsufficientDataError("shaft axis fit needs at least 3 tip positions, got " +
                                std::to_string(n));
  }

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : tip_offsets) centroid += p;
  centroid /= static_cast<double>(n);

  Eigen::MatrixXd centered(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    centered.row(i) = (tip_offsets[i] - centroid).transpose();
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::Vector3d sigma = svd.singularValues();
  if (sigma(0) / std::sqrt(static_cast<double>(n)) < 1e-9) {
    throw InsufficientDataError("shaft axis fit: points are coincident");
  }

  ShaftAxisFit fit;
  fit.axis = make_line(centroid, svd.matrixV().col(0));
  fit.residual_rms_mm = std::sqrt((sigma(1) * sigma(1) + sigma(2) * sigma(2)) /
                                  static_cast<double>(n));
  return fit;
}

}  // namespace kwnav
