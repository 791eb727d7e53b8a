#pragma once

#include <Eigen/Core>
#include <vector>

#include "kwnav/geometry.hpp"

namespace kwnav {

struct PoseSample {
  double t_s = 0.0;
  FramedTransform pose;
  bool valid = true;
};

using PoseStream = std::vector<PoseSample>;

/// Throws OrderingError unless timestamps strictly increase.
void validate_stream(const PoseStream& stream);

/// Filter tuning. Process densities describe random-walk growth per second;
/// measurement variances are per-axis.
struct KalmanParams {
  double process_trans_psd = 1.0;    // mm^2 / s
  double process_rot_psd = 0.01;     // rad^2 / s
  double meas_trans_var = 0.25;      // mm^2
  double meas_rot_var = 1e-4;        // rad^2
  double velocity_smoothing_tau_s = 0.2;
};

/// Error-state pose filter: the mean pose is a quaternion + translation, the
/// 6x6 covariance lives in the [position, small-angle rotation] error space,
/// and orientation updates are multiplicative so the quaternion stays unit.
/// Translational velocity is a smoothed finite difference of the posterior
/// positions, used only to feed the constant-velocity prediction.
struct FilterState {
  FrameId from = FrameId::Hmd;
  FrameId to = FrameId::Cannula;
  RigidTransform pose;
  Vec3 velocity{0.0, 0.0, 0.0};  // mm/s
  Eigen::Matrix<double, 6, 6> covariance = Eigen::Matrix<double, 6, 6>::Zero();
  double last_time_s = 0.0;
};

/// Initializes from the first valid sample: covariance set to the
/// measurement variances, velocity zero.
FilterState filter_init(const PoseSample& first, const KalmanParams& params);

/// Predict-update step. Requires sample.valid, matching frames, and
/// sample.t_s strictly after the state's last update (else OrderingError).
FilterState kalman_update(const FilterState& state, const PoseSample& sample,
                          const KalmanParams& params);

/// Linear translation / shortest-arc spherical rotation interpolation.
/// Endpoints are reproduced exactly; t outside [a.t_s, b.t_s] throws
/// InputError (no extrapolation), mismatched frames FrameMismatchError.
RigidTransform interpolate_pose(const PoseSample& a, const PoseSample& b, double t_s);

enum class NavGate { Active, Suspended };

struct NavState {
  NavGate state = NavGate::Suspended;
  double since_s = 0.0;
};

/// Navigation is Active iff both bodies produced a valid pose within the
/// grace period. For Suspended, `since_s` is the earliest grace expiry among
/// the stale bodies; for Active it is the start of the certified-valid
/// window, min(tool_last_valid, patient_last_valid).
NavState gate_navigation(double tool_last_valid_s, double patient_last_valid_s,
                         double now_s, double grace_s);

}  // namespace kwnav
