#include "kwnav/tracking.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

namespace kwnav {

namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

// Rotation-vector (axis * angle) of the quaternion, shortest representation.
Vec3 log_rotation(const Quat& q) {
  Quat qn = q.normalized();
  if (qn.w() < 0.0) qn.coeffs() *= -1.0;
  const Eigen::AngleAxisd aa(qn);
  return aa.angle() * aa.axis();
}

Quat exp_rotation(const Vec3& rotvec) {
  const double angle = rotvec.norm();
  if (angle < 1e-14) return Quat::Identity();
  return Quat(Eigen::AngleAxisd(angle, rotvec / angle));
}

}  // namespace

void validate_stream(const PoseStream& stream) {
  for (std::size_t i = 1; i < stream.size(); ++i) {
    if (stream[i].t_s <= stream[i - 1].t_s) {
      throw OrderingError("pose stream timestamps must strictly increase (sample " +
                          std::to_string(i) + ")");
    }
  }
}

FilterState filter_init(const PoseSample& first, const KalmanParams& params) {
  if (!first.valid) throw InputError("cannot initialize filter from an invalid sample");
  FilterState state;
  state.from = first.pose.from;
  state.to = first.pose.to;
  state.pose = first.pose.xf;
  state.velocity = Vec3::Zero();
  state.covariance.topLeftCorner<3, 3>() =
      params.meas_trans_var * Eigen::Matrix3d::Identity();
  state.covariance.bottomRightCorner<3, 3>() =
      params.meas_rot_var * Eigen::Matrix3d::Identity();
  state.last_time_s = first.t_s;
  return state;
}

FilterState kalman_update(const FilterState& state, const PoseSample& sample,
                          const KalmanParams& params) {
  if (!sample.valid) throw InputError("kalman_update requires a valid sample");
  if (sample.pose.from != state.from || sample.pose.to != state.to) {
    throw FrameMismatchError("kalman_update: sample frames " +
                             std::string(frame_name(sample.pose.from)) + "->" +
                             std::string(frame_name(sample.pose.to)) +
                             " do not match filter stream");
  }
  const double dt = sample.t_s - state.last_time_s;
  if (dt <= 0.0) {
    throw OrderingError("kalman_update: sample time does not advance the filter");
  }

  // Predict: constant-velocity translation, constant orientation, random-walk
  // covariance growth.
  const Vec3 p_pred = state.pose.translation + state.velocity * dt;
  const Quat q_pred = state.pose.rotation;
  Mat6 cov_pred = state.covariance;
  cov_pred.topLeftCorner<3, 3>() +=
      params.process_trans_psd * dt * Eigen::Matrix3d::Identity();
  cov_pred.bottomRightCorner<3, 3>() +=
      params.process_rot_psd * dt * Eigen::Matrix3d::Identity();

  FilterState next = state;
  next.last_time_s = sample.t_s;

  if (params.meas_trans_var == 0.0 && params.meas_rot_var == 0.0) {
    // Exact measurement: the posterior is the measurement.
    next.pose = sample.pose.xf;
    next.pose.rotation.normalize();
    next.covariance.setZero();
  } else {
    // Innovation in the 6-dof error space; rotation error is multiplicative
    // (body-frame small angle).
    Vec6 innovation;
    innovation.head<3>() = sample.pose.xf.translation - p_pred;
    innovation.tail<3>() =
        log_rotation(q_pred.conjugate() * sample.pose.xf.rotation);

    Mat6 meas_cov = Mat6::Zero();
    meas_cov.topLeftCorner<3, 3>() =
        params.meas_trans_var * Eigen::Matrix3d::Identity();
    meas_cov.bottomRightCorner<3, 3>() =
        params.meas_rot_var * Eigen::Matrix3d::Identity();

    const Mat6 s = cov_pred + meas_cov;  // H = I
    const Mat6 gain = cov_pred * s.ldlt().solve(Mat6::Identity());
    const Vec6 delta = gain * innovation;

    next.pose.translation = p_pred + delta.head<3>();
    next.pose.rotation = (q_pred * exp_rotation(delta.tail<3>())).normalized();

    // Joseph form keeps the covariance symmetric positive semidefinite.
    const Mat6 ikh = Mat6::Identity() - gain;
    Mat6 cov_post = ikh * cov_pred * ikh.transpose() +
                    gain * meas_cov * gain.transpose();
    next.covariance = 0.5 * (cov_post + cov_post.transpose());
  }

  const Vec3 v_inst = (next.pose.translation - state.pose.translation) / dt;
  const double alpha = params.velocity_smoothing_tau_s > 0.0
                           ? std::exp(-dt / params.velocity_smoothing_tau_s)
                           : 0.0;
  next.velocity = alpha * state.velocity + (1.0 - alpha) * v_inst;
  return next;
}

RigidTransform interpolate_pose(const PoseSample& a, const PoseSample& b, double t_s) {
  if (a.pose.from != b.pose.from || a.pose.to != b.pose.to) {
    throw FrameMismatchError("interpolate_pose: samples are from different streams");
  }
  if (b.t_s <= a.t_s) {
    throw OrderingError("interpolate_pose: samples must be time-ordered");
  }
  if (t_s < a.t_s || t_s > b.t_s) {
    throw InputError("interpolate_pose: t outside the sample interval "
                     "(no extrapolation)");
  }
  const double u = (t_s - a.t_s) / (b.t_s - a.t_s);

  Quat qb = b.pose.xf.rotation;
  if (a.pose.xf.rotation.dot(qb) < 0.0) qb.coeffs() *= -1.0;  // shorter arc

  RigidTransform out;
  out.rotation = a.pose.xf.rotation.slerp(u, qb).normalized();
  out.translation =
      (1.0 - u) * a.pose.xf.translation + u * b.pose.xf.translation;
  return out;
}

NavState gate_navigation(double tool_last_valid_s, double patient_last_valid_s,
                         double now_s, double grace_s) {
  if (grace_s <= 0.0) throw InputError("gate_navigation: grace period must be > 0");
  const bool tool_ok = (now_s - tool_last_valid_s) <= grace_s;
  const bool patient_ok = (now_s - patient_last_valid_s) <= grace_s;
  NavState out;
  if (tool_ok && patient_ok) {
    out.state = NavGate::Active;
    out.since_s = std::min(tool_last_valid_s, patient_last_valid_s);
  } else {
    out.state = NavGate::Suspended;
    double expiry = std::numeric_limits<double>::infinity();
    if (!tool_ok) expiry = std::min(expiry, tool_last_valid_s + grace_s);
    if (!patient_ok) expiry = std::min(expiry, patient_last_valid_s + grace_s);
    out.since_s = expiry;
  }
  return out;
}

}  // namespace kwnav
