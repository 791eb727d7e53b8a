#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <optional>
#include <string_view>

#include "kwnav/errors.hpp"

namespace kwnav {

/// Coordinate frames of the navigation chain. World and Tracker are distinct
/// frames: World is the headset's map frame, Tracker the external optical
/// tracker used only during CT registration.
enum class FrameId {
  World,    // W
  Hmd,      // H
  Cannula,  // C
  Patient,  // P
  Image,    // I
  Tracker,  // T
  Machine,  // M
  Tip,      // tip (pointer / tool-tip marker body)
};

std::string_view frame_name(FrameId id);
std::optional<FrameId> frame_from_name(std::string_view name);

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// Rigid motion: unit quaternion plus millimetre translation. The quaternion
/// is kept normalized; the equivalent matrix is derived on demand so repeated
/// composition cannot drift away from SO(3).
struct RigidTransform {
  Quat rotation{1.0, 0.0, 0.0, 0.0};
  Vec3 translation{0.0, 0.0, 0.0};

  static RigidTransform identity() { return {}; }
};

/// Builds a RigidTransform, renormalizing `rotation`. Throws InputError if
/// the quaternion norm is off by more than `tol` before normalization.
RigidTransform make_rigid_transform(const Quat& rotation, const Vec3& translation,
                                    double tol = 1e-9);

RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& a);
Vec3 transform_point(const RigidTransform& a, const Vec3& p);
Vec3 transform_direction(const RigidTransform& a, const Vec3& d);
Eigen::Matrix4d to_matrix(const RigidTransform& a);
RigidTransform from_matrix(const Eigen::Matrix4d& m, double tol = 1e-6);

// Frame convention, fixed project-wide:
//
//   FramedTransform{from = A, to = B} holds the chain symbol F^A_B. As a map
//   it takes points EXPRESSED IN B (the `to` frame) and returns the same
//   physical points expressed in A (the `from` frame). Writing a chain as a
//   left-to-right product therefore ends at the frame of the operand point:
//
//       F^W_H * F^H_P * F^P_I * p_I   ->  point expressed in W.
//
//   compose(a, b) requires a.to == b.from and equals applying b first, then
//   a. Equivalently, the transform is the pose of frame B as seen from A.
struct FramedTransform {
  FrameId from = FrameId::World;
  FrameId to = FrameId::World;
  RigidTransform xf;

  static FramedTransform identity(FrameId frame) { return {frame, frame, {}}; }
};

/// Throws FrameMismatchError (naming both frames) unless a.to == b.from.
FramedTransform compose(const FramedTransform& a, const FramedTransform& b);
FramedTransform invert(const FramedTransform& a);

/// `p` is expressed in a.to; the result is expressed in a.from.
Vec3 transform_point(const FramedTransform& a, const Vec3& p);
/// Rotation-only application; preserves norm.
Vec3 transform_direction(const FramedTransform& a, const Vec3& d);

inline FramedTransform operator*(const FramedTransform& a, const FramedTransform& b) {
  return compose(a, b);
}

/// 3D line: anchor point (mm) plus unit direction.
struct Line3 {
  Vec3 point{0.0, 0.0, 0.0};
  Vec3 direction{0.0, 0.0, 1.0};
};

/// Normalizes `direction`; throws InputError on a near-zero vector.
Line3 make_line(const Vec3& point, const Vec3& direction);

Line3 transform_line(const FramedTransform& a, const Line3& line);

double orthogonal_distance(const Line3& line, const Vec3& p);

/// Angle between two directions in degrees, in [0, 180].
/// Throws InputError on zero-length input; non-unit input is normalized.
double angle_between_deg(const Vec3& u, const Vec3& v);

/// Sign-insensitive angle for undirected axes: min(theta, 180 - theta),
/// in [0, 90]. Wire axes have no intrinsic forward sign.
double axis_deviation_deg(const Vec3& u, const Vec3& v);

}  // namespace kwnav
