#include "kwnav/geometry.hpp"

#include <cmath>
#include <string>

namespace kwnav {

namespace {
constexpr double kPi = 3.14159265358979323846;

[[noreturn]] void throw_frame_mismatch(FrameId inner_a, FrameId inner_b) {
  throw FrameMismatchError("frame mismatch: cannot chain through '" +
                           std::string(frame_name(inner_a)) + "' vs '" +
                           std::string(frame_name(inner_b)) + "'");
}
}  // namespace

std::string_view frame_name(FrameId id) {
  switch (id) {
    case FrameId::World: return "W";
    case FrameId::Hmd: return "H";
    case FrameId::Cannula: return "C";
    case FrameId::Patient: return "P";
    case FrameId::Image: return "I";
    case FrameId::Tracker: return "T";
    case FrameId::Machine: return "M";
    case FrameId::Tip: return "tip";
  }
  return "?";
}

std::optional<FrameId> frame_from_name(std::string_view name) {
  if (name == "W") return FrameId::World;
  if (name == "H") return FrameId::Hmd;
  if (name == "C") return FrameId::Cannula;
  if (name == "P") return FrameId::Patient;
  if (name == "I") return FrameId::Image;
  if (name == "T") return FrameId::Tracker;
  if (name == "M") return FrameId::Machine;
  if (name == "tip") return FrameId::Tip;
  return std::nullopt;
}

RigidTransform make_rigid_transform(const Quat& rotation, const Vec3& translation,
                                    double tol) {
  const double norm = rotation.norm();
  if (std::abs(norm - 1.0) > tol) {
    throw InputError("quaternion norm " + std::to_string(norm) +
                     " deviates from 1 by more than tolerance");
  }
  RigidTransform out;
  // Keep already-unit quaternions bit-exact so file formats round-trip.
  out.rotation = std::abs(norm - 1.0) > 1e-12 ? rotation.normalized() : rotation;
  out.translation = translation;
  return out;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

RigidTransform invert(const RigidTransform& a) {
  RigidTransform out;
  out.rotation = a.rotation.conjugate();
  out.translation = -(out.rotation * a.translation);
  return out;
}

Vec3 transform_point(const RigidTransform& a, const Vec3& p) {
  return a.rotation * p + a.translation;
}

Vec3 transform_direction(const RigidTransform& a, const Vec3& d) {
  return a.rotation * d;
}

Eigen::Matrix4d to_matrix(const RigidTransform& a) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = a.rotation.toRotationMatrix();
  m.topRightCorner<3, 1>() = a.translation;
  return m;
}

RigidTransform from_matrix(const Eigen::Matrix4d& m, double tol) {
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  if ((r * r.transpose() - Eigen::Matrix3d::Identity()).norm() > tol ||
      r.determinant() < 0.0) {
    throw InputError("matrix rotation block is not a proper rotation");
  }
  RigidTransform out;
  out.rotation = Quat(r).normalized();
  out.translation = m.topRightCorner<3, 1>();
  return out;
}

FramedTransform compose(const FramedTransform& a, const FramedTransform& b) {
  if (a.to != b.from) throw_frame_mismatch(a.to, b.from);
  return {a.from, b.to, compose(a.xf, b.xf)};
}

FramedTransform invert(const FramedTransform& a) {
  return {a.to, a.from, invert(a.xf)};
}

Vec3 transform_point(const FramedTransform& a, const Vec3& p) {
  return transform_point(a.xf, p);
}

Vec3 transform_direction(const FramedTransform& a, const Vec3& d) {
  return transform_direction(a.xf, d);
}

Line3 make_line(const Vec3& point, const Vec3& direction) {
  const double norm = direction.norm();
  if (norm < 1e-12) throw InputError("line direction is a zero vector");
  return {point, direction / norm};
}

Line3 transform_line(const FramedTransform& a, const Line3& line) {
  return {transform_point(a, line.point), transform_direction(a, line.direction)};
}

double orthogonal_distance(const Line3& line, const Vec3& p) {
  const Vec3 rel = p - line.point;
  return (rel - rel.dot(line.direction) * line.direction).norm();
}

double angle_between_deg(const Vec3& u, const Vec3& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu < 1e-12 || nv < 1e-12) {
    throw InputError("angle between zero-length vector is undefined");
  }
  // atan2 form is well conditioned near 0 and 180 degrees.
  const Vec3 un = u / nu;
  const Vec3 vn = v / nv;
  const double angle = std::atan2(un.cross(vn).norm(), un.dot(vn));
  return angle * 180.0 / kPi;
}

double axis_deviation_deg(const Vec3& u, const Vec3& v) {
  const double angle = angle_between_deg(u, v);
  return std::min(angle, 180.0 - angle);
}

}  // namespace kwnav
