#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <string>

#include "vtr/errors.hpp"

namespace vtr {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

inline Mat3 exp_so3(const Vec3& w) {
  double theta = w.norm();
  if (theta < 1e-12) return Mat3::Identity() + skew(w);
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

inline Vec3 log_so3(const Mat3& R) {
  Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

// Inverse of the left Jacobian of SO(3); used for the pose-prior residual
// so that the residual's sensitivity to a left perturbation is exact.
inline Mat3 left_jacobian_inv_so3(const Vec3& w) {
  double theta = w.norm();
  Mat3 W = skew(w);
  if (theta < 1e-9) return Mat3::Identity() - 0.5 * W + W * W / 12.0;
  double cot_term = 1.0 / (theta * theta) - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Mat3::Identity() - 0.5 * W + cot_term * (W * W);
}

// Rigid transform T_{parent<-child}: maps points expressed in `child`
// into `parent`.  Frames are runtime labels ("O", "M", "B", "C_front", ...)
// and composition refuses mismatched inner frames.
struct Pose {
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Vec3 t = Vec3::Zero();
  std::string parent = "O";
  std::string child = "B";

  static Pose identity(const std::string& parent, const std::string& child) {
    Pose p;
    p.parent = parent;
    p.child = child;
    return p;
  }

  Mat3 rotation() const { return q.toRotationMatrix(); }

  Vec3 operator*(const Vec3& p_child) const { return q * p_child + t; }

  Pose inverse() const {
    Pose r;
    r.q = q.conjugate();
    r.t = -(r.q * t);
    r.parent = child;
    r.child = parent;
    return r;
  }
};

inline Pose compose(const Pose& a, const Pose& b) {
  if (a.child != b.parent)
    throw FrameMismatchError("cannot compose " + a.parent + "<-" + a.child + " with " +
                             b.parent + "<-" + b.child);
  Pose r;
  r.q = a.q * b.q;
  r.q.normalize();
  r.t = a.q * b.t + a.t;
  r.parent = a.parent;
  r.child = b.child;
  return r;
}

inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

// Left-multiplicative update: T <- (exp(w), v) o T.  The twist lives in the
// parent frame; frame labels are unchanged.
inline Pose apply_increment(const Pose& T, const Vec6& delta) {
  Vec3 w = delta.head<3>();
  Vec3 v = delta.tail<3>();
  Pose r = T;
  Eigen::Quaterniond dq(exp_so3(w));
  r.q = dq * T.q;
  r.q.normalize();
  r.t = dq * T.t + v;
  return r;
}

// Log of a relative pose as [rotation; translation]; inverse of the
// left-increment convention up to first order.
inline Vec6 pose_delta(const Pose& a, const Pose& b) {
  Pose d = compose(a, b.inverse());
  Vec6 r;
  r.head<3>() = log_so3(d.rotation());
  r.tail<3>() = d.t;
  return r;
}

inline double rotation_angle_between(const Pose& a, const Pose& b) {
  Eigen::Quaterniond dq = a.q * b.q.conjugate();
  double w = std::min(1.0, std::abs(dq.normalized().w()));
  return 2.0 * std::acos(w);
}

inline double translation_distance(const Pose& a, const Pose& b) { return (a.t - b.t).norm(); }

// Interpolates a <- b at s in [0,1] (slerp on rotation, lerp on translation).
inline Pose interpolate(const Pose& a, const Pose& b, double s) {
  Pose r = a;
  r.q = a.q.slerp(s, b.q);
  r.q.normalize();
  r.t = (1.0 - s) * a.t + s * b.t;
  return r;
}

inline double yaw_of(const Pose& p) {
  Mat3 R = p.rotation();
  return std::atan2(R(1, 0), R(0, 0));
}

inline Pose planar_pose(const std::string& parent, const std::string& child, double x, double y,
                        double yaw, double z = 0.0) {
  Pose p;
  p.parent = parent;
  p.child = child;
  p.q = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
  p.t = Vec3(x, y, z);
  return p;
}

}  // namespace vtr
