#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "vtr/errors.hpp"
#include "vtr/geometry.hpp"

namespace vtr {

// A stereo measurement: left pixel (uL, vL) plus the right image's horizontal
// coordinate uR (rectified pair, so vR == vL).
using StereoPixel = Eigen::Vector3d;

struct StereoCamera {
  double fx = 380.0;
  double fy = 380.0;
  double cx = 320.0;
  double cy = 240.0;
  double baseline = 0.1;  // metres, left -> right along +x
  int width = 640;
  int height = 480;
  double min_depth = 0.05;  // metres; points closer than this are not seen

  // Projects a point in the camera frame (z forward, x right, y down).
  // Empty when the point is behind the minimum depth or falls outside
  // either image.
  std::optional<StereoPixel> project(const Vec3& p) const {
    if (p.z() < min_depth) return std::nullopt;
    double uL = fx * p.x() / p.z() + cx;
    double vL = fy * p.y() / p.z() + cy;
    double uR = uL - fx * baseline / p.z();
    if (uL < 0.0 || uL > width - 1 || vL < 0.0 || vL > height - 1) return std::nullopt;
    if (uR < 0.0 || uR > width - 1) return std::nullopt;
    return StereoPixel(uL, vL, uR);
  }

  // Back-projects a stereo pixel to a camera-frame point.  Disparity must be
  // positive; a rectified stereo pair cannot produce anything else for a
  // physical point.
  Vec3 triangulate(const StereoPixel& px) const {
    double disparity = px.x() - px.z();
    if (disparity <= 0.0)
      throw NonPositiveDisparityError("disparity " + std::to_string(disparity));
    double z = fx * baseline / disparity;
    double x = (px.x() - cx) * z / fx;
    double y = (px.y() - cy) * z / fy;
    return Vec3(x, y, z);
  }
};

// One camera of the rig: intrinsics plus mounting extrinsics and its
// (unsynchronized) capture schedule.
struct RigCamera {
  std::string tag;       // one of front / rear / left / right
  StereoCamera model;
  Pose T_BC;             // base <- camera
  double period = 0.2;   // seconds between captures
  double offset = 0.0;   // capture phase within the period
};

inline bool valid_camera_tag(const std::string& tag) {
  return tag == "front" || tag == "rear" || tag == "left" || tag == "right";
}

// Camera frame: z optical axis, x right, y down.  Mounted looking along the
// base +x axis when yaw == 0; `pitch_down` tilts the optical axis toward the
// ground.
inline Pose camera_mount(const std::string& tag, const Vec3& position, double yaw,
                         double pitch_down) {
  Mat3 R_axes;
  // base axes -> camera axes: camera z = base x, camera x = base -y, camera y = base -z
  R_axes << 0.0, -1.0, 0.0,
            0.0, 0.0, -1.0,
            1.0, 0.0, 0.0;
  Mat3 R_yaw = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  Mat3 R_pitch = Eigen::AngleAxisd(pitch_down, Vec3::UnitY()).toRotationMatrix();
  Pose T;
  T.parent = "B";
  T.child = "C_" + tag;
  T.q = Eigen::Quaterniond(R_yaw * R_pitch * R_axes.transpose());
  T.q.normalize();
  T.t = position;
  return T;
}

}  // namespace vtr
