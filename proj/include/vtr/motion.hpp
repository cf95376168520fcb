#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "vtr/geometry.hpp"
#include "vtr/rng.hpp"

namespace vtr {

// Planar holonomic command in the base frame.
struct VelocityCommand {
  double vx = 0.0;
  double vy = 0.0;
  double yaw_rate = 0.0;
};

inline Pose integrate_command(const Pose& T_WB, const VelocityCommand& cmd, double dt) {
  Pose step = planar_pose(T_WB.child, T_WB.child, cmd.vx * dt, cmd.vy * dt, cmd.yaw_rate * dt);
  return compose(T_WB, step);
}

// Quadruped-style base wobble: a deterministic vertical sinusoid plus a small
// random offset.  It perturbs the sensed pose, never the commanded one, so it
// cannot be integrated away.
struct GaitJitter {
  double amplitude = 0.0;  // metres, vertical bob
  double frequency = 2.0;  // Hz
  double noise_std = 0.0;  // metres, iid xyz
};

inline Pose apply_gait_jitter(const Pose& T_WB, const GaitJitter& jitter, double t, uint64_t tick,
                              uint64_t stream_seed) {
  Pose out = T_WB;
  out.t.z() += jitter.amplitude * std::sin(2.0 * M_PI * jitter.frequency * t);
  if (jitter.noise_std > 0.0) {
    Rng rng(mix_seed(stream_seed, tick));
    out.t += jitter.noise_std * Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
  }
  return out;
}

// Wheel/leg odometry as a relative pose per control step: the true increment
// right-composed with a random-walk error (planar translation + yaw), scaled
// by sqrt(dt).
struct OdometryNoise {
  double trans_std = 0.0;  // m / sqrt(s)
  double yaw_std = 0.0;    // rad / sqrt(s)
};

inline Pose measure_odometry(const Pose& T_WB_prev, const Pose& T_WB_curr, double dt,
                             const OdometryNoise& noise, uint64_t tick, uint64_t stream_seed) {
  Pose increment = compose(T_WB_prev.inverse(), T_WB_curr);
  increment.parent = "B_prev";
  increment.child = "B";
  if (noise.trans_std <= 0.0 && noise.yaw_std <= 0.0) return increment;
  Rng rng(mix_seed(stream_seed, tick));
  double s = std::sqrt(dt);
  Pose err = planar_pose("B", "B", rng.gaussian(0.0, noise.trans_std * s),
                         rng.gaussian(0.0, noise.trans_std * s),
                         rng.gaussian(0.0, noise.yaw_std * s));
  Pose out = increment;
  out.q = (increment.q * err.q).normalized();
  out.t = increment.t + increment.q * err.t;
  return out;
}

inline double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

// Dense list of target poses the follower walks through in order.
struct RoutePlan {
  std::vector<Pose> points;
};

// Resamples a pose polyline at roughly `spacing` metres, slerping orientation
// across each segment.  Always keeps the final pose.
inline RoutePlan densify(const std::vector<Pose>& waypoints, double spacing) {
  RoutePlan plan;
  if (waypoints.size() < 2) {
    plan.points = waypoints;
    return plan;
  }
  for (size_t i = 0; i + 1 < waypoints.size(); ++i) {
    const Pose& a = waypoints[i];
    const Pose& b = waypoints[i + 1];
    double len = (b.t - a.t).norm();
    int steps = std::max(1, static_cast<int>(std::ceil(len / spacing)));
    for (int s = 0; s < steps; ++s) plan.points.push_back(interpolate(a, b, double(s) / steps));
  }
  plan.points.push_back(waypoints.back());
  return plan;
}

struct FollowerParams {
  double kp_lin = 1.5;
  double kp_yaw = 2.0;
  double v_max = 0.3;        // m/s
  double yaw_rate_max = 0.8; // rad/s
  int lookahead = 2;         // plan points ahead of the current index
  double advance_radius = 0.3;
  double done_radius = 0.15;
};

// Walks the plan with a monotone index; holonomic proportional control toward
// a lookahead point, heading servoed to the plan's stored orientation (so a
// reversed plan is followed by strafing/backing up rather than turning
// around).
class Follower {
 public:
  Follower(RoutePlan plan, FollowerParams params) : plan_(std::move(plan)), params_(params) {}

  VelocityCommand control(const Pose& T_est) {
    const auto& pts = plan_.points;
    if (pts.empty()) return {};
    // advance on proximity, and also whenever the next point is strictly
    // closer — corner cuts can otherwise park the base on the lookahead
    // point while the indexed point stays out of reach
    while (index_ + 1 < pts.size() &&
           ((pts[index_].t - T_est.t).head<2>().norm() < params_.advance_radius ||
            (pts[index_ + 1].t - T_est.t).head<2>().norm() <
                (pts[index_].t - T_est.t).head<2>().norm()))
      ++index_;
    size_t target_idx = std::min(index_ + params_.lookahead, pts.size() - 1);
    const Pose& target = pts[target_idx];

    Vec3 error_W = target.t - T_est.t;
    Vec3 error_B = T_est.q.conjugate() * error_W;
    VelocityCommand cmd;
    cmd.vx = std::clamp(params_.kp_lin * error_B.x(), -params_.v_max, params_.v_max);
    cmd.vy = std::clamp(params_.kp_lin * error_B.y(), -params_.v_max, params_.v_max);
    double yaw_err = wrap_angle(yaw_of(target) - yaw_of(T_est));
    cmd.yaw_rate = std::clamp(params_.kp_yaw * yaw_err, -params_.yaw_rate_max, params_.yaw_rate_max);

    if (index_ + 1 >= pts.size() &&
        (pts.back().t - T_est.t).head<2>().norm() < params_.done_radius)
      done_ = true;
    return cmd;
  }

  bool done() const { return done_; }
  size_t index() const { return index_; }

 private:
  RoutePlan plan_;
  FollowerParams params_;
  size_t index_ = 0;
  bool done_ = false;
};

}  // namespace vtr
