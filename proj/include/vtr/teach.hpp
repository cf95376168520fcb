#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "vtr/camera.hpp"
#include "vtr/errors.hpp"
#include "vtr/geometry.hpp"
#include "vtr/localization.hpp"
#include "vtr/map.hpp"
#include "vtr/motion.hpp"
#include "vtr/rng.hpp"
#include "vtr/world.hpp"

namespace vtr {

// Named substreams hung off the scenario seed, one per noise source, so each
// is reproducible independently of the others.
constexpr uint64_t kOdometryStream = 0x6f646f6dull;
constexpr uint64_t kJitterStream = 0x6a697474ull;
constexpr uint64_t kCameraStreamBase = 0x63616d00ull;

inline uint64_t camera_stream(uint64_t seed, size_t camera_index) {
  return mix_seed(seed, kCameraStreamBase + camera_index);
}

struct TeachConfig {
  double dt = 0.05;
  double kf_alpha = 0.9;        // blend between distance and heading triggers
  double kf_distance = 1.0;     // metres
  double kf_heading = 30.0 * M_PI / 180.0;
  double backbone_spacing = 0.25;
  int min_keyframe_landmarks = 8;
  double max_duration = 600.0;
  LocalizerConfig localizer;
  double prior_rot_std_step = 0.005;
  double prior_trans_std_step = 0.005;
  FollowerParams follower;
};

struct TeachResult {
  Map map;
  std::vector<Pose> true_path;  // physical base pose per tick (world frame)
  std::vector<Pose> odom_path;  // dead-reckoned pose per tick (map frame)
};

inline bool camera_due(const RigCamera& cam, uint64_t tick, double dt) {
  auto period_ticks = static_cast<uint64_t>(std::llround(cam.period / dt));
  auto offset_ticks = static_cast<uint64_t>(std::llround(cam.offset / dt));
  if (period_ticks == 0) return true;
  return tick >= offset_ticks && (tick - offset_ticks) % period_ticks == 0;
}

// Drives the route with ground-truth control (a scripted demonstration),
// integrates noisy odometry alongside, and builds the map in the odometry
// frame: keyframes where the blended distance/heading score trips, entropy
// samples from localizing against the map everywhere else.
inline TeachResult teach(const World& world, const std::vector<RigCamera>& rig,
                         const std::vector<Pose>& waypoints_W, const Pose& start_W,
                         const SensorNoise& sensor, const OdometryNoise& odom_noise,
                         const GaitJitter& jitter, const TeachConfig& cfg, uint64_t seed) {
  TeachResult result;
  result.map.rig = rig;

  RoutePlan plan = densify(waypoints_W, cfg.backbone_spacing);
  Follower follower(plan, cfg.follower);

  Pose true_base = start_W;
  Pose odom = Pose::identity("M", "B");
  Pose prev_jittered = apply_gait_jitter(true_base, jitter, 0.0, 0, mix_seed(seed, kJitterStream));

  struct CameraState {
    bool has_keyframe = false;
    Pose last_keyframe;
  };
  std::unordered_map<std::string, CameraState> cam_state;
  uint64_t next_keyframe_id = 1;

  auto build_keyframe = [&](const RigCamera& cam, const std::vector<Observation>& obs,
                            const Pose& odom) {
    Keyframe kf;
    kf.id = next_keyframe_id;
    kf.camera = cam.tag;
    kf.T_MB = odom;
    Pose T_MC = compose(odom, cam.T_BC);
    std::unordered_map<uint64_t, bool> taken;
    for (const auto& o : obs) {
      if (o.pixel.x() - o.pixel.z() <= 0.0) continue;
      if (!taken.emplace(o.landmark_id, true).second) continue;
      MapLandmark lm;
      lm.id = o.landmark_id;
      lm.p_M = T_MC * cam.model.triangulate(o.pixel);
      kf.landmarks.push_back(lm);
    }
    return kf;
  };

  auto prior_info = [&](uint64_t steps) {
    double n = static_cast<double>(std::max<uint64_t>(1, steps));
    Mat6 info = Mat6::Zero();
    info.topLeftCorner<3, 3>() =
        Mat3::Identity() / (cfg.prior_rot_std_step * cfg.prior_rot_std_step * n);
    info.bottomRightCorner<3, 3>() =
        Mat3::Identity() / (cfg.prior_trans_std_step * cfg.prior_trans_std_step * n);
    return info;
  };

  uint64_t max_ticks = static_cast<uint64_t>(cfg.max_duration / cfg.dt);
  for (uint64_t tick = 0; tick <= max_ticks; ++tick) {
    double t = tick * cfg.dt;
    Pose jittered = apply_gait_jitter(true_base, jitter, t, tick, mix_seed(seed, kJitterStream));
    if (tick > 0) {
      Pose inc = measure_odometry(prev_jittered, jittered, cfg.dt, odom_noise, tick,
                                  mix_seed(seed, kOdometryStream));
      inc.parent = odom.child;
      odom = compose(odom, inc);
    }
    prev_jittered = jittered;
    result.true_path.push_back(jittered);
    result.odom_path.push_back(odom);

    if (result.map.route.empty() ||
        (result.map.route.back().t - odom.t).norm() >= cfg.backbone_spacing)
      result.map.route.push_back(odom);

    for (size_t ci = 0; ci < rig.size(); ++ci) {
      const RigCamera& cam = rig[ci];
      if (!camera_due(cam, tick, cfg.dt)) continue;
      Pose T_WC = compose(jittered, cam.T_BC);
      auto obs = observe(world, cam.model, T_WC, tick, camera_stream(seed, ci), sensor);

      CameraState& st = cam_state[cam.tag];
      double score = 0.0;
      if (st.has_keyframe) {
        double d = (odom.t - st.last_keyframe.t).norm();
        double theta = rotation_angle_between(odom, st.last_keyframe);
        score = cfg.kf_alpha * d / cfg.kf_distance + (1.0 - cfg.kf_alpha) * theta / cfg.kf_heading;
      }
      if (!st.has_keyframe || score >= 1.0) {
        Keyframe kf = build_keyframe(cam, obs, odom);
        if (static_cast<int>(kf.landmarks.size()) < cfg.min_keyframe_landmarks)
          throw TeachFailureError(t, cam.tag,
                                  "only " + std::to_string(kf.landmarks.size()) +
                                      " landmarks for a new keyframe");
        ++next_keyframe_id;
        result.map.keyframes.push_back(std::move(kf));
        st.has_keyframe = true;
        st.last_keyframe = odom;
      } else {
        const Keyframe* ref = result.map.nearest_keyframe(odom.t, cam.tag, &odom,
                                                          cfg.localizer.max_orientation_error);
        if (!ref) continue;
        auto matches =
            match(obs, ref->landmarks, compose(odom, cam.T_BC), cam.model, cfg.localizer.gate_px);
        PosePrior prior;
        prior.T_MB = odom;
        prior.information = prior_info(static_cast<uint64_t>(std::llround(cam.period / cfg.dt)));
        auto res = refine(matches, odom, cam.T_BC, cam.model, cfg.localizer, prior);
        if (res.success)
          result.map.samples.push_back({cam.tag, odom.t, res.neg_entropy});
      }
    }

    if (follower.done()) break;
    VelocityCommand cmd = follower.control(true_base);
    true_base = integrate_command(true_base, cmd, cfg.dt);
    if (tick == max_ticks)
      throw TeachFailureError(t, "", "route not completed within max_duration");
  }

  // Anchor the route end: the distance trigger rarely fires right at the goal,
  // and an unanchored tail leaves the last keyframe's model extrapolating over
  // ground it never sampled.  Best-effort — a camera with a sparse terminal
  // view just keeps its existing coverage.
  uint64_t final_tick = result.true_path.empty() ? 0 : result.true_path.size() - 1;
  for (size_t ci = 0; ci < rig.size(); ++ci) {
    const RigCamera& cam = rig[ci];
    CameraState& st = cam_state[cam.tag];
    if (st.has_keyframe && (odom.t - st.last_keyframe.t).norm() <= cfg.backbone_spacing) continue;
    Pose T_WC = compose(prev_jittered, cam.T_BC);
    auto obs = observe(world, cam.model, T_WC, final_tick, camera_stream(seed, ci), sensor);
    Keyframe kf = build_keyframe(cam, obs, odom);
    if (static_cast<int>(kf.landmarks.size()) < cfg.min_keyframe_landmarks) continue;
    ++next_keyframe_id;
    result.map.keyframes.push_back(std::move(kf));
    st.has_keyframe = true;
    st.last_keyframe = odom;
  }

  if ((result.map.route.back().t - odom.t).norm() > 1e-9) result.map.route.push_back(odom);
  return result;
}

}  // namespace vtr
