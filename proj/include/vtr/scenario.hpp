#pragma once

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <string>
#include <vector>

#include "vtr/camera.hpp"
#include "vtr/cpm.hpp"
#include "vtr/errors.hpp"
#include "vtr/geometry.hpp"
#include "vtr/motion.hpp"
#include "vtr/repeat.hpp"
#include "vtr/teach.hpp"
#include "vtr/world.hpp"

namespace vtr {

struct OcclusionSpec {
  double start = 0.0;
  double end = 0.0;
  std::string camera = "@active";  // tag, or @active to bind at event start
  double drop_prob = 1.0;
};

struct KidnapSpec {
  double t = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  double dyaw = 0.0;  // radians, applied as a world-frame teleport
};

struct Scenario {
  std::string name = "scenario";
  uint64_t seed = 1;
  double dt = 0.05;
  std::vector<LandmarkBlock> blocks;
  std::vector<RigCamera> rig;
  std::vector<Pose> waypoints;  // world frame
  Pose start = Pose::identity("W", "B");
  SensorNoise sensor;
  OdometryNoise odometry;
  GaitJitter jitter;
  TeachConfig teach;
  CpmParams cpm;
  RepeatConfig repeat;
  int repeats = 1;
  bool alternate_direction = true;
  std::string backward_mode = "strafe";  // or "reverse_heading"
  double repeat_max_duration = 300.0;
  double lost_give_up = 30.0;
  std::vector<OcclusionSpec> occlusions;
  std::vector<KidnapSpec> kidnaps;
};

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad value for '" + key + "'");
  }
}

inline Vec3 vec3_at(const nlohmann::json& j, const std::string& key,
                    const Vec3& def = Vec3::Zero()) {
  if (!j.contains(key)) return def;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw ConfigError("'" + key + "' must be [x, y, z]");
  return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

inline double deg(double d) { return d * M_PI / 180.0; }

inline void parse_localizer(const nlohmann::json& j, LocalizerConfig& cfg) {
  cfg.pixel_std = get_or(j, "pixel_std", cfg.pixel_std);
  cfg.huber_delta = get_or(j, "huber_delta", cfg.huber_delta);
  cfg.max_iterations = get_or(j, "max_iterations", cfg.max_iterations);
  cfg.tolerance = get_or(j, "tolerance", cfg.tolerance);
  cfg.min_matches = get_or(j, "min_matches", cfg.min_matches);
  cfg.gate_px = get_or(j, "gate_px", cfg.gate_px);
  if (j.contains("max_orientation_error_deg"))
    cfg.max_orientation_error = deg(j.at("max_orientation_error_deg").get<double>());
  cfg.ransac_iterations = get_or(j, "ransac_iterations", cfg.ransac_iterations);
  cfg.ransac_threshold_px = get_or(j, "ransac_threshold_px", cfg.ransac_threshold_px);
  cfg.ransac_min_inliers = get_or(j, "ransac_min_inliers", cfg.ransac_min_inliers);
  cfg.ransac_min_inlier_fraction =
      get_or(j, "ransac_min_inlier_fraction", cfg.ransac_min_inlier_fraction);
}

inline void parse_follower(const nlohmann::json& j, FollowerParams& f) {
  f.kp_lin = get_or(j, "kp_lin", f.kp_lin);
  f.kp_yaw = get_or(j, "kp_yaw", f.kp_yaw);
  f.v_max = get_or(j, "v_max", f.v_max);
  f.yaw_rate_max = get_or(j, "yaw_rate_max", f.yaw_rate_max);
  f.lookahead = get_or(j, "lookahead", f.lookahead);
  f.advance_radius = get_or(j, "advance_radius", f.advance_radius);
  f.done_radius = get_or(j, "done_radius", f.done_radius);
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  using detail::get_or;
  Scenario s;
  s.name = get_or<std::string>(j, "name", "scenario");
  s.seed = get_or<uint64_t>(j, "seed", 1);
  s.dt = get_or(j, "dt", 0.05);
  if (s.dt <= 0.0) throw ConfigError("dt must be positive");
  s.teach.dt = s.dt;
  s.repeat.dt = s.dt;

  if (!j.contains("world") || !j.at("world").contains("blocks"))
    throw ConfigError("scenario needs world.blocks");
  for (const auto& bj : j.at("world").at("blocks")) {
    LandmarkBlock b;
    b.count = bj.at("count").get<int>();
    b.lo = detail::vec3_at(bj, "lo");
    b.hi = detail::vec3_at(bj, "hi");
    if (b.count <= 0) throw ConfigError("block count must be positive");
    s.blocks.push_back(b);
  }

  if (!j.contains("rig") || j.at("rig").empty()) throw ConfigError("scenario needs a rig");
  std::set<std::string> tags;
  for (const auto& cj : j.at("rig")) {
    RigCamera c;
    c.tag = cj.at("tag").get<std::string>();
    if (!valid_camera_tag(c.tag))
      throw ConfigError("camera tag must be front/rear/left/right, got '" + c.tag + "'");
    if (!tags.insert(c.tag).second) throw ConfigError("duplicate camera tag '" + c.tag + "'");
    c.model.fx = get_or(cj, "fx", 380.0);
    c.model.fy = get_or(cj, "fy", 380.0);
    c.model.cx = get_or(cj, "cx", 320.0);
    c.model.cy = get_or(cj, "cy", 240.0);
    c.model.baseline = get_or(cj, "baseline", 0.1);
    c.model.width = get_or(cj, "width", 640);
    c.model.height = get_or(cj, "height", 480);
    c.model.min_depth = get_or(cj, "min_depth", 0.05);
    c.period = get_or(cj, "period", 0.2);
    c.offset = get_or(cj, "offset", 0.0);
    c.T_BC = camera_mount(c.tag, detail::vec3_at(cj, "position", Vec3(0.3, 0.0, 0.1)),
                          detail::deg(get_or(cj, "yaw_deg", 0.0)),
                          detail::deg(get_or(cj, "pitch_down_deg", 12.0)));
    if (c.model.baseline <= 0.0 || c.model.fx <= 0.0) throw ConfigError("bad camera intrinsics");
    s.rig.push_back(c);
  }
  if (s.rig.size() > 4) throw ConfigError("at most four cameras");

  if (!j.contains("route") || !j.at("route").contains("waypoints"))
    throw ConfigError("scenario needs route.waypoints");
  for (const auto& wj : j.at("route").at("waypoints")) {
    if (!wj.is_array() || wj.size() < 2) throw ConfigError("waypoint must be [x, y(, yaw_deg)]");
    double yaw = wj.size() > 2 ? detail::deg(wj[2].get<double>()) : 0.0;
    s.waypoints.push_back(planar_pose("W", "B", wj[0].get<double>(), wj[1].get<double>(), yaw));
  }
  if (s.waypoints.size() < 2) throw ConfigError("route needs at least two waypoints");
  double speed = get_or(j.at("route"), "speed", 0.3);
  s.teach.follower.v_max = speed;
  s.start = s.waypoints.front();
  s.start.parent = "W";

  if (j.contains("noise")) {
    const auto& nj = j.at("noise");
    s.sensor.pixel_std = get_or(nj, "pixel_std", 0.5);
    s.sensor.drop_prob = get_or(nj, "drop_prob", 0.0);
    s.sensor.confusion_rate = get_or(nj, "confusion_rate", 0.0);
    if (nj.contains("odometry")) {
      s.odometry.trans_std = get_or(nj.at("odometry"), "trans_std", 0.0);
      s.odometry.yaw_std = get_or(nj.at("odometry"), "yaw_std", 0.0);
    }
    if (nj.contains("jitter")) {
      s.jitter.amplitude = get_or(nj.at("jitter"), "amplitude", 0.0);
      s.jitter.frequency = get_or(nj.at("jitter"), "frequency", 2.0);
      s.jitter.noise_std = get_or(nj.at("jitter"), "noise_std", 0.0);
    }
  }

  if (j.contains("keyframes")) {
    const auto& kj = j.at("keyframes");
    s.teach.kf_alpha = get_or(kj, "alpha", s.teach.kf_alpha);
    s.teach.kf_distance = get_or(kj, "distance", s.teach.kf_distance);
    if (kj.contains("heading_deg")) s.teach.kf_heading = detail::deg(kj.at("heading_deg").get<double>());
    s.teach.backbone_spacing = get_or(kj, "backbone_spacing", s.teach.backbone_spacing);
    s.teach.min_keyframe_landmarks =
        get_or(kj, "min_landmarks", s.teach.min_keyframe_landmarks);
  }
  s.teach.max_duration = get_or(j, "teach_max_duration", s.teach.max_duration);

  // measurement sigma defaults to the simulated pixel noise, floored so a
  // noise-free scenario still has a finite information matrix
  s.teach.localizer.pixel_std = std::max(s.sensor.pixel_std, 0.1);
  if (j.contains("localizer")) detail::parse_localizer(j.at("localizer"), s.teach.localizer);

  if (j.contains("cpm")) {
    const auto& cj = j.at("cpm");
    s.cpm.d_max = get_or(cj, "d_max", s.cpm.d_max);
    s.cpm.length_scale = get_or(cj, "length_scale", s.cpm.length_scale);
    s.cpm.k_sigma = get_or(cj, "k_sigma", s.cpm.k_sigma);
  }

  if (j.contains("repeat")) {
    const auto& rj = j.at("repeat");
    s.repeats = get_or(rj, "repeats", 1);
    s.alternate_direction = get_or(rj, "alternate_direction", true);
    s.backward_mode = get_or<std::string>(rj, "backward_mode", "strafe");
    if (s.backward_mode != "strafe" && s.backward_mode != "reverse_heading")
      throw ConfigError("backward_mode must be strafe or reverse_heading");
    s.repeat.flag_cooldown = get_or(rj, "flag_cooldown", s.repeat.flag_cooldown);
    s.repeat.local_reloc_radius = get_or(rj, "local_reloc_radius", s.repeat.local_reloc_radius);
    s.repeat.lost_timeout = get_or(rj, "lost_timeout", s.repeat.lost_timeout);
    s.repeat.reloc_top_k = get_or(rj, "reloc_top_k", s.repeat.reloc_top_k);
    s.repeat.min_signature_overlap =
        get_or(rj, "min_signature_overlap", s.repeat.min_signature_overlap);
    s.repeat_max_duration = get_or(rj, "max_duration", s.repeat_max_duration);
    s.lost_give_up = get_or(rj, "lost_give_up", s.lost_give_up);
    if (rj.contains("follower")) detail::parse_follower(rj.at("follower"), s.teach.follower);
  }
  if (s.repeats < 0) throw ConfigError("repeats must be non-negative");
  s.repeat.localizer = s.teach.localizer;

  double prior_rot = get_or(j, "prior_rot_std_step", 0.005);
  double prior_trans = get_or(j, "prior_trans_std_step", 0.005);
  s.teach.prior_rot_std_step = prior_rot;
  s.teach.prior_trans_std_step = prior_trans;
  s.repeat.prior_rot_std_step = prior_rot;
  s.repeat.prior_trans_std_step = prior_trans;

  if (j.contains("events")) {
    const auto& ej = j.at("events");
    if (ej.contains("occlusions"))
      for (const auto& oj : ej.at("occlusions")) {
        OcclusionSpec o;
        o.start = oj.at("start").get<double>();
        o.end = oj.at("end").get<double>();
        o.camera = get_or<std::string>(oj, "camera", "@active");
        o.drop_prob = get_or(oj, "drop_prob", 1.0);
        if (o.end < o.start) throw ConfigError("occlusion end before start");
        if (o.camera != "@active" && !valid_camera_tag(o.camera))
          throw ConfigError("occlusion camera must be a tag or @active");
        s.occlusions.push_back(o);
      }
    if (ej.contains("kidnaps"))
      for (const auto& kj : ej.at("kidnaps")) {
        KidnapSpec k;
        k.t = kj.at("t").get<double>();
        k.dx = get_or(kj, "dx", 0.0);
        k.dy = get_or(kj, "dy", 0.0);
        k.dyaw = detail::deg(get_or(kj, "dyaw_deg", 0.0));
        s.kidnaps.push_back(k);
      }
  }
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace vtr
