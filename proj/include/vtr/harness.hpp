#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "vtr/cpm.hpp"
#include "vtr/map.hpp"
#include "vtr/motion.hpp"
#include "vtr/pte.hpp"
#include "vtr/repeat.hpp"
#include "vtr/scenario.hpp"
#include "vtr/teach.hpp"
#include "vtr/world.hpp"

namespace vtr {

constexpr uint64_t kTeachPhase = 0x74656163ull;
constexpr uint64_t kRepeatPhaseBase = 0x72657000ull;

struct TickLog {
  uint64_t tick = 0;
  double t = 0.0;
  RepeatState state = RepeatState::Lost;
  std::string active;
  std::string frame_camera;  // empty when no frame was processed this tick
  bool loc_success = false;
  double neg_entropy = 0.0;
  int matches = 0;
  int inliers = 0;
  uint64_t keyframe_id = 0;
  bool below_margin = false;
  bool switched = false;
  bool has_estimate = false;
  Pose estimate;
  Pose truth;
};

struct RepeatRunResult {
  int index = 0;
  bool forward = true;
  bool completed = false;
  bool lost_terminated = false;
  double duration = 0.0;
  std::vector<TickLog> ticks;
  std::vector<RepeatEvent> events;
  std::vector<double> pte;
  double mean_pte = 0.0;
  double max_pte = 0.0;
  int switch_count = 0;
  int below_margin_switches = 0;
  int flag_count = 0;
  Pose final_true;
};

struct RunArtifacts {
  World world;
  TeachResult teach;
  std::vector<RepeatRunResult> repeats;
};

inline World build_world(const Scenario& s) { return World::generate(s.blocks, s.seed); }

inline TeachResult run_teach(const Scenario& s, const World& world) {
  return teach(world, s.rig, s.waypoints, s.start, s.sensor, s.odometry, s.jitter, s.teach,
               mix_seed(s.seed, kTeachPhase));
}

inline void run_learn(Map& map, const CpmParams& params) {
  map.cpm = learn_cpm(map.keyframe_positions(), map.samples, params);
}

inline RoutePlan repeat_plan(const Map& map, bool forward, const std::string& backward_mode,
                             double spacing) {
  std::vector<Pose> poses = map.route;
  if (!forward) {
    std::reverse(poses.begin(), poses.end());
    if (backward_mode == "reverse_heading")
      for (auto& p : poses)
        p.q = (Eigen::Quaterniond(Eigen::AngleAxisd(M_PI, Vec3::UnitZ())) * p.q).normalized();
  }
  return densify(poses, spacing);
}

// One closed-loop repeat traverse.  Sensor order within a tick matches the
// teach pass: kidnaps, then observation + localization at the current pose,
// then control and integration.
inline RepeatRunResult run_repeat(const Scenario& s, const Map& map, const World& world,
                                  const std::vector<Pose>& teach_truth, const Pose& start_true,
                                  int run_index, bool forward, bool lock_camera) {
  RepeatRunResult run;
  run.index = run_index;
  run.forward = forward;

  uint64_t run_seed = mix_seed(s.seed, kRepeatPhaseBase + static_cast<uint64_t>(run_index));
  RepeatConfig cfg = s.repeat;
  cfg.lock_camera = lock_camera;
  RepeatMachine machine(map, cfg, mix_seed(run_seed, 0x72616e73ull));

  RoutePlan plan = repeat_plan(map, forward, s.backward_mode, s.teach.backbone_spacing);
  Follower follower(plan, s.teach.follower);

  struct LiveOcclusion {
    uint64_t start_tick = 0, end_tick = 0;
    std::string camera;  // resolved tag
    double drop_prob = 1.0;
    bool bind_active = false;
  };
  std::vector<LiveOcclusion> occlusions;
  for (const auto& o : s.occlusions) {
    LiveOcclusion lo;
    lo.start_tick = static_cast<uint64_t>(std::llround(o.start / s.dt));
    lo.end_tick = static_cast<uint64_t>(std::llround(o.end / s.dt));
    lo.camera = o.camera;
    lo.drop_prob = o.drop_prob;
    lo.bind_active = o.camera == "@active";
    occlusions.push_back(lo);
  }

  Pose true_base = start_true;
  Pose prev_jittered =
      apply_gait_jitter(true_base, s.jitter, 0.0, 0, mix_seed(run_seed, kJitterStream));
  double lost_time = 0.0;
  uint64_t max_ticks = static_cast<uint64_t>(s.repeat_max_duration / s.dt);

  for (uint64_t tick = 0; tick <= max_ticks; ++tick) {
    double t = tick * s.dt;
    for (const auto& k : s.kidnaps) {
      if (static_cast<uint64_t>(std::llround(k.t / s.dt)) != tick) continue;
      Pose delta = planar_pose("W", "W", k.dx, k.dy, k.dyaw);
      true_base = compose(delta, true_base);
      prev_jittered = compose(delta, prev_jittered);
    }

    Pose jittered =
        apply_gait_jitter(true_base, s.jitter, t, tick, mix_seed(run_seed, kJitterStream));
    Pose inc = measure_odometry(prev_jittered, jittered, s.dt, s.odometry, tick,
                                mix_seed(run_seed, kOdometryStream));
    prev_jittered = jittered;
    machine.predict(inc, tick);

    for (auto& o : occlusions)
      if (o.bind_active && tick == o.start_tick) {
        o.camera = machine.active_camera();
        o.bind_active = false;
      }

    TickLog log;
    log.tick = tick;
    log.t = t;
    log.truth = jittered;
    for (size_t ci = 0; ci < map.rig.size(); ++ci) {
      const RigCamera& cam = map.rig[ci];
      if (!camera_due(cam, tick, s.dt)) continue;
      SensorNoise noise = s.sensor;
      for (const auto& o : occlusions)
        if (o.camera == cam.tag && tick >= o.start_tick && tick < o.end_tick)
          noise.drop_prob = std::max(noise.drop_prob, o.drop_prob);
      auto obs = observe(world, cam.model, compose(jittered, cam.T_BC), tick,
                         camera_stream(run_seed, ci), noise);
      FrameOutcome out = machine.process_frame(cam.tag, obs, tick);
      if (!out.processed) continue;
      log.frame_camera = cam.tag;
      log.loc_success = out.success;
      log.neg_entropy = out.neg_entropy;
      log.matches = out.matches;
      log.inliers = out.inliers;
      log.keyframe_id = out.keyframe_id;
      log.below_margin = out.below_margin;
      log.switched = out.switched;
    }

    log.state = machine.state();
    log.active = machine.active_camera();
    log.has_estimate = machine.has_estimate();
    if (log.has_estimate) log.estimate = machine.estimate();
    run.ticks.push_back(log);
    for (auto& ev : machine.drain_events()) run.events.push_back(ev);
    run.duration = t;

    VelocityCommand cmd;
    // dead reckoning keeps following; only a full loss parks the robot
    if (machine.has_estimate()) cmd = follower.control(machine.estimate());
    true_base = integrate_command(true_base, cmd, s.dt);
    if (follower.done()) {
      run.completed = true;
      break;
    }

    if (machine.state() == RepeatState::Lost)
      lost_time += s.dt;
    else
      lost_time = 0.0;
    if (lost_time >= s.lost_give_up) break;
  }

  run.lost_terminated = !run.completed;
  run.final_true = true_base;

  std::vector<Vec3> truth_positions, teach_positions;
  truth_positions.reserve(run.ticks.size());
  for (const auto& tl : run.ticks) truth_positions.push_back(tl.truth.t);
  teach_positions.reserve(teach_truth.size());
  for (const auto& p : teach_truth) teach_positions.push_back(p.t);
  run.pte = compute_pte(truth_positions, teach_positions);
  run.mean_pte = mean_of(run.pte);
  run.max_pte = max_of(run.pte);

  for (const auto& ev : run.events) {
    if (ev.kind == RepeatEvent::Kind::Switch) {
      ++run.switch_count;
      if (ev.reason == SwitchReason::BelowMargin) ++run.below_margin_switches;
    }
    if (ev.kind == RepeatEvent::Kind::Flag) ++run.flag_count;
  }
  return run;
}

// teach ends at the route's far end, so the first repeat runs backward when
// alternating; a non-alternating scenario starts every repeat from home.
inline std::vector<RepeatRunResult> run_repeats(const Scenario& s, const Map& map,
                                                const World& world,
                                                const std::vector<Pose>& teach_truth,
                                                bool lock_camera) {
  std::vector<RepeatRunResult> out;
  Pose cursor = teach_truth.empty() ? s.start : teach_truth.back();
  cursor.t.z() = s.start.t.z();
  for (int r = 0; r < s.repeats; ++r) {
    bool forward = s.alternate_direction ? (r % 2 == 1) : true;
    Pose start_true = s.alternate_direction ? cursor : s.start;
    auto run = run_repeat(s, map, world, teach_truth, start_true, r, forward, lock_camera);
    cursor = run.final_true;
    out.push_back(std::move(run));
  }
  return out;
}

inline RunArtifacts run_full(const Scenario& s, bool lock_camera = false) {
  RunArtifacts art;
  art.world = build_world(s);
  art.teach = run_teach(s, art.world);
  run_learn(art.teach.map, s.cpm);
  art.repeats = run_repeats(s, art.teach.map, art.world, art.teach.true_path, lock_camera);
  return art;
}

// ---- deterministic text artifacts ----

inline std::string fmt_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string pose_csv(const Pose& p) {
  return fmt_g17(p.q.w()) + "," + fmt_g17(p.q.x()) + "," + fmt_g17(p.q.y()) + "," +
         fmt_g17(p.q.z()) + "," + fmt_g17(p.t.x()) + "," + fmt_g17(p.t.y()) + "," +
         fmt_g17(p.t.z());
}

inline void write_teach_truth_csv(const std::string& path, const TeachResult& teach, double dt) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "tick,t,qw,qx,qy,qz,tx,ty,tz,odo_qw,odo_qx,odo_qy,odo_qz,odo_tx,odo_ty,odo_tz\n";
  for (size_t i = 0; i < teach.true_path.size(); ++i)
    out << i << "," << fmt_g17(i * dt) << "," << pose_csv(teach.true_path[i]) << ","
        << pose_csv(teach.odom_path[i]) << "\n";
}

inline void write_repeat_csv(const std::string& path, const RepeatRunResult& run) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "tick,t,state,active,frame_camera,success,E,matches,inliers,keyframe,"
         "below_margin,switched,has_estimate,est_qw,est_qx,est_qy,est_qz,est_tx,est_ty,est_tz,"
         "true_qw,true_qx,true_qy,true_qz,true_tx,true_ty,true_tz,pte\n";
  for (size_t i = 0; i < run.ticks.size(); ++i) {
    const TickLog& l = run.ticks[i];
    out << l.tick << "," << fmt_g17(l.t) << "," << to_string(l.state) << "," << l.active << ","
        << l.frame_camera << "," << (l.loc_success ? 1 : 0) << "," << fmt_g17(l.neg_entropy)
        << "," << l.matches << "," << l.inliers << "," << l.keyframe_id << ","
        << (l.below_margin ? 1 : 0) << "," << (l.switched ? 1 : 0) << ","
        << (l.has_estimate ? 1 : 0) << "," << pose_csv(l.estimate) << "," << pose_csv(l.truth)
        << "," << fmt_g17(i < run.pte.size() ? run.pte[i] : 0.0) << "\n";
  }
}

inline void write_events_csv(const std::string& path, const RepeatRunResult& run, double dt) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "tick,t,kind,detail\n";
  for (const auto& ev : run.events) {
    out << ev.tick << "," << fmt_g17(ev.tick * dt) << ",";
    switch (ev.kind) {
      case RepeatEvent::Kind::StateChange:
        out << "state," << to_string(ev.from_state) << "->" << to_string(ev.to_state);
        break;
      case RepeatEvent::Kind::Switch:
        out << "switch," << ev.from_camera << "->" << ev.to_camera << ":"
            << to_string(ev.reason);
        break;
      case RepeatEvent::Kind::Flag:
        out << "flag," << ev.camera;
        break;
      case RepeatEvent::Kind::Relocalized:
        out << "relocalized," << ev.camera;
        break;
    }
    out << "\n";
  }
}

inline nlohmann::json run_summary_json(const std::vector<RepeatRunResult>& runs) {
  nlohmann::json j;
  j["repeats"] = nlohmann::json::array();
  std::vector<double> means;
  double overall_max = 0.0;
  bool any_lost = false;
  for (const auto& r : runs) {
    nlohmann::json rj;
    rj["index"] = r.index;
    rj["forward"] = r.forward;
    rj["completed"] = r.completed;
    rj["lost_terminated"] = r.lost_terminated;
    rj["duration"] = r.duration;
    rj["mean_pte"] = r.mean_pte;
    rj["max_pte"] = r.max_pte;
    rj["switches"] = r.switch_count;
    rj["below_margin_switches"] = r.below_margin_switches;
    rj["flags"] = r.flag_count;
    j["repeats"].push_back(rj);
    means.push_back(r.mean_pte);
    overall_max = std::max(overall_max, r.max_pte);
    any_lost = any_lost || r.lost_terminated;
  }
  j["mean_pte"] = mean_of(means);
  j["max_pte"] = overall_max;
  j["any_lost_termination"] = any_lost;
  return j;
}

// Mean path-tracking error over one time window of a run (run-local clock).
inline double segment_mean_pte(const RepeatRunResult& run, double t0, double t1) {
  std::vector<double> seg;
  for (size_t i = 0; i < run.ticks.size() && i < run.pte.size(); ++i)
    if (run.ticks[i].t >= t0 && run.ticks[i].t <= t1) seg.push_back(run.pte[i]);
  return mean_of(seg);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

// Reads the 7-number pose starting at `first_col` of every data row.
inline std::vector<Pose> read_pose_column(const std::string& path, size_t first_col,
                                          const std::string& parent, const std::string& child) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::vector<Pose> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() < first_col + 7) throw ConfigError("short row in '" + path + "'");
    Pose p;
    p.parent = parent;
    p.child = child;
    p.q = Eigen::Quaterniond(std::stod(fields[first_col]), std::stod(fields[first_col + 1]),
                             std::stod(fields[first_col + 2]), std::stod(fields[first_col + 3]));
    p.q.normalize();
    p.t = Vec3(std::stod(fields[first_col + 4]), std::stod(fields[first_col + 5]),
               std::stod(fields[first_col + 6]));
    out.push_back(p);
  }
  return out;
}

constexpr size_t kTeachTruthPoseColumn = 2;
constexpr size_t kRepeatTruthPoseColumn = 20;

}  // namespace vtr
