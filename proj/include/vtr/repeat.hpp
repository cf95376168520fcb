#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vtr/cpm.hpp"
#include "vtr/geometry.hpp"
#include "vtr/localization.hpp"
#include "vtr/map.hpp"
#include "vtr/rng.hpp"
#include "vtr/world.hpp"

namespace vtr {

enum class RepeatState { Lost, Localized, TrackingLost };

inline const char* to_string(RepeatState s) {
  switch (s) {
    case RepeatState::Lost: return "Lost";
    case RepeatState::Localized: return "Localized";
    case RepeatState::TrackingLost: return "TrackingLost";
  }
  return "?";
}

enum class SwitchReason { BetterCamera, BelowMargin, Flagged };

inline const char* to_string(SwitchReason r) {
  switch (r) {
    case SwitchReason::BetterCamera: return "BetterCamera";
    case SwitchReason::BelowMargin: return "BelowMargin";
    case SwitchReason::Flagged: return "Flagged";
  }
  return "?";
}

struct RepeatEvent {
  enum class Kind { StateChange, Switch, Flag, Relocalized };
  Kind kind = Kind::StateChange;
  uint64_t tick = 0;
  RepeatState from_state = RepeatState::Lost;
  RepeatState to_state = RepeatState::Lost;
  std::string from_camera;
  std::string to_camera;
  SwitchReason reason = SwitchReason::Flagged;
  std::string camera;
};

struct FrameOutcome {
  bool processed = false;  // frame was used at all (active camera / reloc attempt)
  bool success = false;
  double neg_entropy = 0.0;
  int matches = 0;
  int inliers = 0;
  uint64_t keyframe_id = 0;
  bool below_margin = false;
  bool switched = false;
};

struct RepeatConfig {
  double dt = 0.05;
  double flag_cooldown = 5.0;       // seconds a flagged camera sits out
  double local_reloc_radius = 3.0;  // metres around the dead-reckoned pose
  double lost_timeout = 10.0;       // seconds of failed tracking before declaring lost
  int reloc_top_k = 5;
  double min_signature_overlap = 0.02;
  bool lock_camera = false;         // baseline: no switching, no flags
  LocalizerConfig localizer;
  double prior_rot_std_step = 0.005;   // rad, dead-reckoning growth per step
  double prior_trans_std_step = 0.005; // m
};

// Closed-loop repeat estimator.  Call predict() once per control tick with the
// odometry increment, then process_frame() for every camera frame captured on
// that tick.  Camera switching and flagging follow the learned performance
// model; loss of tracking degrades Localized -> TrackingLost -> Lost, with
// local relocalization in the middle state and global relocalization at the
// bottom.
class RepeatMachine {
 public:
  RepeatMachine(const Map& map, RepeatConfig cfg, uint64_t seed)
      : map_(map), cfg_(cfg), seed_(seed) {
    cooldown_ticks_ = static_cast<uint64_t>(std::llround(cfg_.flag_cooldown / cfg_.dt));
    timeout_ticks_ = static_cast<uint64_t>(std::llround(cfg_.lost_timeout / cfg_.dt));
    if (!map_.rig.empty()) active_ = map_.rig.front().tag;
  }

  RepeatState state() const { return state_; }
  const std::string& active_camera() const { return active_; }
  bool has_estimate() const { return has_estimate_; }
  const Pose& estimate() const { return estimate_; }
  uint64_t ticks_since_fix() const { return ticks_since_fix_; }

  std::vector<RepeatEvent> drain_events() { return std::exchange(events_, {}); }

  void predict(const Pose& odometry_increment, uint64_t tick) {
    tick_ = tick;
    if (state_ == RepeatState::TrackingLost && tick >= tracking_entry_tick_ + timeout_ticks_)
      declare_lost();
    if (has_estimate_) {
      Pose inc = odometry_increment;
      inc.parent = estimate_.child;
      estimate_ = compose(estimate_, inc);
      ++ticks_since_fix_;
    }
  }

  FrameOutcome process_frame(const std::string& camera, const std::vector<Observation>& obs,
                             uint64_t tick) {
    tick_ = tick;
    if (cfg_.lock_camera && camera != active_) return {};
    switch (state_) {
      case RepeatState::Localized:
        if (camera != active_) return {};
        return track(camera, obs);
      case RepeatState::TrackingLost:
        if (flagged(camera)) return {};
        return local_relocalize(camera, obs);
      case RepeatState::Lost:
        if (flagged(camera)) return {};
        return global_relocalize(camera, obs);
    }
    return {};
  }

  bool flagged(const std::string& camera) const {
    auto it = flags_.find(camera);
    return it != flags_.end() && tick_ < it->second;
  }

 private:
  FrameOutcome track(const std::string& camera, const std::vector<Observation>& obs) {
    FrameOutcome out;
    out.processed = true;
    const RigCamera* cam = map_.camera(camera);
    const Keyframe* kf =
        cam ? map_.nearest_keyframe(estimate_.t, camera, &estimate_,
                                    cfg_.localizer.max_orientation_error)
            : nullptr;
    if (!cam || !kf) {
      handle_tracking_failure(out);
      return out;
    }
    out.keyframe_id = kf->id;

    Pose T_MC_pred = compose(estimate_, cam->T_BC);
    auto matches = match(obs, kf->landmarks, T_MC_pred, cam->model, cfg_.localizer.gate_px);
    out.matches = static_cast<int>(matches.size());

    PosePrior prior;
    prior.T_MB = estimate_;
    double n = static_cast<double>(std::max<uint64_t>(1, ticks_since_fix_));
    double rot_info = 1.0 / (cfg_.prior_rot_std_step * cfg_.prior_rot_std_step * n);
    double trans_info = 1.0 / (cfg_.prior_trans_std_step * cfg_.prior_trans_std_step * n);
    prior.information = Mat6::Zero();
    prior.information.topLeftCorner<3, 3>() = rot_info * Mat3::Identity();
    prior.information.bottomRightCorner<3, 3>() = trans_info * Mat3::Identity();

    auto res = refine(matches, estimate_, cam->T_BC, cam->model, cfg_.localizer, prior);
    out.inliers = res.num_inliers;
    if (!res.success) {
      handle_tracking_failure(out);
      return out;
    }

    estimate_ = res.T_MB;
    ticks_since_fix_ = 0;
    out.success = true;
    out.neg_entropy = res.neg_entropy;
    last_neg_entropy_ = res.neg_entropy;

    if (!cfg_.lock_camera && map_.cpm) apply_cpm(kf->id, res.neg_entropy, out);
    return out;
  }

  void apply_cpm(uint64_t kf_id, double E, FrameOutcome& out) {
    const Cpm& cpm = *map_.cpm;
    auto best = cpm.best_camera(kf_id);
    if (best && *best != active_ && !flagged(*best)) {
      const CpmEntry* ours = cpm.entry(kf_id, active_);
      const CpmEntry* theirs = cpm.entry(kf_id, *best);
      if (theirs && (!ours || theirs->mean > ours->mean)) {
        do_switch(*best, SwitchReason::BetterCamera);
        out.switched = true;
        return;
      }
    }
    if (cpm.should_switch(kf_id, active_, E)) {
      out.below_margin = true;
      auto target = pick_switch_target(kf_id);
      if (target) {
        flag(active_);
        do_switch(*target, SwitchReason::BelowMargin);
        out.switched = true;
      }
    }
  }

  void handle_tracking_failure(FrameOutcome& out) {
    if (cfg_.lock_camera) {
      enter_tracking_lost();
      return;
    }
    flag(active_);
    auto target = pick_switch_target(out.keyframe_id);
    if (target) {
      do_switch(*target, SwitchReason::Flagged);
      out.switched = true;
    } else {
      enter_tracking_lost();
    }
  }

  FrameOutcome local_relocalize(const std::string& camera, const std::vector<Observation>& obs) {
    FrameOutcome out;
    out.processed = true;
    const RigCamera* cam = map_.camera(camera);
    if (!cam || !has_estimate_) return out;
    auto candidates = map_.keyframes_within(estimate_.t, cfg_.local_reloc_radius);
    int attempt = 0;
    for (const Keyframe* kf : candidates) {
      if (kf->camera != camera) continue;
      auto res = verify_candidate(*kf, *cam, obs, attempt++);
      if (!res) continue;
      // a verified pose that contradicts dead reckoning by more than the
      // search radius is a different place that happens to look alike
      if ((res->first.T_MB.t - estimate_.t).norm() > cfg_.local_reloc_radius) continue;
      adopt(res->first, camera, RepeatEvent::Kind::Relocalized);
      out.success = true;
      out.neg_entropy = res->first.neg_entropy;
      out.matches = res->first.num_matches;
      out.inliers = res->first.num_inliers;
      out.keyframe_id = kf->id;
      return out;
    }
    return out;
  }

  FrameOutcome global_relocalize(const std::string& camera, const std::vector<Observation>& obs) {
    FrameOutcome out;
    out.processed = true;
    const RigCamera* cam = map_.camera(camera);
    if (!cam || obs.empty()) return out;

    std::vector<std::pair<double, const Keyframe*>> scored;
    for (const auto& kf : map_.keyframes) {
      if (kf.camera != camera) continue;
      double overlap = signature_overlap(kf, obs);
      if (overlap >= cfg_.min_signature_overlap) scored.emplace_back(overlap, &kf);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second->id < b.second->id;
    });
    if (scored.size() > static_cast<size_t>(cfg_.reloc_top_k))
      scored.resize(cfg_.reloc_top_k);

    int attempt = 0;
    std::optional<std::pair<LocalizationResult, int>> best;
    uint64_t best_kf = 0;
    for (const auto& [overlap, kf] : scored) {
      auto res = verify_candidate(*kf, *cam, obs, attempt++);
      if (!res) continue;
      if (!best || res->second > best->second) {
        best = res;
        best_kf = kf->id;
      }
    }
    if (!best) return out;
    adopt(best->first, camera, RepeatEvent::Kind::Relocalized);
    out.success = true;
    out.neg_entropy = best->first.neg_entropy;
    out.matches = best->first.num_matches;
    out.inliers = best->first.num_inliers;
    out.keyframe_id = best_kf;
    return out;
  }

  // Id-only matching, hypothesis fit, then full refinement; returns the
  // refined result and the consensus size that backed it.
  std::optional<std::pair<LocalizationResult, int>> verify_candidate(
      const Keyframe& kf, const RigCamera& cam, const std::vector<Observation>& obs,
      int attempt) {
    auto matches = match(obs, kf.landmarks, compose(kf.T_MB, cam.T_BC), cam.model, 0.0);
    if (static_cast<int>(matches.size()) < cfg_.localizer.min_matches) return std::nullopt;
    auto rr = ransac_align(matches, cam.model, cfg_.localizer,
                           mix_seed(seed_, mix_seed(tick_, static_cast<uint64_t>(attempt))),
                           cam.T_BC.child);
    if (!rr.success) return std::nullopt;
    Pose T_MB0 = compose(rr.T_MC, cam.T_BC.inverse());
    auto res = refine(matches, T_MB0, cam.T_BC, cam.model, cfg_.localizer);
    if (!res.success) return std::nullopt;
    return std::make_pair(res, static_cast<int>(rr.inliers.size()));
  }

  void adopt(const LocalizationResult& res, const std::string& camera, RepeatEvent::Kind kind) {
    estimate_ = res.T_MB;
    has_estimate_ = true;
    ticks_since_fix_ = 0;
    last_neg_entropy_ = res.neg_entropy;
    if (active_ != camera && !cfg_.lock_camera) active_ = camera;
    RepeatEvent ev;
    ev.kind = kind;
    ev.tick = tick_;
    ev.camera = camera;
    events_.push_back(ev);
    set_state(RepeatState::Localized);
  }

  std::optional<std::string> pick_switch_target(uint64_t kf_id) const {
    const std::string* best = nullptr;
    double best_mean = 0.0;
    const std::string* fallback = nullptr;
    for (const auto& cam : map_.rig) {
      if (cam.tag == active_ || flagged(cam.tag)) continue;
      if (!fallback) fallback = &cam.tag;
      const CpmEntry* e = map_.cpm ? map_.cpm->entry(kf_id, cam.tag) : nullptr;
      if (e && (!best || e->mean > best_mean ||
                (e->mean == best_mean && cam.tag < *best))) {
        best = &cam.tag;
        best_mean = e->mean;
      }
    }
    if (best) return *best;
    if (fallback) return *fallback;
    return std::nullopt;
  }

  void do_switch(const std::string& to, SwitchReason reason) {
    RepeatEvent ev;
    ev.kind = RepeatEvent::Kind::Switch;
    ev.tick = tick_;
    ev.from_camera = active_;
    ev.to_camera = to;
    ev.reason = reason;
    events_.push_back(ev);
    active_ = to;
  }

  void flag(const std::string& camera) {
    flags_[camera] = tick_ + cooldown_ticks_;
    RepeatEvent ev;
    ev.kind = RepeatEvent::Kind::Flag;
    ev.tick = tick_;
    ev.camera = camera;
    events_.push_back(ev);
  }

  void enter_tracking_lost() {
    if (state_ == RepeatState::TrackingLost) return;
    tracking_entry_tick_ = tick_;
    set_state(RepeatState::TrackingLost);
  }

  void declare_lost() {
    has_estimate_ = false;
    ticks_since_fix_ = 0;
    set_state(RepeatState::Lost);
  }

  void set_state(RepeatState next) {
    if (next == state_) return;
    RepeatEvent ev;
    ev.kind = RepeatEvent::Kind::StateChange;
    ev.tick = tick_;
    ev.from_state = state_;
    ev.to_state = next;
    events_.push_back(ev);
    state_ = next;
  }

  const Map& map_;
  RepeatConfig cfg_;
  uint64_t seed_;
  uint64_t cooldown_ticks_ = 0;
  uint64_t timeout_ticks_ = 0;

  RepeatState state_ = RepeatState::Lost;
  std::string active_;
  Pose estimate_ = Pose::identity("M", "B");
  bool has_estimate_ = false;
  uint64_t tick_ = 0;
  uint64_t ticks_since_fix_ = 0;
  uint64_t tracking_entry_tick_ = 0;
  double last_neg_entropy_ = 0.0;
  std::map<std::string, uint64_t> flags_;  // tag -> tick the flag expires
  std::vector<RepeatEvent> events_;
};

}  // namespace vtr
