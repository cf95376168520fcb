#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vtr/geometry.hpp"

namespace vtr {

// One teach-time localization outcome: which camera, where along the route,
// and how sharp the pose estimate was (negative differential entropy).
struct CpmSample {
  std::string camera;
  Vec3 p_M = Vec3::Zero();
  double neg_entropy = 0.0;
};

struct CpmParams {
  double d_max = 2.0;         // metres, sample gathering radius per keyframe
  double length_scale = 0.25; // kernel: exp(-d^2 / (2 * length_scale))
  double k_sigma = 2.0;       // switch margin multiplier
};

struct CpmEntry {
  double mean = 0.0;
  double std_dev = 0.0;
  int count = 0;
};

// Performance model: distance-weighted mean/spread of teach-time entropy per
// (keyframe, camera).  Cameras without samples near a keyframe get no entry.
class Cpm {
 public:
  CpmParams params;
  // keyed by keyframe id, then camera tag (ordered, so iteration and
  // serialization are deterministic)
  std::map<uint64_t, std::map<std::string, CpmEntry>> table;

  const CpmEntry* entry(uint64_t keyframe_id, const std::string& camera) const {
    auto kf = table.find(keyframe_id);
    if (kf == table.end()) return nullptr;
    auto cam = kf->second.find(camera);
    if (cam == kf->second.end()) return nullptr;
    return &cam->second;
  }

  // Highest predicted entropy wins; ties resolve to the lexicographically
  // first tag so selection is deterministic.
  std::optional<std::string> best_camera(uint64_t keyframe_id) const {
    auto kf = table.find(keyframe_id);
    if (kf == table.end() || kf->second.empty()) return std::nullopt;
    const std::string* best = nullptr;
    double best_mean = 0.0;
    for (const auto& [tag, entry] : kf->second) {
      if (!best || entry.mean > best_mean) {
        best = &tag;
        best_mean = entry.mean;
      }
    }
    return *best;
  }

  // True when current performance has dropped below the learned envelope for
  // this camera at this keyframe: E_t < mean - k * std.
  bool should_switch(uint64_t keyframe_id, const std::string& camera, double neg_entropy) const {
    const CpmEntry* e = entry(keyframe_id, camera);
    if (!e) return false;
    return neg_entropy < e->mean - params.k_sigma * e->std_dev;
  }
};

inline Cpm learn_cpm(const std::vector<std::pair<uint64_t, Vec3>>& keyframe_positions,
                     const std::vector<CpmSample>& samples, const CpmParams& params) {
  Cpm cpm;
  cpm.params = params;
  for (const auto& [kf_id, p_kf] : keyframe_positions) {
    std::map<std::string, CpmEntry>& row = cpm.table[kf_id];
    std::map<std::string, std::vector<std::pair<double, double>>> grouped;  // tag -> (w, E)
    for (const auto& s : samples) {
      double d = (s.p_M - p_kf).norm();
      if (d > params.d_max) continue;
      double w = std::exp(-d * d / (2.0 * params.length_scale));
      grouped[s.camera].emplace_back(w, s.neg_entropy);
    }
    for (const auto& [tag, wE] : grouped) {
      double w_sum = 0.0, mean = 0.0;
      for (const auto& [w, E] : wE) {
        w_sum += w;
        mean += w * E;
      }
      mean /= w_sum;
      double var = 0.0;
      for (const auto& [w, E] : wE) var += w * (E - mean) * (E - mean);
      var /= w_sum;
      CpmEntry e;
      e.mean = mean;
      e.std_dev = std::sqrt(std::max(0.0, var));
      e.count = static_cast<int>(wE.size());
      row[tag] = e;
    }
    if (row.empty()) cpm.table.erase(kf_id);
  }
  return cpm;
}

}  // namespace vtr
