#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "vtr/camera.hpp"
#include "vtr/cpm.hpp"
#include "vtr/errors.hpp"
#include "vtr/geometry.hpp"
#include "vtr/localization.hpp"
#include "vtr/world.hpp"

namespace vtr {

constexpr int kMapFormatVersion = 1;

struct Keyframe {
  uint64_t id = 0;
  std::string camera;
  Pose T_MB;
  std::vector<MapLandmark> landmarks;  // map frame

  std::unordered_set<uint64_t> signature() const {
    std::unordered_set<uint64_t> s;
    s.reserve(landmarks.size());
    for (const auto& lm : landmarks) s.insert(lm.id);
    return s;
  }
};

// Jaccard overlap between a keyframe's landmark ids and the ids seen in one
// frame; the place-recognition score for relocalization.
inline double signature_overlap(const Keyframe& kf, const std::vector<Observation>& obs) {
  auto sig = kf.signature();
  if (sig.empty() && obs.empty()) return 0.0;
  std::unordered_set<uint64_t> seen;
  seen.reserve(obs.size());
  for (const auto& o : obs) seen.insert(o.landmark_id);
  size_t inter = 0;
  for (uint64_t id : seen)
    if (sig.count(id)) ++inter;
  size_t uni = sig.size() + seen.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct Map {
  std::vector<RigCamera> rig;
  std::vector<Pose> route;  // teach backbone, ordered, map frame
  std::vector<Keyframe> keyframes;
  std::vector<CpmSample> samples;
  std::optional<Cpm> cpm;

  const RigCamera* camera(const std::string& tag) const {
    for (const auto& c : rig)
      if (c.tag == tag) return &c;
    return nullptr;
  }

  const Keyframe* keyframe_by_id(uint64_t id) const {
    for (const auto& kf : keyframes)
      if (kf.id == id) return &kf;
    return nullptr;
  }

  // Closest keyframe of one camera; when an orientation reference is given,
  // keyframes facing more than `max_angle` away are skipped (with a fallback
  // to plain nearest so the caller always gets something if the tag exists).
  const Keyframe* nearest_keyframe(const Vec3& p, const std::string& tag,
                                   const Pose* orientation_ref = nullptr,
                                   double max_angle = 0.0) const {
    const Keyframe* best = nullptr;
    const Keyframe* best_any = nullptr;
    double best_d = 0.0, best_any_d = 0.0;
    for (const auto& kf : keyframes) {
      if (kf.camera != tag) continue;
      double d = (kf.T_MB.t - p).norm();
      if (!best_any || d < best_any_d) {
        best_any = &kf;
        best_any_d = d;
      }
      if (orientation_ref && rotation_angle_between(kf.T_MB, *orientation_ref) > max_angle)
        continue;
      if (!best || d < best_d) {
        best = &kf;
        best_d = d;
      }
    }
    return best ? best : best_any;
  }

  // All keyframes (any camera) within `radius` of p, nearest first.
  std::vector<const Keyframe*> keyframes_within(const Vec3& p, double radius) const {
    std::vector<std::pair<double, const Keyframe*>> hits;
    for (const auto& kf : keyframes) {
      double d = (kf.T_MB.t - p).norm();
      if (d <= radius) hits.emplace_back(d, &kf);
    }
    std::sort(hits.begin(), hits.end(),
              [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first < b.first : a.second->id < b.second->id;
              });
    std::vector<const Keyframe*> out;
    out.reserve(hits.size());
    for (const auto& [d, kf] : hits) out.push_back(kf);
    return out;
  }

  std::vector<std::pair<uint64_t, Vec3>> keyframe_positions() const {
    std::vector<std::pair<uint64_t, Vec3>> out;
    out.reserve(keyframes.size());
    for (const auto& kf : keyframes) out.emplace_back(kf.id, kf.T_MB.t);
    return out;
  }
};

// ---- JSON (pose = [qw qx qy qz tx ty tz] in every file this tool writes) ----

inline nlohmann::json pose_to_json(const Pose& p) {
  return nlohmann::json::array(
      {p.q.w(), p.q.x(), p.q.y(), p.q.z(), p.t.x(), p.t.y(), p.t.z()});
}

inline Pose pose_from_json(const nlohmann::json& j, const std::string& parent,
                           const std::string& child) {
  if (!j.is_array() || j.size() != 7) throw MapFormatError("pose must be a 7-element array");
  Pose p;
  p.q = Eigen::Quaterniond(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                           j[3].get<double>());
  // keep the stored coefficients verbatim so a reload/save cycle is byte-stable;
  // renormalizing here would perturb the last bits
  if (std::abs(p.q.norm() - 1.0) > 1e-6)
    throw MapFormatError("pose quaternion is not normalized");
  p.t = Vec3(j[4].get<double>(), j[5].get<double>(), j[6].get<double>());
  p.parent = parent;
  p.child = child;
  return p;
}

inline nlohmann::json map_to_json(const Map& map) {
  nlohmann::json j;
  j["format"] = "vtr-map";
  j["version"] = kMapFormatVersion;
  j["rig"] = nlohmann::json::array();
  for (const auto& c : map.rig) {
    nlohmann::json cj;
    cj["tag"] = c.tag;
    cj["fx"] = c.model.fx;
    cj["fy"] = c.model.fy;
    cj["cx"] = c.model.cx;
    cj["cy"] = c.model.cy;
    cj["baseline"] = c.model.baseline;
    cj["width"] = c.model.width;
    cj["height"] = c.model.height;
    cj["min_depth"] = c.model.min_depth;
    cj["period"] = c.period;
    cj["offset"] = c.offset;
    cj["T_BC"] = pose_to_json(c.T_BC);
    j["rig"].push_back(cj);
  }
  j["route"] = nlohmann::json::array();
  for (const auto& p : map.route) j["route"].push_back(pose_to_json(p));
  j["keyframes"] = nlohmann::json::array();
  for (const auto& kf : map.keyframes) {
    nlohmann::json kj;
    kj["id"] = kf.id;
    kj["camera"] = kf.camera;
    kj["T_MB"] = pose_to_json(kf.T_MB);
    kj["landmarks"] = nlohmann::json::array();
    for (const auto& lm : kf.landmarks)
      kj["landmarks"].push_back({{"id", lm.id}, {"p", {lm.p_M.x(), lm.p_M.y(), lm.p_M.z()}}});
    j["keyframes"].push_back(kj);
  }
  j["samples"] = nlohmann::json::array();
  for (const auto& s : map.samples)
    j["samples"].push_back(
        {{"camera", s.camera}, {"p", {s.p_M.x(), s.p_M.y(), s.p_M.z()}}, {"E", s.neg_entropy}});
  if (map.cpm) {
    nlohmann::json cj;
    cj["d_max"] = map.cpm->params.d_max;
    cj["length_scale"] = map.cpm->params.length_scale;
    cj["k_sigma"] = map.cpm->params.k_sigma;
    cj["entries"] = nlohmann::json::array();
    for (const auto& [kf_id, row] : map.cpm->table)
      for (const auto& [tag, e] : row)
        cj["entries"].push_back({{"keyframe", kf_id},
                                 {"camera", tag},
                                 {"mean", e.mean},
                                 {"std", e.std_dev},
                                 {"count", e.count}});
    j["cpm"] = cj;
  }
  return j;
}

inline Map map_from_json(const nlohmann::json& j) {
  if (!j.contains("format") || j["format"] != "vtr-map")
    throw MapFormatError("not a vtr-map file");
  if (!j.contains("version") || !j["version"].is_number_integer())
    throw MapFormatError("missing version");
  if (j["version"].get<int>() != kMapFormatVersion)
    throw MapVersionError("unsupported map version " + j["version"].dump());
  Map map;
  try {
    for (const auto& cj : j.at("rig")) {
      RigCamera c;
      c.tag = cj.at("tag").get<std::string>();
      if (!valid_camera_tag(c.tag)) throw MapFormatError("bad camera tag '" + c.tag + "'");
      c.model.fx = cj.at("fx").get<double>();
      c.model.fy = cj.at("fy").get<double>();
      c.model.cx = cj.at("cx").get<double>();
      c.model.cy = cj.at("cy").get<double>();
      c.model.baseline = cj.at("baseline").get<double>();
      c.model.width = cj.at("width").get<int>();
      c.model.height = cj.at("height").get<int>();
      c.model.min_depth = cj.at("min_depth").get<double>();
      c.period = cj.at("period").get<double>();
      c.offset = cj.at("offset").get<double>();
      c.T_BC = pose_from_json(cj.at("T_BC"), "B", "C_" + c.tag);
      map.rig.push_back(c);
    }
    for (const auto& pj : j.at("route")) map.route.push_back(pose_from_json(pj, "M", "B"));
    for (const auto& kj : j.at("keyframes")) {
      Keyframe kf;
      kf.id = kj.at("id").get<uint64_t>();
      kf.camera = kj.at("camera").get<std::string>();
      kf.T_MB = pose_from_json(kj.at("T_MB"), "M", "B");
      for (const auto& lj : kj.at("landmarks")) {
        MapLandmark lm;
        lm.id = lj.at("id").get<uint64_t>();
        lm.p_M = Vec3(lj.at("p")[0].get<double>(), lj.at("p")[1].get<double>(),
                      lj.at("p")[2].get<double>());
        kf.landmarks.push_back(lm);
      }
      map.keyframes.push_back(kf);
    }
    for (const auto& sj : j.at("samples")) {
      CpmSample s;
      s.camera = sj.at("camera").get<std::string>();
      s.p_M = Vec3(sj.at("p")[0].get<double>(), sj.at("p")[1].get<double>(),
                   sj.at("p")[2].get<double>());
      s.neg_entropy = sj.at("E").get<double>();
      map.samples.push_back(s);
    }
    if (j.contains("cpm")) {
      Cpm cpm;
      cpm.params.d_max = j["cpm"].at("d_max").get<double>();
      cpm.params.length_scale = j["cpm"].at("length_scale").get<double>();
      cpm.params.k_sigma = j["cpm"].at("k_sigma").get<double>();
      for (const auto& ej : j["cpm"].at("entries")) {
        CpmEntry e;
        e.mean = ej.at("mean").get<double>();
        e.std_dev = ej.at("std").get<double>();
        e.count = ej.at("count").get<int>();
        cpm.table[ej.at("keyframe").get<uint64_t>()][ej.at("camera").get<std::string>()] = e;
      }
      map.cpm = cpm;
    }
  } catch (const nlohmann::json::exception& e) {
    throw MapFormatError(std::string("malformed map: ") + e.what());
  }
  return map;
}

inline void save_map(const Map& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write map file '" + path + "'");
  out << map_to_json(map).dump() << "\n";
}

inline Map load_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read map file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw MapFormatError(std::string("map is not valid JSON: ") + e.what());
  }
  return map_from_json(j);
}

}  // namespace vtr
