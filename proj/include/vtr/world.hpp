#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "vtr/camera.hpp"
#include "vtr/errors.hpp"
#include "vtr/geometry.hpp"
#include "vtr/rng.hpp"

namespace vtr {

struct Landmark {
  uint64_t id = 0;
  Vec3 p_W = Vec3::Zero();
};

// Axis-aligned box seeded with uniformly distributed landmarks.  Worlds are
// unions of blocks, which is enough to lay out corridors, walls and density
// ramps.
struct LandmarkBlock {
  int count = 0;
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
};

class World {
 public:
  World() = default;

  static World generate(const std::vector<LandmarkBlock>& blocks, uint64_t seed) {
    World w;
    Rng rng(mix_seed(seed, 0x776f726c64ull));  // world-gen stream
    uint64_t next_id = 1;
    for (const auto& block : blocks) {
      for (int i = 0; i < block.count; ++i) {
        Landmark lm;
        lm.id = next_id++;
        for (int axis = 0; axis < 3; ++axis)
          lm.p_W[axis] = rng.uniform(block.lo[axis], block.hi[axis]);
        w.landmarks_.push_back(lm);
      }
    }
    if (w.landmarks_.empty()) throw EmptyWorldError("world has no landmarks");
    w.build_nearest_table();
    return w;
  }

  const std::vector<Landmark>& landmarks() const { return landmarks_; }

  // Id of the closest other landmark; used to fake data-association mistakes.
  uint64_t nearest_other(uint64_t id) const {
    return nearest_other_.at(id - 1);
  }

 private:
  void build_nearest_table() {
    nearest_other_.assign(landmarks_.size(), 0);
    for (size_t i = 0; i < landmarks_.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      uint64_t best_id = landmarks_[i].id;
      for (size_t j = 0; j < landmarks_.size(); ++j) {
        if (i == j) continue;
        double d2 = (landmarks_[i].p_W - landmarks_[j].p_W).squaredNorm();
        if (d2 < best) {
          best = d2;
          best_id = landmarks_[j].id;
        }
      }
      nearest_other_[i] = best_id;
    }
  }

  std::vector<Landmark> landmarks_;
  std::vector<uint64_t> nearest_other_;  // indexed by id-1; ids are dense from 1
};

// One stereo feature measurement tagged with the landmark the simulator says
// it is (which, under confusion, can be a lie).
struct Observation {
  uint64_t landmark_id = 0;
  StereoPixel pixel = StereoPixel::Zero();
};

struct SensorNoise {
  double pixel_std = 0.5;      // px, iid on uL, vL, uR
  double drop_prob = 0.0;      // per-landmark dropout (occlusion)
  double confusion_rate = 0.0; // probability a measurement carries a wrong id
};

// Renders the world into one stereo frame at the true camera pose.  Every
// landmark draws from its own substream keyed on (seed, tick, id), so the
// result does not depend on container order and stays reproducible when
// other cameras are added or removed.
inline std::vector<Observation> observe(const World& world, const StereoCamera& cam,
                                        const Pose& T_WC, uint64_t tick, uint64_t stream_seed,
                                        const SensorNoise& noise) {
  Pose T_CW = T_WC.inverse();
  std::vector<Observation> out;
  for (const auto& lm : world.landmarks()) {
    Vec3 p_C = T_CW * lm.p_W;
    auto px = cam.project(p_C);
    if (!px) continue;
    Rng rng(mix_seed(stream_seed, mix_seed(tick, lm.id)));
    if (noise.drop_prob > 0.0 && rng.uniform() < noise.drop_prob) continue;
    Observation obs;
    obs.landmark_id = lm.id;
    if (noise.confusion_rate > 0.0 && rng.uniform() < noise.confusion_rate)
      obs.landmark_id = world.nearest_other(lm.id);
    obs.pixel = *px + noise.pixel_std * StereoPixel(rng.gaussian(), rng.gaussian(), rng.gaussian());
    out.push_back(obs);
  }
  return out;
}

}  // namespace vtr
