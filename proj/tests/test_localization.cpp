#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "oracles.hpp"
#include "vtr/localization.hpp"
#include "vtr/rng.hpp"

using namespace vtr;

namespace {

struct Scene {
  StereoCamera cam;
  Pose T_BC = camera_mount("front", Vec3(0.2, 0.0, 0.1), 0.0, 0.2);
  Pose T_MB = Pose::identity("M", "B");
  std::vector<Match> matches;
};

// Landmarks sprinkled in front of the camera, observed exactly from T_MB.
Scene make_scene(Rng& rng, int n_points, double pixel_noise = 0.0) {
  Scene s;
  s.T_MB = planar_pose("M", "B", rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.5, 0.5));
  Pose T_MC = compose(s.T_MB, s.T_BC);
  Pose T_CM = T_MC.inverse();
  uint64_t id = 1;
  while (static_cast<int>(s.matches.size()) < n_points) {
    Vec3 p_C(rng.uniform(-1.5, 1.5), rng.uniform(-1.0, 1.0), rng.uniform(1.0, 8.0));
    auto px = s.cam.project(p_C);
    if (!px) continue;
    Match m;
    m.id = id++;
    m.p_M = T_MC * p_C;
    m.measured = *px;
    if (pixel_noise > 0.0)
      m.measured += pixel_noise * StereoPixel(rng.gaussian(), rng.gaussian(), rng.gaussian());
    s.matches.push_back(m);
  }
  return s;
}

}  // namespace

TEST_CASE("negative entropy of identity and scaled identity", "[localization]") {
  REQUIRE(negative_entropy(Mat6::Identity()) == 0.0);
  for (double scale : {0.5, 2.0, 10.0, 1e-4, 1e4}) {
    double expected = -6.0 * std::log(scale);
    REQUIRE(std::abs(negative_entropy(scale * Mat6::Identity()) - expected) < 1e-9);
  }
  Mat6 indefinite = Mat6::Identity();
  indefinite(3, 3) = -1.0;
  REQUIRE_THROWS_AS(negative_entropy(indefinite), NotSpdError);
}

TEST_CASE("matching pairs by id and gates on predicted pixels", "[localization]") {
  Rng rng(31);
  Scene s = make_scene(rng, 40);
  std::vector<MapLandmark> map_points;
  for (const auto& m : s.matches) map_points.push_back({m.id, m.p_M});
  std::vector<Observation> obs;
  for (const auto& m : s.matches) obs.push_back({m.id, m.measured});

  Pose T_MC = compose(s.T_MB, s.T_BC);
  auto exact = match(obs, map_points, T_MC, s.cam, 20.0);
  REQUIRE(exact.size() == obs.size());

  // unknown ids never match
  std::vector<Observation> strangers = obs;
  for (auto& o : strangers) o.landmark_id += 100000;
  REQUIRE(match(strangers, map_points, T_MC, s.cam, 20.0).empty());

  // an offset prediction pushes predicted pixels out of the gate
  Pose far = T_MC;
  far.t += Vec3(0.0, 2.0, 0.0);
  auto gated = match(obs, map_points, far, s.cam, 20.0);
  REQUIRE(gated.size() < exact.size());

  // gate disabled: everything with a known id matches again
  REQUIRE(match(obs, map_points, far, s.cam, 0.0).size() == obs.size());
}

TEST_CASE("reprojection jacobian matches central differences", "[localization]") {
  Rng rng(32);
  int configs = 0;
  while (configs < 1000) {
    Scene s = make_scene(rng, 1);
    const Match& m = s.matches[0];
    auto rj = reprojection_residual(m, s.T_MB, s.T_BC, s.cam, 0.5);
    REQUIRE(rj.has_value());

    auto f = [&](const oracle::Vec6& d) -> Eigen::VectorXd {
      Pose T = apply_increment(s.T_MB, d);
      auto r = reprojection_residual(m, T, s.T_BC, s.cam, 0.5);
      REQUIRE(r.has_value());
      return r->r;
    };
    Eigen::MatrixXd J_fd = oracle::fd_jacobian(f, 3);
    double scale = std::max(1.0, J_fd.norm());
    REQUIRE((J_fd - rj->J).norm() / scale < 1e-5);
    ++configs;
  }
}

TEST_CASE("prior jacobian matches central differences", "[localization]") {
  Rng rng(33);
  for (int i = 0; i < 200; ++i) {
    Pose T = planar_pose("M", "B", rng.gaussian(), rng.gaussian(), rng.uniform(-2, 2));
    Pose prior = planar_pose("M", "B", T.t.x() + rng.gaussian(0, 0.3),
                             T.t.y() + rng.gaussian(0, 0.3), yaw_of(T) + rng.gaussian(0, 0.2));
    auto [r0, J] = prior_residual(T, prior);

    auto f = [&](const oracle::Vec6& d) -> Eigen::VectorXd {
      return prior_residual(apply_increment(T, d), prior).first;
    };
    Eigen::MatrixXd J_fd = oracle::fd_jacobian(f, 6);
    double scale = std::max(1.0, J_fd.norm());
    REQUIRE((J_fd - J).norm() / scale < 1e-5);
  }
}

TEST_CASE("noise-free refinement recovers the exact pose", "[localization]") {
  Rng rng(34);
  LocalizerConfig cfg;
  for (int i = 0; i < 50; ++i) {
    Scene s = make_scene(rng, 30);
    Vec6 bump;
    for (int k = 0; k < 3; ++k) bump[k] = rng.gaussian(0, 0.05);
    for (int k = 3; k < 6; ++k) bump[k] = rng.gaussian(0, 0.1);
    Pose init = apply_increment(s.T_MB, bump);

    auto res = refine(s.matches, init, s.T_BC, s.cam, cfg);
    REQUIRE(res.success);
    REQUIRE(res.converged);
    REQUIRE(translation_distance(res.T_MB, s.T_MB) < 1e-6);
    REQUIRE(rotation_angle_between(res.T_MB, s.T_MB) < 1e-6);
    REQUIRE(res.num_inliers == 30);
    REQUIRE(std::isfinite(res.neg_entropy));
  }
}

TEST_CASE("duplicating every observation doubles the information", "[localization]") {
  Rng rng(35);
  LocalizerConfig cfg;
  Scene s = make_scene(rng, 40, 0.3);
  auto res1 = refine(s.matches, s.T_MB, s.T_BC, s.cam, cfg);
  REQUIRE(res1.success);

  std::vector<Match> doubled = s.matches;
  doubled.insert(doubled.end(), s.matches.begin(), s.matches.end());
  auto res2 = refine(doubled, s.T_MB, s.T_BC, s.cam, cfg);
  REQUIRE(res2.success);
  REQUIRE(std::abs(res2.neg_entropy - res1.neg_entropy - 6.0 * std::log(2.0)) < 1e-6);
}

TEST_CASE("covariance equals the inverse finite-difference hessian", "[localization]") {
  Rng rng(36);
  LocalizerConfig cfg;
  for (int i = 0; i < 10; ++i) {
    Scene s = make_scene(rng, 25);
    auto res = refine(s.matches, s.T_MB, s.T_BC, s.cam, cfg);
    REQUIRE(res.success);

    auto cost = [&](const oracle::Vec6& d) {
      Pose T = apply_increment(res.T_MB, d);
      double c = 0.0;
      for (const auto& m : s.matches) {
        auto rj = reprojection_residual(m, T, s.T_BC, s.cam, cfg.pixel_std);
        c += 0.5 * rj->r.squaredNorm();
      }
      return c;
    };
    Eigen::MatrixXd H_fd = oracle::fd_hessian(cost, 1e-5);
    Eigen::MatrixXd cov_fd = H_fd.inverse();
    double rel = (cov_fd - res.covariance).norm() / cov_fd.norm();
    REQUIRE(rel < 1e-3);
  }
}

TEST_CASE("huber keeps wild outliers from dragging the solution", "[localization]") {
  Rng rng(37);
  LocalizerConfig cfg;
  Scene s = make_scene(rng, 50, 0.2);
  auto clean = refine(s.matches, s.T_MB, s.T_BC, s.cam, cfg);
  REQUIRE(clean.success);

  Scene dirty = s;
  for (size_t i = 0; i < dirty.matches.size(); i += 5)
    dirty.matches[i].measured += StereoPixel(rng.uniform(40, 120), rng.uniform(40, 120), rng.uniform(40, 120));
  auto robust = refine(dirty.matches, s.T_MB, s.T_BC, s.cam, cfg);
  REQUIRE(robust.success);
  REQUIRE(translation_distance(robust.T_MB, clean.T_MB) < 0.02);
  REQUIRE(robust.num_inliers < clean.num_inliers);
}

TEST_CASE("too few matches is a clean failure", "[localization]") {
  Rng rng(38);
  LocalizerConfig cfg;
  Scene s = make_scene(rng, 4);
  auto res = refine(s.matches, s.T_MB, s.T_BC, s.cam, cfg);
  REQUIRE_FALSE(res.success);
  REQUIRE(res.num_matches == 4);
}

TEST_CASE("a strong prior with wrong orientation rejects the fix", "[localization]") {
  Rng rng(39);
  LocalizerConfig cfg;
  Scene s = make_scene(rng, 30);
  PosePrior prior;
  prior.T_MB = s.T_MB;
  prior.T_MB.q = Eigen::Quaterniond(
      Eigen::AngleAxisd(45.0 * M_PI / 180.0, Vec3::UnitZ())) * prior.T_MB.q;
  prior.information = Mat6::Identity() * 1e-6;  // weak pull, pure sanity gate
  auto res = refine(s.matches, prior.T_MB, s.T_BC, s.cam, cfg, prior);
  // geometry wins the optimization, so the result disagrees with the prior
  // orientation by ~45 degrees and must be rejected
  REQUIRE_FALSE(res.success);
  REQUIRE(res.converged);
}

TEST_CASE("ransac recovers the pose under heavy outliers", "[localization]") {
  Rng rng(40);
  LocalizerConfig cfg;
  for (int trial = 0; trial < 20; ++trial) {
    Scene s = make_scene(rng, 60, 0.2);
    // corrupt 40% of the associations with other map points
    std::vector<Match> corrupted = s.matches;
    for (size_t i = 0; i < corrupted.size(); ++i)
      if (i % 5 < 2) corrupted[i].p_M = s.matches[(i + 17) % corrupted.size()].p_M + Vec3(1, 1, 0);
    auto rr = ransac_align(corrupted, s.cam, cfg, 1000 + trial, "C_front");
    REQUIRE(rr.success);
    // the raw alignment leans on triangulated depth, so only expect decimetre
    // accuracy; refinement on the inlier set recovers the rest
    Pose T_MB = compose(rr.T_MC, s.T_BC.inverse());
    REQUIRE(translation_distance(T_MB, s.T_MB) < 0.15);
    REQUIRE(rr.inliers.size() >= 25);
    std::vector<Match> kept;
    for (int idx : rr.inliers) kept.push_back(corrupted[idx]);
    auto polished = refine(kept, T_MB, s.T_BC, s.cam, cfg);
    REQUIRE(polished.success);
    REQUIRE(translation_distance(polished.T_MB, s.T_MB) < 0.02);
  }
}

TEST_CASE("ransac reports no consensus on garbage", "[localization]") {
  Rng rng(41);
  LocalizerConfig cfg;
  Scene s = make_scene(rng, 40);
  std::vector<Match> garbage = s.matches;
  for (auto& m : garbage) m.p_M = Vec3(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(0, 5));
  auto rr = ransac_align(garbage, s.cam, cfg, 7, "C_front");
  REQUIRE_FALSE(rr.success);

  REQUIRE_FALSE(ransac_align({}, s.cam, cfg, 7, "C_front").success);
}

TEST_CASE("ransac inliers beat the configured floor and fraction", "[localization]") {
  Rng rng(42);
  LocalizerConfig cfg;
  Scene s = make_scene(rng, 30, 0.2);
  // all-but-six corrupted: best consensus possible is 6 < 30% of 30
  std::vector<Match> mostly_bad = s.matches;
  for (size_t i = 6; i < mostly_bad.size(); ++i)
    mostly_bad[i].p_M += Vec3(rng.uniform(1, 3), rng.uniform(1, 3), 0);
  auto rr = ransac_align(mostly_bad, s.cam, cfg, 11, "C_front");
  REQUIRE_FALSE(rr.success);
}
