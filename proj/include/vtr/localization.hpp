#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "vtr/camera.hpp"
#include "vtr/errors.hpp"
#include "vtr/geometry.hpp"
#include "vtr/rng.hpp"
#include "vtr/world.hpp"

namespace vtr {

struct MapLandmark {
  uint64_t id = 0;
  Vec3 p_M = Vec3::Zero();
};

struct Match {
  uint64_t id = 0;
  StereoPixel measured = StereoPixel::Zero();
  Vec3 p_M = Vec3::Zero();
};

struct LocalizerConfig {
  double pixel_std = 0.5;             // px, whitening sigma for all three coords
  double huber_delta = 2.5;           // on the whitened residual norm
  int max_iterations = 20;
  double tolerance = 1e-8;            // step-norm convergence
  int min_matches = 6;
  double gate_px = 20.0;              // (uL, vL) distance from the predicted pixel
  double max_orientation_error = 30.0 * M_PI / 180.0;  // vs. the prior, when given
  int ransac_iterations = 500;
  double ransac_threshold_px = 2.0;
  double ransac_min_inliers = 4;
  double ransac_min_inlier_fraction = 0.3;
};

// -log det(Sigma) via LDLT, summing log-diagonals so moderate dimensions do
// not underflow the determinant.
inline double negative_entropy(const Mat6& covariance) {
  Eigen::LDLT<Mat6> ldlt(covariance);
  if (ldlt.info() != Eigen::Success) throw NotSpdError("covariance LDLT failed");
  double log_det = 0.0;
  for (int i = 0; i < 6; ++i) {
    double d = ldlt.vectorD()[i];
    if (d <= 0.0) throw NotSpdError("covariance is not positive definite");
    log_det += std::log(d);
  }
  return -log_det;
}

// Pairs current observations with map landmarks by id.  With a positive gate
// the pairing also requires the measurement to fall near the landmark's
// predicted (uL, vL); confused associations mostly die here.
inline std::vector<Match> match(const std::vector<Observation>& observations,
                                const std::vector<MapLandmark>& map_points,
                                const Pose& T_MC_predicted, const StereoCamera& cam,
                                double gate_px) {
  std::unordered_map<uint64_t, const MapLandmark*> by_id;
  by_id.reserve(map_points.size());
  for (const auto& mp : map_points) by_id.emplace(mp.id, &mp);

  Pose T_CM = T_MC_predicted.inverse();
  std::vector<Match> out;
  for (const auto& obs : observations) {
    auto it = by_id.find(obs.landmark_id);
    if (it == by_id.end()) continue;
    if (gate_px > 0.0) {
      auto predicted = cam.project(T_CM * it->second->p_M);
      if (!predicted) continue;
      double du = predicted->x() - obs.pixel.x();
      double dv = predicted->y() - obs.pixel.y();
      if (std::sqrt(du * du + dv * dv) > gate_px) continue;
    }
    Match m;
    m.id = obs.landmark_id;
    m.measured = obs.pixel;
    m.p_M = it->second->p_M;
    out.push_back(m);
  }
  return out;
}

struct RansacResult {
  bool success = false;
  Pose T_MC;  // map <- camera
  std::vector<int> inliers;
};

// Hypothesize-and-verify alignment: triangulate the measured stereo pixels
// into current-camera points, fit rigid map<-camera transforms from sampled
// triples, score by stereo reprojection error of the map points.
inline RansacResult ransac_align(const std::vector<Match>& matches, const StereoCamera& cam,
                                 const LocalizerConfig& cfg, uint64_t seed,
                                 const std::string& camera_frame) {
  RansacResult result;
  result.T_MC.parent = "M";
  result.T_MC.child = camera_frame;

  std::vector<int> usable;
  std::vector<Vec3> p_C(matches.size());
  for (size_t i = 0; i < matches.size(); ++i) {
    if (matches[i].measured.x() - matches[i].measured.z() <= 0.0) continue;
    p_C[i] = cam.triangulate(matches[i].measured);
    usable.push_back(static_cast<int>(i));
  }
  if (usable.size() < 3) return result;

  int required = std::max<int>(static_cast<int>(cfg.ransac_min_inliers),
                               static_cast<int>(std::ceil(cfg.ransac_min_inlier_fraction *
                                                          static_cast<double>(matches.size()))));

  auto score = [&](const Pose& T_MC, double threshold_px, std::vector<int>* inliers) {
    Pose T_CM = T_MC.inverse();
    int count = 0;
    for (int idx : usable) {
      auto reproj = cam.project(T_CM * matches[idx].p_M);
      if (!reproj) continue;
      if ((*reproj - matches[idx].measured).norm() < threshold_px) {
        ++count;
        if (inliers) inliers->push_back(idx);
      }
    }
    return count;
  };

  auto fit = [&](const std::vector<int>& idx) -> std::optional<Pose> {
    // stereo depth noise grows ~z^2, so weight the rigid fit by inverse
    // variance: near points anchor the alignment, far ones contribute little
    double wsum = 0.0;
    Vec3 mu_src = Vec3::Zero(), mu_dst = Vec3::Zero();
    std::vector<double> w(idx.size());
    for (size_t k = 0; k < idx.size(); ++k) {
      double z = std::max(p_C[idx[k]].z(), 0.5);
      w[k] = 1.0 / (z * z * z * z);
      wsum += w[k];
      mu_src += w[k] * p_C[idx[k]];
      mu_dst += w[k] * matches[idx[k]].p_M;
    }
    if (wsum <= 0.0) return std::nullopt;
    mu_src /= wsum;
    mu_dst /= wsum;
    Mat3 C = Mat3::Zero();
    for (size_t k = 0; k < idx.size(); ++k)
      C += w[k] * (matches[idx[k]].p_M - mu_dst) * (p_C[idx[k]] - mu_src).transpose();
    Eigen::JacobiSVD<Mat3> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 R = svd.matrixU() * svd.matrixV().transpose();
    if (R.determinant() < 0.0) {
      Mat3 flip = Mat3::Identity();
      flip(2, 2) = -1.0;
      R = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    Pose pose = result.T_MC;
    pose.q = Eigen::Quaterniond(R);
    pose.q.normalize();
    pose.t = mu_dst - R * mu_src;
    if (!pose.t.allFinite()) return std::nullopt;
    return pose;
  };

  Rng rng(seed);
  int best_count = 0;
  Pose best_pose = result.T_MC;
  std::vector<int> best_inliers;
  // Raw triples fit to triangulated points are loose, so each hypothesis gets
  // an annealed local refit: collect inliers under a widening-then-tightening
  // gate and refit the pose on them.  Bad associations sit far outside even
  // the widest gate, so annealing only pulls in genuine matches.
  const double anneal[] = {6.0, 3.0, 1.5};
  for (int it = 0; it < cfg.ransac_iterations; ++it) {
    int a = static_cast<int>(rng.uniform_index(usable.size()));
    int b = static_cast<int>(rng.uniform_index(usable.size()));
    int c = static_cast<int>(rng.uniform_index(usable.size()));
    if (a == b || b == c || a == c) continue;
    auto hypothesis = fit({usable[a], usable[b], usable[c]});
    if (!hypothesis) continue;
    Pose pose = *hypothesis;
    for (double mult : anneal) {
      std::vector<int> gated;
      if (score(pose, cfg.ransac_threshold_px * mult, &gated) < 3) break;
      auto refit = fit(gated);
      if (!refit) break;
      pose = *refit;
    }
    std::vector<int> inliers;
    int count = score(pose, cfg.ransac_threshold_px, &inliers);
    // polish at the final gate while the consensus keeps growing
    for (int round = 0; round < 4 && inliers.size() >= 3; ++round) {
      auto refit = fit(inliers);
      if (!refit) break;
      std::vector<int> grown;
      int n = score(*refit, cfg.ransac_threshold_px, &grown);
      if (n <= count) break;
      count = n;
      pose = *refit;
      inliers = std::move(grown);
    }
    if (count <= best_count) continue;
    best_count = count;
    best_pose = pose;
    best_inliers = std::move(inliers);
  }
  if (best_count < required) return result;
  result.success = true;
  result.T_MC = best_pose;
  result.inliers = best_inliers;
  return result;
}

struct PosePrior {
  Pose T_MB;
  Mat6 information = Mat6::Zero();  // on [rotation; translation] of T * prior^-1
};

struct LocalizationResult {
  bool success = false;
  bool converged = false;
  Pose T_MB;
  Mat6 covariance = Mat6::Zero();
  double neg_entropy = 0.0;
  int num_matches = 0;
  int num_inliers = 0;
  int iterations = 0;
  double final_cost = 0.0;
};

// Whitened stereo reprojection residual of one match and its Jacobian with
// respect to a left-multiplicative increment on T_MB.  Empty when the map
// point sits in front of the minimum depth of the predicted camera.
struct ResidualJacobian {
  Vec3 r = Vec3::Zero();
  Eigen::Matrix<double, 3, 6> J = Eigen::Matrix<double, 3, 6>::Zero();
};

inline std::optional<ResidualJacobian> reprojection_residual(const Match& m, const Pose& T_MB,
                                                             const Pose& T_BC,
                                                             const StereoCamera& cam,
                                                             double sigma_px) {
  Pose T_CM = compose(T_MB, T_BC).inverse();
  Vec3 p_C = T_CM * m.p_M;
  if (p_C.z() < cam.min_depth) return std::nullopt;
  double inv_sigma = 1.0 / sigma_px;

  Vec3 predicted(cam.fx * p_C.x() / p_C.z() + cam.cx, cam.fy * p_C.y() / p_C.z() + cam.cy,
                 cam.fx * (p_C.x() - cam.baseline) / p_C.z() + cam.cx);
  ResidualJacobian out;
  out.r = (m.measured - predicted) * inv_sigma;

  double z = p_C.z(), z2 = z * z;
  Eigen::Matrix<double, 3, 3> dh;  // d(uL, vL, uR) / d p_C
  dh << cam.fx / z, 0.0, -cam.fx * p_C.x() / z2,
        0.0, cam.fy / z, -cam.fy * p_C.y() / z2,
        cam.fx / z, 0.0, -cam.fx * (p_C.x() - cam.baseline) / z2;
  Eigen::Matrix<double, 3, 6> dp;  // d p_C / d [w; v]
  Mat3 R_CM = T_CM.rotation();
  dp.leftCols<3>() = R_CM * skew(m.p_M);
  dp.rightCols<3>() = -R_CM;
  out.J = -inv_sigma * (dh * dp);
  return out;
}

// Residual of T_MB against a prior pose, [rotation; translation] of
// T_MB * prior^-1, with the Jacobian for the same left increment.
inline std::pair<Vec6, Mat6> prior_residual(const Pose& T_MB, const Pose& T_prior) {
  Pose delta = compose(T_MB, T_prior.inverse());
  Vec3 phi = log_so3(delta.rotation());
  Vec6 r;
  r.head<3>() = phi;
  r.tail<3>() = delta.t;
  Mat6 J = Mat6::Zero();
  J.topLeftCorner<3, 3>() = left_jacobian_inv_so3(phi);
  J.bottomLeftCorner<3, 3>() = -skew(delta.t);
  J.bottomRightCorner<3, 3>() = Mat3::Identity();
  return {r, J};
}

namespace detail {

struct Linearization {
  Mat6 H = Mat6::Zero();
  Vec6 g = Vec6::Zero();  // gradient of the cost
  double cost = 0.0;
  int huber_inliers = 0;
};

inline Linearization linearize(const std::vector<Match>& matches, const Pose& T_MB,
                               const Pose& T_BC, const StereoCamera& cam, double sigma_px,
                               double huber_delta, const std::optional<PosePrior>& prior) {
  Linearization lin;
  for (const auto& m : matches) {
    auto rj = reprojection_residual(m, T_MB, T_BC, cam, sigma_px);
    if (!rj) continue;
    double norm = rj->r.norm();
    double weight = 1.0;
    if (norm <= huber_delta) {
      lin.cost += 0.5 * norm * norm;
      ++lin.huber_inliers;
    } else {
      lin.cost += 0.5 * (2.0 * huber_delta * norm - huber_delta * huber_delta);
      weight = huber_delta / norm;
    }
    lin.H += weight * rj->J.transpose() * rj->J;
    lin.g += weight * rj->J.transpose() * rj->r;
  }

  if (prior) {
    auto [r, J] = prior_residual(T_MB, prior->T_MB);
    lin.cost += 0.5 * r.dot(prior->information * r);
    lin.H += J.transpose() * prior->information * J;
    lin.g += J.transpose() * prior->information * r;
  }
  return lin;
}

}  // namespace detail

// Pose-only Gauss-Newton on the matched stereo reprojections, Huber-robust,
// with optional pose prior.  Damping kicks in only when the plain step fails
// to reduce the cost, so the accepted cost sequence is monotone.
inline LocalizationResult refine(const std::vector<Match>& matches, const Pose& T_init,
                                 const Pose& T_BC, const StereoCamera& cam,
                                 const LocalizerConfig& cfg,
                                 const std::optional<PosePrior>& prior = std::nullopt) {
  LocalizationResult result;
  result.T_MB = T_init;
  result.num_matches = static_cast<int>(matches.size());
  if (static_cast<int>(matches.size()) < cfg.min_matches) return result;

  double sigma = cfg.pixel_std > 0.0 ? cfg.pixel_std : 0.1;
  Pose T = T_init;
  auto lin = detail::linearize(matches, T, T_BC, cam, sigma, cfg.huber_delta, prior);

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    result.iterations = iter + 1;
    double lambda = 0.0;
    bool accepted = false;
    Pose T_next = T;
    detail::Linearization lin_next;
    for (int attempt = 0; attempt < 10; ++attempt) {
      Mat6 H = lin.H + lambda * Mat6::Identity();
      Eigen::LDLT<Mat6> ldlt(H);
      if (ldlt.info() == Eigen::Success) {
        Vec6 step = ldlt.solve(-lin.g);
        if (step.allFinite()) {
          T_next = apply_increment(T, step);
          lin_next = detail::linearize(matches, T_next, T_BC, cam, sigma, cfg.huber_delta, prior);
          if (lin_next.cost <= lin.cost + 1e-14) {
            accepted = true;
            if (step.norm() < cfg.tolerance) result.converged = true;
            break;
          }
        }
      }
      lambda = lambda == 0.0 ? 1e-6 * (1.0 + lin.H.trace() / 6.0) : lambda * 10.0;
    }
    if (!accepted) {
      result.converged = true;  // damping exhausted: cost cannot be reduced further
      break;
    }
    double improvement = lin.cost - lin_next.cost;
    T = T_next;
    lin = lin_next;
    if (result.converged || improvement < cfg.tolerance * (1.0 + lin.cost)) {
      result.converged = true;
      break;
    }
  }

  result.T_MB = T;
  result.final_cost = lin.cost;
  result.num_inliers = lin.huber_inliers;
  if (!result.converged || lin.huber_inliers < cfg.min_matches) return result;

  Eigen::LDLT<Mat6> ldlt(lin.H);
  if (ldlt.info() != Eigen::Success) return result;
  for (int i = 0; i < 6; ++i)
    if (ldlt.vectorD()[i] <= 0.0) return result;
  result.covariance = ldlt.solve(Mat6::Identity());
  result.neg_entropy = negative_entropy(result.covariance);

  if (prior) {
    Eigen::Quaterniond q_prior = prior->T_MB.q;
    Eigen::Quaterniond dq = result.T_MB.q * q_prior.conjugate();
    double angle = 2.0 * std::acos(std::min(1.0, std::abs(dq.normalized().w())));
    if (angle > cfg.max_orientation_error) return result;
  }
  result.success = true;
  return result;
}

}  // namespace vtr
