#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "vtr/errors.hpp"
#include "vtr/geometry.hpp"

namespace vtr {

// Path-tracking error of one pose against a reference path: total
// least-squares line through the N nearest reference points, then the
// perpendicular distance to that line.  Falls back to the distance to the
// neighbourhood centroid when the neighbours do not span a line.
inline double point_to_path_error(const Vec3& p, const std::vector<Vec3>& reference,
                                  int neighbors = 6) {
  if (reference.empty()) throw DegenerateFitError("empty reference path");
  int n = std::min<int>(neighbors, static_cast<int>(reference.size()));

  std::vector<std::pair<double, int>> dist(reference.size());
  for (size_t i = 0; i < reference.size(); ++i)
    dist[i] = {(reference[i] - p).squaredNorm(), static_cast<int>(i)};
  std::partial_sort(dist.begin(), dist.begin() + n, dist.end());

  Vec3 centroid = Vec3::Zero();
  for (int i = 0; i < n; ++i) centroid += reference[dist[i].second];
  centroid /= n;

  Mat3 cov = Mat3::Zero();
  for (int i = 0; i < n; ++i) {
    Vec3 d = reference[dist[i].second] - centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  Vec3 r = p - centroid;
  if (eig.eigenvalues()[2] < 1e-12) return r.norm();
  Vec3 dir = eig.eigenvectors().col(2);
  return (r - r.dot(dir) * dir).norm();
}

inline std::vector<double> compute_pte(const std::vector<Vec3>& path,
                                       const std::vector<Vec3>& reference, int neighbors = 6) {
  std::vector<double> out;
  out.reserve(path.size());
  for (const auto& p : path) out.push_back(point_to_path_error(p, reference, neighbors));
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double max_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

}  // namespace vtr
