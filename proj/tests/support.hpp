// Shared helpers for the unit tests. Everything here is computed directly
// from homogeneous coordinates so it can serve as an oracle for the library.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "planefilter/geometry.hpp"

namespace testing_support {

using planefilter::Match;
using planefilter::Point2;

inline Eigen::Vector3d lift(const Point2& p) { return {p.x(), p.y(), 1.0}; }

inline Point2 apply(const Eigen::Matrix3d& H, const Point2& p) {
  const Eigen::Vector3d q = H * lift(p);
  return q.head<2>() / q.z();
}

// max(|x2 - H x1|, |x1 - H^-1 x2|), written out longhand.
inline double transfer_error(const Eigen::Matrix3d& H, const Match& m) {
  const Eigen::Matrix3d Hi = H.inverse();
  const Eigen::Vector3d a = H * lift(m.p1);
  const Eigen::Vector3d b = Hi * lift(m.p2);
  if (std::abs(a.z()) <= 1e-12 * H.norm() || std::abs(b.z()) <= 1e-12 * Hi.norm()) {
    return std::numeric_limits<double>::infinity();
  }
  const double e1 = std::hypot(m.p2.x() - a.x() / a.z(), m.p2.y() - a.y() / a.z());
  const double e2 = std::hypot(m.p1.x() - b.x() / b.z(), m.p1.y() - b.y() / b.z());
  return std::max(e1, e2);
}

// Mild projective map of a 640x480 frame onto itself.
inline Eigen::Matrix3d random_homography(std::mt19937_64& rng, double jitter = 40.0) {
  std::uniform_real_distribution<double> u(-jitter, jitter);
  const Point2 src[4] = {{0, 0}, {640, 0}, {640, 480}, {0, 480}};
  std::vector<Match> ms;
  for (const auto& s : src) ms.emplace_back(s, s + Point2(u(rng), u(rng)));
  return planefilter::fit_homography_dlt(ms).H.matrix();
}

inline Point2 random_point(std::mt19937_64& rng, double w = 640, double h = 480) {
  std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h);
  return {ux(rng), uy(rng)};
}

inline Eigen::Matrix3d rot_z(double rad) {
  return Eigen::AngleAxisd(rad, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

}  // namespace testing_support
