#include "planefilter/synth.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "planefilter/errors.hpp"

namespace planefilter {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t outlier_count(double fraction, std::size_t inliers) {
  if (fraction <= 0.0) return 0;
  if (fraction >= 1.0) return inliers;
  return static_cast<std::size_t>(
      std::llround(fraction / (1.0 - fraction) * static_cast<double>(inliers)));
}

Point2 uniform_point(Rng& rng, int w, int h) {
  const double x = uniform(rng, 0.0, w - 1.0);
  const double y = uniform(rng, 0.0, h - 1.0);
  return {x, y};
}

void add_outliers(LabeledScene& scene, std::size_t n, Rng& rng) {
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = uniform_point(rng, scene.width, scene.height);
    const Point2 b = uniform_point(rng, scene.width, scene.height);
    scene.matches.emplace_back(a, b);
    scene.labels.push_back(kOutlierLabel);
  }
}

void shuffle_scene(LabeledScene& scene, Rng& rng) {
  std::vector<std::size_t> order(scene.matches.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Match> m;
  std::vector<int> l;
  m.reserve(order.size());
  l.reserve(order.size());
  for (std::size_t i : order) {
    m.push_back(scene.matches[i]);
    l.push_back(scene.labels[i]);
  }
  scene.matches = std::move(m);
  scene.labels = std::move(l);
}

bool in_frame(const Point2& p, int w, int h) {
  return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= w - 1.0 && p.y() <= h - 1.0;
}

Eigen::Matrix3d rotation_about(const Eigen::Vector3d& axis, double rad) {
  return Eigen::AngleAxisd(rad, axis.normalized()).toRotationMatrix();
}

Eigen::Vector3d random_unit(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    Eigen::Vector3d v(n(rng), n(rng), n(rng));
    if (v.norm() > 1e-6) return v.normalized();
  }
}

}  // namespace

void SceneSpec::validate() const {
  if (planes < 0 || matches_per_plane < 0) throw std::invalid_argument("counts must be >= 0");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be >= 0");
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) {
    throw std::invalid_argument("outlier_fraction must be in [0, 1]");
  }
  if (width < 1 || height < 1) throw std::invalid_argument("image size must be positive");
  if (!(depth_min > 0.0 && depth_max > depth_min)) {
    throw std::invalid_argument("need 0 < depth_min < depth_max");
  }
  if (!(baseline > 0.0) || !(pose_scale > 0.0)) {
    throw std::invalid_argument("baseline and pose_scale must be positive");
  }
  if (!(max_shift >= 0.0) || !(corner_jitter >= 0.0) || !(max_rotation_deg >= 0.0)) {
    throw std::invalid_argument("shift, jitter and rotation must be >= 0");
  }
  if (checker_size < 1) throw std::invalid_argument("checker_size must be >= 1");
}

double homography_condition(const Homography& H) {
  // Singular values are square roots of the eigenvalues of H^T H.
  const Eigen::Matrix3d G = H.matrix().transpose() * H.matrix();
  const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(G).eigenvalues();
  return ev(0) > 0.0 ? std::sqrt(ev(2) / ev(0)) : std::numeric_limits<double>::infinity();
}

LabeledScene gen_planar_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  LabeledScene scene;
  scene.width = spec.width;
  scene.height = spec.height;
  const int w = spec.width, h = spec.height;

  for (int k = 0; k < spec.planes; ++k) {
    const double x0 = static_cast<double>(k) * (w - 1.0) / spec.planes;
    const double x1 = static_cast<double>(k + 1) * (w - 1.0) / spec.planes;
    const std::array<Point2, 4> src = {Point2(x0, 0.0), Point2(x1, 0.0),
                                       Point2(x1, h - 1.0), Point2(x0, h - 1.0)};
    std::optional<Homography> plane;
    for (int draw = 0; draw < kMaxPlaneDraws && !plane; ++draw) {
      const Point2 shift(uniform(rng, -spec.max_shift, spec.max_shift),
                         uniform(rng, -spec.max_shift, spec.max_shift));
      std::vector<Match> corners;
      for (const auto& s : src) {
        const Point2 j(uniform(rng, -spec.corner_jitter, spec.corner_jitter),
                       uniform(rng, -spec.corner_jitter, spec.corner_jitter));
        corners.emplace_back(s, s + shift + j);
      }
      const auto fit = try_fit_homography_dlt(corners);
      if (!fit) continue;
      if (!(homography_condition(fit->H) < kMaxPlaneCondition)) continue;
      if (!sample_is_quasi_affine(fit->H, corners)) continue;
      plane = fit->H;
    }
    if (!plane) throw RejectionLimit("no well-conditioned plane in 1000 draws");
    scene.gt_planes.push_back(*plane);

    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    int made = 0;
    int attempts = 0;
    while (made < spec.matches_per_plane) {
      if (++attempts > 1000 * std::max(spec.matches_per_plane, 1)) {
        throw RejectionLimit("plane support does not map into frame 2");
      }
      const Point2 a(uniform(rng, x0, x1), uniform(rng, 0.0, h - 1.0));
      const auto b = plane->map(a);
      if (!b || !in_frame(*b, w, h)) continue;
      Match m(a, *b);
      if (spec.noise_sigma > 0.0) {
        for (;;) {
          m.p2 = *b + Point2(noise(rng), noise(rng));
          if (reprojection_error(*plane, m) <= 3.0 * spec.noise_sigma) break;
        }
      }
      scene.matches.push_back(m);
      scene.labels.push_back(k);
      ++made;
    }
  }
  add_outliers(scene, outlier_count(spec.outlier_fraction, scene.matches.size()), rng);
  shuffle_scene(scene, rng);
  return scene;
}

GrayImage make_texture(const SceneSpec& spec) {
  spec.validate();
  const int w = spec.width, h = spec.height;
  GrayImage img(w, h);
  if (spec.texture == TextureKind::Checkerboard) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const bool on = ((x / spec.checker_size) + (y / spec.checker_size)) % 2 == 0;
        img.at(x, y) = on ? 0.8 : 0.2;
      }
    }
    return img;
  }
  Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  GrayImage noise(w, h);
  for (double& v : noise.data()) v = uniform(rng, 0.0, 1.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          s += noise.at(xx, yy);
          ++n;
        }
      }
      img.at(x, y) = s / n;
    }
  }
  return img;
}

RenderedPair render_textured_pair(const Eigen::Matrix3d& H, const SceneSpec& spec,
                                  std::size_t count, int r) {
  spec.validate();
  if (!H.allFinite() || !(std::abs(normalize_homography_matrix(H).determinant()) > 1e-15)) {
    throw SingularHomography();
  }
  RenderedPair out;
  out.img1 = make_texture(spec);
  const int w = spec.width, h = spec.height;
  out.img2 = GrayImage(w, h);
  const Eigen::Matrix3d Hinv = H.inverse();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d q = Hinv * Eigen::Vector3d(x, y, 1.0);
      if (!(std::abs(q.z()) > kInfinityTolerance)) continue;
      const double u = q.z() == 1.0 ? q.x() : q.x() / q.z();
      const double v = q.z() == 1.0 ? q.y() : q.y() / q.z();
      if (!out.img1.contains(u, v)) continue;
      out.img2.at(x, y) = bilinear(out.img1, u, v);
    }
  }

  const int margin = 3 * r;
  auto fits = [&](const Point2& p) {
    return p.x() >= margin && p.y() >= margin && p.x() <= w - 1.0 - margin &&
           p.y() <= h - 1.0 - margin;
  };
  Rng rng(spec.seed + 1);
  const std::size_t max_attempts = 1000 * std::max<std::size_t>(count, 1);
  for (std::size_t a = 0; a < max_attempts && out.gt_matches.size() < count; ++a) {
    if (w - 1 - 2 * margin < 0 || h - 1 - 2 * margin < 0) break;
    const Point2 p1(std::uniform_int_distribution<int>(margin, w - 1 - margin)(rng),
                    std::uniform_int_distribution<int>(margin, h - 1 - margin)(rng));
    const Eigen::Vector3d q = H * Eigen::Vector3d(p1.x(), p1.y(), 1.0);
    if (!(std::abs(q.z()) > kInfinityTolerance)) continue;
    const Point2 p2 = q.z() == 1.0 ? Point2(q.x(), q.y()) : Point2(q.x() / q.z(), q.y() / q.z());
    if (!fits(p2)) continue;
    out.gt_matches.emplace_back(p1, p2);
  }
  if (out.gt_matches.empty() && count > 0) throw EmptyOverlap();
  return out;
}

Eigen::Matrix3d tilt_homography(double degrees, int width, int height) {
  const Eigen::Matrix3d K = estimate_intrinsics(width, height);
  const Eigen::Matrix3d R =
      rotation_about(Eigen::Vector3d::UnitX(), degrees * std::numbers::pi / 180.0);
  return K * R * K.inverse();
}

LabeledScene gen_pose_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  LabeledScene scene;
  scene.width = spec.width;
  scene.height = spec.height;
  const int w = spec.width, h = spec.height;
  const Eigen::Matrix3d K = estimate_intrinsics(w, h);

  PoseGroundTruth gt;
  gt.K1 = K;
  gt.K2 = K;
  const double angle = uniform(rng, 0.0, spec.max_rotation_deg) * std::numbers::pi / 180.0;
  gt.R = rotation_about(random_unit(rng), angle);
  gt.t = random_unit(rng) * spec.baseline;
  gt.scale = spec.pose_scale;

  // Frustum of camera 1 at the far depth, so every point projects in frame.
  const double f = K(0, 0);
  auto project = [&](const Eigen::Vector3d& X, Point2& p) {
    if (!(X.z() > 1e-9)) return false;
    const Eigen::Vector3d q = K * X;
    p = Point2(q.x() / q.z(), q.y() / q.z());
    return in_frame(p, w, h);
  };

  const int n = spec.matches_per_plane;
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  for (int round = 0; round < kMaxPlaneDraws; ++round) {
    std::vector<Eigen::Vector3d> pts;
    std::vector<Match> ms;
    int attempts = 0;
    while (static_cast<int>(pts.size()) < n && attempts++ < 1000 * std::max(n, 1)) {
      const double z = uniform(rng, spec.depth_min, spec.depth_max);
      const double x = uniform(rng, -0.5 * w / f, 0.5 * w / f) * z;
      const double y = uniform(rng, -0.5 * h / f, 0.5 * h / f) * z;
      const Eigen::Vector3d X1(x, y, z);
      const Eigen::Vector3d X2 = gt.R * X1 + gt.t;
      Point2 a, b;
      if (!project(X1, a) || !project(X2, b)) continue;
      pts.push_back(X1);
      ms.emplace_back(a, b);
    }
    if (static_cast<int>(pts.size()) < n) continue;
    if (n >= 4) {
      Eigen::Vector3d c = Eigen::Vector3d::Zero();
      for (const auto& p : pts) c += p;
      c /= n;
      Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
      for (const auto& p : pts) S += (p - c) * (p - c).transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(S);
      if (!(es.eigenvalues()(0) > 1e-4 * es.eigenvalues()(2))) continue;  // coplanar
    }
    if (spec.noise_sigma > 0.0) {
      for (auto& m : ms) {
        const Point2 b = m.p2;
        Point2 d;
        do {
          d = Point2(noise(rng), noise(rng));
        } while (d.norm() > 3.0 * spec.noise_sigma);
        m.p2 = b + d;
      }
    }
    scene.matches = std::move(ms);
    scene.labels.assign(scene.matches.size(), 0);
    scene.gt_pose = gt;
    add_outliers(scene, outlier_count(spec.outlier_fraction, scene.matches.size()), rng);
    shuffle_scene(scene, rng);
    return scene;
  }
  throw RejectionLimit("no non-coplanar point set found");
}

}  // namespace planefilter
