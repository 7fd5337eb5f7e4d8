#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "planefilter/eval.hpp"
#include "planefilter/geometry.hpp"
#include "planefilter/image.hpp"

namespace planefilter {

enum class TextureKind { WhiteNoise, Checkerboard };

struct SceneSpec {
  int planes = 2;
  int matches_per_plane = 100;
  double noise_sigma = 0.0;       // px
  double outlier_fraction = 0.0;  // of the final match count
  int width = 640;
  int height = 480;
  // Planar scenes: destination corners = source + shift + jitter.
  double max_shift = 20.0;
  double corner_jitter = 40.0;
  // Pose scenes.
  double depth_min = 4.0;
  double depth_max = 8.0;
  double baseline = 1.0;
  double max_rotation_deg = 10.0;
  double pose_scale = 1.0;  // meters per scene unit
  // Rendering.
  TextureKind texture = TextureKind::WhiteNoise;
  int checker_size = 8;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument.
  void validate() const;
  bool operator==(const SceneSpec&) const = default;
};

inline constexpr int kOutlierLabel = -1;

struct LabeledScene {
  std::vector<Match> matches;
  std::vector<int> labels;  // plane index or kOutlierLabel
  std::vector<Homography> gt_planes;
  std::optional<PoseGroundTruth> gt_pose;
  int width = 0;
  int height = 0;
};

inline constexpr int kMaxPlaneDraws = 1000;
inline constexpr double kMaxPlaneCondition = 1e4;

/// Piecewise-planar matches. Plane k is supported on the k-th vertical strip
/// of image 1; its homography is fit to the strip corners moved by a shared
/// shift plus per-corner jitter. Inliers are perturbed on image 2 with
/// Gaussian noise truncated at 3 sigma of reprojection error; outliers are
/// uniform in both frames. Throws RejectionLimit.
LabeledScene gen_planar_scene(const SceneSpec& spec);

/// Condition number of the normalized homography matrix.
double homography_condition(const Homography& H);

/// Smoothed white noise (3x3 box) or checkerboard, in [0, 1].
GrayImage make_texture(const SceneSpec& spec);

struct RenderedPair {
  GrayImage img1;
  GrayImage img2;
  std::vector<Match> gt_matches;
};

/// img2(y) = bilinear(img1, H^-1 y), 0 outside img1. Ground-truth matches
/// start on integer pixels of image 1 and keep radius-3r windows inside both
/// frames. Throws EmptyOverlap when none can be placed.
RenderedPair render_textured_pair(const Eigen::Matrix3d& H, const SceneSpec& spec,
                                  std::size_t count, int r = 10);

/// Homography of a camera rotated by `degrees` about the horizontal axis
/// through the image center, with estimate_intrinsics calibration.
Eigen::Matrix3d tilt_homography(double degrees, int width, int height);

/// Random 3-D points seen by two cameras (X2 = R X1 + t, intrinsics from
/// estimate_intrinsics), `matches_per_plane` inliers labeled 0.
LabeledScene gen_pose_scene(const SceneSpec& spec);

}  // namespace planefilter
