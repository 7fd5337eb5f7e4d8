#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "planefilter/geometry.hpp"
#include "planefilter/mop.hpp"

namespace planefilter {

/// Each match (x1, x2) becomes m1 = (x1, m) and m2 = (m, x2) with m the
/// keypoint midpoint.
struct SplitMatches {
  std::vector<Match> first;   // (x1, m)
  std::vector<Match> second;  // (m, x2)
};

SplitMatches split_midpoints(std::span<const Match> matches);

/// Inverse of split_midpoints: (x1, m) and (m, x2) back to (x1, x2).
std::vector<Match> rejoin(std::span<const Match> first,
                          std::span<const Match> second);

struct DualFit {
  MihoPair pair;
  double smallest_singular1 = 0.0;
  double smallest_singular2 = 0.0;
};

/// H1 fits x1 -> m and H2 fits x2 -> m on the split sample. Throws
/// DegenerateSample when either side cannot be fit.
DualFit fit_dual_homography(std::span<const Match> sample);
std::optional<DualFit> try_fit_dual_homography(std::span<const Match> sample);

/// Split-side sample checks: distances, singular values and quasi-affinity
/// of both halves.
bool dual_sample_is_valid(std::span<const Match> sample, const DualFit& fit,
                          double min_distance);

/// Joint inliers: a match passes only if both of its halves pass the
/// reprojection and quasi-affinity tests. `anchor` is the original sample
/// match (s11, s21).
std::vector<std::size_t> miho_inlier_set(const MihoPair& pair,
                                         const Match& anchor,
                                         std::span<const Match> first,
                                         std::span<const Match> second,
                                         double t);

/// Count of match pairs whose midpoint distance lies between the two
/// keypoint distances once image-2 keypoints are unrotated by the given
/// number of quarter turns.
std::uint64_t rotation_score(std::span<const Match> matches, int quarter_turns,
                             std::uint64_t seed = 0);

/// Relative rotation of image 2 w.r.t. image 1 among {0, pi/2, pi, 3pi/2}
/// (the rotation that was applied to image 2). Ties prefer 0, then
/// increasing angles. Above kRotationFullPairsLimit matches a seeded
/// random subsample of kRotationSampledPairs pairs is scored.
double fix_rotation(std::span<const Match> matches, std::uint64_t seed = 0);

inline constexpr std::size_t kRotationFullPairsLimit = 1500;
inline constexpr std::size_t kRotationSampledPairs = 1000000;

struct MihoOptions {
  bool fix_rotation = true;
  /// Rotation center in image 2; defaults to the center of the image-2
  /// keypoints' bounding box.
  std::optional<Point2> image2_center;
};

/// MOP over midpoint-split matches. Every plane carries a MihoPair that maps
/// original image coordinates into the middle plane.
FilterResult mop_miho_filter(std::span<const Match> matches,
                             const MopConfig& cfg,
                             const MihoOptions& opts = {});

}  // namespace planefilter
