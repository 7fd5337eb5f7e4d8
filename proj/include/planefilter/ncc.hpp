#pragma once

#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "planefilter/geometry.hpp"
#include "planefilter/image.hpp"
#include "planefilter/mop.hpp"

namespace planefilter {

enum class PairTag { Base, Extended, PerturbedFirst, PerturbedSecond };

/// Homographies taking each image into a shared alignment plane. Kept as
/// raw matrices so identity and integer translations warp exactly.
struct WarpPair {
  Eigen::Matrix3d H1 = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d H2 = Eigen::Matrix3d::Identity();
  PairTag tag = PairTag::Base;
  double rho = 0.0;  // perturbation rotation (radians)
  double f = 1.0;    // perturbation shear factor

  static WarpPair identity(PairTag tag = PairTag::Base) {
    WarpPair p;
    p.tag = tag;
    return p;
  }
  static WarpPair from(const Homography& H1, const Homography& H2,
                       PairTag tag = PairTag::Extended) {
    WarpPair p;
    p.H1 = H1.matrix();
    p.H2 = H2.matrix();
    p.tag = tag;
    return p;
  }
};

/// A_{rho,f} = [[f cos rho, -f sin rho, 0], [sin rho, cos rho, 0], [0, 0, 1]].
Eigen::Matrix3d perturbation_matrix(double rho, double f);

inline constexpr double kPerturbRotations[5] = {
    -std::numbers::pi / 6.0, -std::numbers::pi / 12.0, 0.0,
    std::numbers::pi / 12.0, std::numbers::pi / 6.0};
inline constexpr double kPerturbShears[5] = {5.0 / 7.0, 5.0 / 6.0, 1.0,
                                             6.0 / 5.0, 7.0 / 5.0};

/// Base pair, then the 25 perturbations of the first extended homography,
/// then the 25 of the second (51 pairs, duplicates retained).
std::vector<WarpPair> build_warp_pairs(const WarpPair& base,
                                       const WarpPair& extended);

struct Patch {
  int radius = 0;
  std::vector<double> values;  // (2r+1)^2, row-major
  std::size_t invalid = 0;     // samples that fell outside the image
};

inline constexpr double kMaxInvalidFraction = 0.1;

/// Patch of the warped image centered at H*center: sample w reads
/// bilinear(I, H^-1 (H*center + w)). Throws OutOfBounds when more than 10%
/// of the samples fall outside I or the center maps to infinity.
Patch warp_patch(const GrayImage& img, const Eigen::Matrix3d& H,
                 const Point2& center, int r);
Patch warp_patch(const GrayImage& img, const Homography& H,
                 const Point2& center, int r);

/// Sum of products of z-scored samples (population variance). Identical
/// patches score (2r+1)^2. -inf when either variance is <= 1e-12.
double ncc_similarity(const Patch& a, const Patch& b);

inline constexpr double kMinPatchVariance = 1e-12;

/// Relative score difference (per patch sample) under which two candidate
/// alignments are tied and the tie-break order decides.
inline constexpr double kScoreTieTolerance = 1e-9;

/// Parabola vertex per axis from a 3x3 response, response(1 + dy, 1 + dx).
/// A component is 0 when its curvature is >= -1e-12 or not finite, and is
/// clamped to [-1, 1] otherwise.
Eigen::Vector2d subpixel_peak(const Eigen::Matrix3d& response);

struct NccConfig {
  int radius = 10;
  int threads = -1;  // -1: PLANEFILTER_THREADS, 0: hardware concurrency
};

struct RefinedMatch {
  Match refined;            // original image coordinates
  Eigen::Vector2i t1 = Eigen::Vector2i::Zero();
  Eigen::Vector2i t2 = Eigen::Vector2i::Zero();
  WarpPair best_pair;
  std::size_t pair_index = 0;
  double score = 0.0;
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  bool ok = false;  // false: no valid pair, match returned unrefined
};

/// Template matching over every pair and both template directions, then
/// parabolic sub-pixel refinement and back-projection.
RefinedMatch refine_match(const GrayImage& img1, const GrayImage& img2,
                          const Match& m, std::span<const WarpPair> pairs,
                          const NccConfig& cfg = {});

/// Base and extended homography pairs of one match.
struct PairSeed {
  WarpPair base = WarpPair::identity(PairTag::Base);
  WarpPair extended = WarpPair::identity(PairTag::Extended);
};

/// Seeds from a filter run: (I, H^-1) for a plain plane, the plane's MiHo
/// pair otherwise, identity for unassigned matches.
std::vector<PairSeed> seeds_from_filter(const FilterResult& result,
                                        std::size_t match_count);

/// Refines every match in parallel; seeds may be empty (identity pairs).
std::vector<RefinedMatch> refine_matches(const GrayImage& img1,
                                         const GrayImage& img2,
                                         std::span<const Match> matches,
                                         std::span<const PairSeed> seeds,
                                         const NccConfig& cfg = {});

}  // namespace planefilter
