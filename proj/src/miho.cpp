#include "planefilter/miho.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "planefilter/errors.hpp"

namespace planefilter {

SplitMatches split_midpoints(std::span<const Match> matches) {
  SplitMatches out;
  out.first.reserve(matches.size());
  out.second.reserve(matches.size());
  for (const auto& m : matches) {
    const Point2 mid = 0.5 * (m.p1 + m.p2);
    out.first.emplace_back(m.p1, mid);
    out.second.emplace_back(mid, m.p2);
  }
  return out;
}

std::vector<Match> rejoin(std::span<const Match> first,
                          std::span<const Match> second) {
  if (first.size() != second.size()) {
    throw std::invalid_argument("rejoin: split sets differ in size");
  }
  std::vector<Match> out;
  out.reserve(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    out.emplace_back(first[i].p1, second[i].p2);
  }
  return out;
}

namespace {

// side 1: (x1 -> m), side 2: (x2 -> m)
std::array<std::vector<Match>, 2> split_sides(std::span<const Match> sample) {
  std::array<std::vector<Match>, 2> sides;
  for (const auto& m : sample) {
    const Point2 mid = 0.5 * (m.p1 + m.p2);
    sides[0].emplace_back(m.p1, mid);
    sides[1].emplace_back(m.p2, mid);
  }
  return sides;
}

}  // namespace

std::optional<DualFit> try_fit_dual_homography(std::span<const Match> sample) {
  const auto sides = split_sides(sample);
  auto f1 = try_fit_homography_dlt(sides[0]);
  if (!f1) return std::nullopt;
  auto f2 = try_fit_homography_dlt(sides[1]);
  if (!f2) return std::nullopt;
  return DualFit{MihoPair{f1->H, f2->H}, f1->smallest_singular,
                 f2->smallest_singular};
}

DualFit fit_dual_homography(std::span<const Match> sample) {
  auto fit = try_fit_dual_homography(sample);
  if (!fit) throw DegenerateSample("degenerate split sample");
  return *fit;
}

bool dual_sample_is_valid(std::span<const Match> sample, const DualFit& fit,
                          double min_distance) {
  const auto sides = split_sides(sample);
  return sample_degeneracy_check(sides[0], fit.smallest_singular1, min_distance) &&
         sample_degeneracy_check(sides[1], fit.smallest_singular2, min_distance) &&
         sample_is_quasi_affine(fit.pair.H1, sides[0]) &&
         sample_is_quasi_affine(fit.pair.H2, sides[1]);
}

std::vector<std::size_t> miho_inlier_set(const MihoPair& pair,
                                         const Match& anchor,
                                         std::span<const Match> first,
                                         std::span<const Match> second,
                                         double t) {
  if (first.size() != second.size()) {
    throw std::invalid_argument("miho_inlier_set: split sets differ in size");
  }
  const Point2 amid = 0.5 * (anchor.p1 + anchor.p2);
  const Match anchor1(anchor.p1, amid);
  const Match anchor2(anchor.p2, amid);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < first.size(); ++i) {
    const Match& m1 = first[i];
    const Match m2 = second[i].swapped();
    if (reprojection_error(pair.H1, m1) <= t &&
        reprojection_error(pair.H2, m2) <= t &&
        is_quasi_affine(pair.H1, anchor1, m1) &&
        is_quasi_affine(pair.H2, anchor2, m2)) {
      out.push_back(i);
    }
  }
  return out;
}

namespace {

bool between(const Match& a, const Match& b, const Point2& a2, const Point2& b2) {
  const double d1 = (a.p1 - b.p1).norm();
  const double d2 = (a2 - b2).norm();
  const double dm = (0.5 * (a.p1 + a2) - 0.5 * (b.p1 + b2)).norm();
  return dm >= std::min(d1, d2) && dm <= std::max(d1, d2);
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> sampled_pairs(
    std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint32_t> pick(
      0, static_cast<std::uint32_t>(n - 1));
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  pairs.reserve(kRotationSampledPairs);
  while (pairs.size() < kRotationSampledPairs) {
    const auto i = pick(rng);
    const auto j = pick(rng);
    if (i != j) pairs.emplace_back(i, j);
  }
  return pairs;
}

std::array<std::uint64_t, 4> rotation_scores(std::span<const Match> matches,
                                             std::uint64_t seed) {
  std::array<std::uint64_t, 4> scores{};
  const std::size_t n = matches.size();
  if (n < 2) return scores;
  // Pair distances are rotation-center independent; rotate about the origin.
  std::array<std::vector<Point2>, 4> rotated;
  for (int q = 0; q < 4; ++q) {
    rotated[q].reserve(n);
    for (const auto& m : matches) {
      rotated[q].push_back(rotate_quarter_turns(m.p2, -q, Point2::Zero()));
    }
  }
  if (n <= kRotationFullPairsLimit) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        for (int q = 0; q < 4; ++q) {
          scores[q] += between(matches[i], matches[j], rotated[q][i], rotated[q][j]);
        }
      }
    }
    return scores;
  }
  for (const auto& [i, j] : sampled_pairs(n, seed)) {
    for (int q = 0; q < 4; ++q) {
      scores[q] += between(matches[i], matches[j], rotated[q][i], rotated[q][j]);
    }
  }
  return scores;
}

Point2 bbox_center(std::span<const Match> matches) {
  if (matches.empty()) return Point2::Zero();
  Point2 lo = matches.front().p2;
  Point2 hi = lo;
  for (const auto& m : matches) {
    lo = lo.cwiseMin(m.p2);
    hi = hi.cwiseMax(m.p2);
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::uint64_t rotation_score(std::span<const Match> matches, int quarter_turns,
                             std::uint64_t seed) {
  return rotation_scores(matches, seed)[((quarter_turns % 4) + 4) % 4];
}

double fix_rotation(std::span<const Match> matches, std::uint64_t seed) {
  const auto scores = rotation_scores(matches, seed);
  int best = 0;
  for (int q = 1; q < 4; ++q) {
    if (scores[q] > scores[best]) best = q;
  }
  return best * std::numbers::pi / 2.0;
}

FilterResult mop_miho_filter(std::span<const Match> matches,
                             const MopConfig& cfg, const MihoOptions& opts) {
  cfg.validate();
  const double alpha = opts.fix_rotation ? fix_rotation(matches, cfg.seed) : 0.0;
  const int q = static_cast<int>(std::lround(alpha / (std::numbers::pi / 2.0))) % 4;
  if (q == 0) {
    FilterResult res = detail::run_mop(matches, cfg, ModelKind::Miho);
    res.alpha_star = 0.0;
    return res;
  }

  const Point2 center = opts.image2_center.value_or(bbox_center(matches));
  std::vector<Match> upright(matches.begin(), matches.end());
  for (auto& m : upright) m.p2 = rotate_quarter_turns(m.p2, -q, center);

  FilterResult res = detail::run_mop(upright, cfg, ModelKind::Miho);
  res.alpha_star = alpha;
  // Express the pairs on original image-2 coordinates.
  const Eigen::Matrix3d unrotate = quarter_turn_matrix(-q, center);
  for (auto& plane : res.planes) {
    plane.miho->H2 = Homography(plane.miho->H2.matrix() * unrotate);
    plane.miho->quarter_turns = q;
    plane.miho->center = center;
    plane.H = plane.miho->composite();
    plane.anchor.p2 = rotate_quarter_turns(plane.anchor.p2, q, center);
  }
  return res;
}

}  // namespace planefilter
