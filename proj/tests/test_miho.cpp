#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "planefilter/errors.hpp"
#include "planefilter/miho.hpp"
#include "planefilter/synth.hpp"
#include "support.hpp"

using namespace planefilter;
using namespace testing_support;

namespace {

SceneSpec planar(int planes, int per_plane, double sigma, double outliers,
                 std::uint64_t seed) {
  SceneSpec s;
  s.planes = planes;
  s.matches_per_plane = per_plane;
  s.noise_sigma = sigma;
  s.outlier_fraction = outliers;
  s.seed = seed;
  return s;
}

Eigen::Matrix3d normalized(Eigen::Matrix3d m) {
  m /= m.norm();
  Eigen::Index r, c;
  m.cwiseAbs().maxCoeff(&r, &c);
  return m(r, c) < 0 ? Eigen::Matrix3d(-m) : m;
}

Eigen::Matrix3d translation(double dx, double dy) {
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
  t(0, 2) = dx;
  t(1, 2) = dy;
  return t;
}

double inlier_recall(const LabeledScene& scene, const FilterResult& res) {
  std::size_t inliers = 0, kept = 0;
  for (int l : scene.labels) inliers += l != kOutlierLabel;
  for (std::size_t i : res.kept) kept += scene.labels[i] != kOutlierLabel;
  return double(kept) / double(inliers);
}

}  // namespace

TEST_CASE("split_midpoints examples") {
  const std::vector<Match> ms = {{0, 0, 2, 4}, {5, 5, 5, 5}, {-3, 0, 3, 0}};
  const auto s = split_midpoints(ms);
  CHECK(s.first[0] == Match(0, 0, 1, 2));
  CHECK(s.second[0] == Match(1, 2, 2, 4));
  CHECK(s.first[1].p2 == Point2(5, 5));
  CHECK(s.first[2].p2 == Point2(0, 0));
}

TEST_CASE("rejoin inverts split exactly") {
  std::mt19937_64 rng(3);
  std::vector<Match> ms;
  for (int i = 0; i < 200; ++i) ms.emplace_back(random_point(rng), random_point(rng));
  const auto s = split_midpoints(ms);
  CHECK(rejoin(s.first, s.second) == ms);
  CHECK_THROWS_AS(rejoin(s.first, std::vector<Match>{}), std::invalid_argument);
}

TEST_CASE("fit_dual_homography examples") {
  const Point2 sq[4] = {{0, 0}, {100, 0}, {100, 100}, {0, 100}};

  std::vector<Match> same;
  for (const auto& p : sq) same.emplace_back(p, p);
  const auto id = fit_dual_homography(same);
  const Eigen::Matrix3d I = normalized(Eigen::Matrix3d::Identity());
  CHECK((id.pair.H1.matrix() - I).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((id.pair.H2.matrix() - I).cwiseAbs().maxCoeff() < 1e-12);

  const double t = 7.0;
  std::vector<Match> shifted;
  for (const auto& p : sq) shifted.emplace_back(p, p + Point2(2 * t, 0));
  const auto tr = fit_dual_homography(shifted);
  CHECK((tr.pair.H1.matrix() - normalized(translation(t, 0))).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((tr.pair.H2.matrix() - normalized(translation(-t, 0))).cwiseAbs().maxCoeff() < 1e-12);

  std::mt19937_64 rng(9);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Matrix3d G = random_homography(rng);
    std::vector<Match> sample;
    for (const auto& p : sq) {
      const Point2 q = 3.0 * p + Point2(100, 80);
      sample.emplace_back(q, apply(G, q));
    }
    const auto fit = fit_dual_homography(sample);
    const Homography composite = fit.pair.composite();
    for (const auto& m : sample) CHECK(reprojection_error(composite, m) < 1e-6);
  }

  const std::vector<Match> line = {{0, 0, 0, 0}, {1, 1, 1, 1}, {2, 2, 2, 2}, {3, 3, 3, 3}};
  CHECK_THROWS_AS(fit_dual_homography(line), DegenerateSample);
}

TEST_CASE("miho_inlier_set needs both halves") {
  // x1 = (0, 0), x2 = (40, 0), midpoint (20, 0).
  const std::vector<Match> ms = {{0, 0, 40, 0}};
  const auto s = split_midpoints(ms);
  const Match anchor = ms[0];

  // Side errors 0.5 and 20.
  const MihoPair bad{Homography::translation(19.5, 0), Homography::identity()};
  CHECK(reprojection_error(bad.H1, s.first[0]) == doctest::Approx(0.5));
  CHECK(reprojection_error(bad.H2, s.second[0].swapped()) == doctest::Approx(20.0));
  CHECK(miho_inlier_set(bad, anchor, s.first, s.second, 15.0).empty());

  const MihoPair good{Homography::translation(19.5, 0), Homography::translation(-20, 0)};
  CHECK(miho_inlier_set(good, anchor, s.first, s.second, 15.0) == std::vector<std::size_t>{0});
}

TEST_CASE("miho_inlier_set: exact scene, monotonicity and per-side inclusion") {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 10; ++k) {
    // Midpoints of an affine flow are themselves an affine image of x1.
    Eigen::Matrix3d G = random_homography(rng);
    G /= G(2, 2);
    G(2, 0) = G(2, 1) = 0.0;
    std::vector<Match> ms;
    std::normal_distribution<double> n(0.0, 8.0);
    for (int i = 0; i < 40; ++i) {
      const Point2 p = random_point(rng);
      ms.emplace_back(p, apply(G, p));
    }
    const std::vector<Match> sample(ms.begin(), ms.begin() + 4);
    const auto fit = try_fit_dual_homography(sample);
    if (!fit) continue;
    const auto exact = split_midpoints(ms);
    CHECK(miho_inlier_set(fit->pair, ms[0], exact.first, exact.second, 1e-3).size() ==
          ms.size());

    for (std::size_t i = 4; i < ms.size(); ++i) ms[i].p2 += Point2(n(rng), n(rng));
    const auto s = split_midpoints(ms);
    std::vector<std::size_t> prev;
    for (double t : {1.0, 3.0, 7.5, 15.0, 30.0}) {
      const auto joint = miho_inlier_set(fit->pair, ms[0], s.first, s.second, t);
      CHECK(std::includes(joint.begin(), joint.end(), prev.begin(), prev.end()));
      prev = joint;

      HomographyModel side1, side2;
      side1.H = fit->pair.H1;
      side1.anchor = s.first[0];
      side2.H = fit->pair.H2;
      std::vector<Match> second_swapped;
      for (const auto& m : s.second) second_swapped.push_back(m.swapped());
      side2.anchor = second_swapped[0];
      const auto a = inlier_set(side1, s.first, t);
      const auto b = inlier_set(side2, second_swapped, t);
      CHECK(std::includes(a.begin(), a.end(), joint.begin(), joint.end()));
      CHECK(std::includes(b.begin(), b.end(), joint.begin(), joint.end()));
    }
  }
}

TEST_CASE("fix_rotation recovers quarter turns") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto scene = gen_planar_scene(planar(2, 60, 1.0, 0.3, seed));
    const Point2 center(scene.width / 2.0, scene.height / 2.0);
    for (int q = 0; q < 4; ++q) {
      std::vector<Match> turned = scene.matches;
      for (auto& m : turned) m.p2 = rotate_quarter_turns(m.p2, q, center);
      CHECK(fix_rotation(turned, seed) == doctest::Approx(q * std::numbers::pi / 2));
    }
  }
  CHECK(fix_rotation(std::vector<Match>{}) == 0.0);
  CHECK(fix_rotation(std::vector<Match>{{1, 2, 3, 4}}) == 0.0);
}

TEST_CASE("rotation_score sampling above the pair limit is seeded") {
  std::mt19937_64 rng(1);
  std::vector<Match> ms;
  for (std::size_t i = 0; i < kRotationFullPairsLimit + 10; ++i) {
    const Point2 p = random_point(rng);
    ms.emplace_back(p, p + Point2(3, 1));
  }
  CHECK(rotation_score(ms, 0, 5) == rotation_score(ms, 0, 5));
  CHECK(rotation_score(ms, 0, 5) > rotation_score(ms, 2, 5));
  CHECK(rotation_score(ms, 0, 5) <= kRotationSampledPairs);
}

TEST_CASE("mop_miho_filter: shifted copies of one plane") {
  std::mt19937_64 rng(6);
  std::vector<Match> ms;
  for (int i = 0; i < 60; ++i) {
    const Point2 p = random_point(rng);
    ms.emplace_back(p, p + Point2(30, -10));
  }
  const auto res = mop_miho_filter(ms, MopConfig::miho());
  REQUIRE(res.planes.size() == 1);
  CHECK(res.kept.size() == 60);
  const auto& pair = *res.planes[0].miho;
  CHECK((pair.H1.matrix() - normalized(translation(15, -5))).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((pair.H2.matrix() - normalized(translation(-15, 5))).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("mop_miho_filter agrees with mop_filter on a two-plane scene") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto scene = gen_planar_scene(planar(2, 100, 1.0, 0.2, seed));
    const auto plain = mop_filter(scene.matches, MopConfig::plain());
    const auto miho = mop_miho_filter(scene.matches, MopConfig::miho());
    const double n = double(scene.matches.size());
    CHECK(std::abs(double(plain.kept.size()) - double(miho.kept.size())) <= 0.05 * n);
    CHECK(std::abs(double(plain.discarded.size()) - double(miho.discarded.size())) <=
          0.05 * n);
  }
}

TEST_CASE("mop_miho_filter postconditions") {
  const auto scene = gen_planar_scene(planar(2, 80, 1.0, 0.3, 21));
  const MopConfig cfg = MopConfig::miho();
  for (int q : {0, 1}) {
    std::vector<Match> ms = scene.matches;
    for (auto& m : ms) m.p2 = rotate_quarter_turns(m.p2, q, Point2(320, 240));
    const auto res = mop_miho_filter(ms, cfg);
    CHECK(res.alpha_star == doctest::Approx(q * std::numbers::pi / 2));
    for (std::size_t i : res.kept) {
      const auto& plane = res.planes[std::size_t(res.assignment[i])];
      REQUIRE(plane.miho.has_value());
      CHECK(model_error(plane, ms[i]) <= cfg.t_l);
    }
  }
}

TEST_CASE("mop_miho_filter: rotated scene recall") {
  const auto scene = gen_planar_scene(planar(2, 100, 1.0, 0.3, 8));
  const auto upright = mop_miho_filter(scene.matches, MopConfig::miho());
  std::vector<Match> turned = scene.matches;
  for (auto& m : turned) m.p2 = rotate_quarter_turns(m.p2, 2, Point2(320, 240));
  const auto res = mop_miho_filter(turned, MopConfig::miho());
  CHECK(res.alpha_star == doctest::Approx(std::numbers::pi));
  CHECK(std::abs(inlier_recall(scene, res) - inlier_recall(scene, upright)) <= 0.02);
}

TEST_CASE("mop_miho_filter translation invariance") {
  const auto scene = gen_planar_scene(planar(2, 60, 1.0, 0.3, 31));
  const auto base = mop_miho_filter(scene.matches, MopConfig::miho());
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-300, 300);
  for (int k = 0; k < 2; ++k) {
    const Point2 ta(u(rng), u(rng)), tb(u(rng), u(rng));
    std::vector<Match> moved;
    for (const auto& m : scene.matches) moved.emplace_back(m.p1 + ta, m.p2 + tb);
    const auto a = split_midpoints(scene.matches);
    const auto b = split_midpoints(moved);
    for (std::size_t i = 0; i < moved.size(); ++i) {
      CHECK((b.first[i].p2 - a.first[i].p2 - 0.5 * (ta + tb)).cwiseAbs().maxCoeff() <= 1e-12);
    }
    const auto res = mop_miho_filter(moved, MopConfig::miho());
    CHECK(res.kept == base.kept);
    CHECK(res.discarded == base.discarded);
  }
}
