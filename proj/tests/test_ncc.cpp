#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "planefilter/errors.hpp"
#include "planefilter/ncc.hpp"
#include "planefilter/synth.hpp"
#include "support.hpp"

using namespace planefilter;
using namespace testing_support;

namespace {

GrayImage noise_texture(int w, int h, std::uint64_t seed) {
  SceneSpec s;
  s.width = w;
  s.height = h;
  s.seed = seed;
  return make_texture(s);
}

// img(x, y) = src(x - dx, y - dy), zero where undefined.
GrayImage shifted(const GrayImage& src, int dx, int dy) {
  GrayImage out(src.width(), src.height(), 0.0);
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      const int sx = x - dx, sy = y - dy;
      if (sx >= 0 && sy >= 0 && sx < src.width() && sy < src.height()) {
        out.at(x, y) = src.at(sx, sy);
      }
    }
  }
  return out;
}

// Longhand NCC: z-scores with the population deviation, summed products.
double ncc_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = double(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  const double sa = std::sqrt(va / n), sb = std::sqrt(vb / n);
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) / sa * (b[i] - mb) / sb;
  return s;
}

Patch patch_of(std::vector<double> v, int r) {
  Patch p;
  p.radius = r;
  p.values = std::move(v);
  return p;
}

}  // namespace

TEST_CASE("warp_patch: identity is an exact crop") {
  const GrayImage img = noise_texture(40, 30, 1);
  const Patch p = warp_patch(img, Eigen::Matrix3d::Identity(), Point2(20, 15), 3);
  REQUIRE(p.values.size() == 49);
  CHECK(p.invalid == 0);
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) {
      CHECK(p.values[std::size_t((dy + 3) * 7 + dx + 3)] == img.at(20 + dx, 15 + dy));
    }
  }
}

TEST_CASE("warp_patch: half-pixel samples on a ramp") {
  GrayImage ramp(64, 16, 0.0);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 64; ++x) ramp.at(x, y) = x / 64.0;
  }
  // H * center = (31, 8) so the samples sit at x = 30.5 + dx.
  const Homography H = Homography::translation(0.5, 0);
  const Patch p = warp_patch(ramp, H, Point2(30.5, 8), 4);
  for (int dy = -4; dy <= 4; ++dy) {
    for (int dx = -4; dx <= 4; ++dx) {
      const int x0 = 30 + dx;
      const double mid = 0.5 * (ramp.at(x0, 8 + dy) + ramp.at(x0 + 1, 8 + dy));
      CHECK(p.values[std::size_t((dy + 4) * 9 + dx + 4)] == doctest::Approx(mid).epsilon(1e-14));
    }
  }
}

TEST_CASE("warp_patch: windows leaving the image") {
  const GrayImage img = noise_texture(40, 30, 2);
  CHECK_THROWS_AS(warp_patch(img, Eigen::Matrix3d::Identity(), Point2(2, 2), 10), OutOfBounds);
  // Exactly one column outside: 7 of 49 samples invalid, above 10%.
  CHECK_THROWS_AS(warp_patch(img, Eigen::Matrix3d::Identity(), Point2(2, 15), 3), OutOfBounds);
  // Touching the border is still fully inside.
  const Patch p = warp_patch(img, Eigen::Matrix3d::Identity(), Point2(3, 15), 3);
  CHECK(p.invalid == 0);
}

TEST_CASE("ncc_similarity examples") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> a(441), b(441);
  for (auto& v : a) v = u(rng);
  for (auto& v : b) v = u(rng);

  CHECK(ncc_similarity(patch_of(a, 10), patch_of(a, 10)) == doctest::Approx(441.0).epsilon(1e-12));

  std::vector<double> affine(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) affine[i] = 2.5 * a[i] - 0.3;
  CHECK(ncc_similarity(patch_of(a, 10), patch_of(affine, 10)) ==
        doctest::Approx(441.0).epsilon(1e-12));

  std::vector<double> negated(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) negated[i] = 1.0 - a[i];
  CHECK(ncc_similarity(patch_of(a, 10), patch_of(negated, 10)) ==
        doctest::Approx(-441.0).epsilon(1e-12));

  CHECK(ncc_similarity(patch_of(a, 10), patch_of(b, 10)) ==
        doctest::Approx(ncc_oracle(a, b)).epsilon(1e-10));

  const std::vector<double> flat(441, 0.25);
  CHECK(ncc_similarity(patch_of(a, 10), patch_of(flat, 10)) ==
        -std::numeric_limits<double>::infinity());
}

TEST_CASE("ncc_similarity is bounded by the patch size") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> a(25), b(25);
    for (auto& v : a) v = u(rng);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.7 * a[i] + 0.3 * u(rng);
    const double s = ncc_similarity(patch_of(a, 2), patch_of(b, 2));
    CHECK(s <= 25.0 + 1e-9);
    CHECK(s >= -25.0 - 1e-9);
  }
}

TEST_CASE("subpixel_peak examples") {
  Eigen::Matrix3d r;
  r << 0, 0.5, 0, 0.5, 1.0, 0.5, 0, 0.5, 0;
  CHECK(subpixel_peak(r).x() == 0.0);
  CHECK(subpixel_peak(r).y() == 0.0);

  r << 0, 0, 0, 0.4, 1.0, 0.8, 0, 0, 0;
  const double expected = (0.4 - 0.8) / (2.0 * (0.8 - 2.0 + 0.4));
  CHECK(std::abs(subpixel_peak(r).x() - 0.25) <= 1e-12);
  CHECK(std::abs(subpixel_peak(r).x() - expected) <= 1e-15);

  r.setConstant(0.7);
  CHECK(subpixel_peak(r) == Eigen::Vector2d::Zero());

  // Vertical axis reads the middle column.
  r << 0, 0.8, 0, 0, 1.0, 0, 0, 0.4, 0;
  CHECK(std::abs(subpixel_peak(r).y() + 0.25) <= 1e-12);
}

TEST_CASE("subpixel_peak output stays in range and vanishes on symmetry") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 10000; ++k) {
    Eigen::Matrix3d r;
    for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = u(rng);
    r(1, 1) = 2.0;
    const auto p = subpixel_peak(r);
    CHECK(std::abs(p.x()) <= 1.0);
    CHECK(std::abs(p.y()) <= 1.0);
    r(1, 2) = r(1, 0);
    r(2, 1) = r(0, 1);
    CHECK(subpixel_peak(r) == Eigen::Vector2d::Zero());
  }
}

TEST_CASE("build_warp_pairs layout") {
  const WarpPair base = WarpPair::identity(PairTag::Base);
  WarpPair ext = WarpPair::identity(PairTag::Extended);
  ext.H1 = Homography::translation(4, -2).matrix();
  ext.H2 = Homography::translation(-1, 3).matrix();
  const auto pairs = build_warp_pairs(base, ext);
  REQUIRE(pairs.size() == 51);
  CHECK(pairs[0].tag == PairTag::Base);
  CHECK(pairs[0].H1 == base.H1);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const double rho = kPerturbRotations[i], f = kPerturbShears[j];
      Eigen::Matrix3d A = Eigen::Matrix3d::Identity();
      A(0, 0) = f * std::cos(rho);
      A(0, 1) = -f * std::sin(rho);
      A(1, 0) = std::sin(rho);
      A(1, 1) = std::cos(rho);
      const auto& p1 = pairs[std::size_t(1 + i * 5 + j)];
      const auto& p2 = pairs[std::size_t(26 + i * 5 + j)];
      CHECK(p1.tag == PairTag::PerturbedFirst);
      CHECK(p2.tag == PairTag::PerturbedSecond);
      CHECK((p1.H1 - A * ext.H1).cwiseAbs().maxCoeff() < 1e-15);
      CHECK(p1.H2 == ext.H2);
      CHECK(p2.H1 == ext.H1);
      CHECK((p2.H2 - A * ext.H2).cwiseAbs().maxCoeff() < 1e-15);
    }
  }
}

TEST_CASE("seeds_from_filter") {
  FilterResult res;
  HomographyModel plain;
  plain.H = Homography::translation(5, 1);
  HomographyModel miho;
  miho.miho = MihoPair{Homography::translation(2, 0), Homography::translation(-2, 0)};
  miho.H = miho.miho->composite();
  res.planes = {plain, miho};
  res.assignment = {0, 1, -1};
  const auto seeds = seeds_from_filter(res, 3);
  REQUIRE(seeds.size() == 3);
  CHECK(seeds[0].extended.H1 == Eigen::Matrix3d::Identity());
  CHECK(seeds[0].extended.H2 == plain.H.inverse_matrix());
  CHECK(seeds[1].extended.H1 == miho.miho->H1.matrix());
  CHECK(seeds[1].extended.H2 == miho.miho->H2.matrix());
  CHECK(seeds[2].extended.H1 == Eigen::Matrix3d::Identity());
  CHECK(seeds[2].extended.H2 == Eigen::Matrix3d::Identity());
  CHECK(seeds[2].base.H1 == Eigen::Matrix3d::Identity());
}

TEST_CASE("refine_match: identical images leave exact matches alone") {
  const GrayImage img = noise_texture(96, 96, 7);
  const auto pairs = build_warp_pairs(WarpPair::identity(), WarpPair::identity(PairTag::Extended));
  for (const Match& m : {Match(48, 48, 48, 48), Match(40, 55, 40, 55)}) {
    const auto res = refine_match(img, img, m, pairs);
    REQUIRE(res.ok);
    CHECK(res.t1 == Eigen::Vector2i::Zero());
    CHECK(res.t2 == Eigen::Vector2i::Zero());
    CHECK(res.refined == m);
    CHECK(res.pair_index == 0);
    CHECK(res.score == doctest::Approx(441.0));
  }
}

TEST_CASE("refine_match: integer shift is recovered") {
  const GrayImage img1 = noise_texture(120, 100, 8);
  const GrayImage img2 = shifted(img1, 3, 0);
  const auto pairs = build_warp_pairs(WarpPair::identity(), WarpPair::identity(PairTag::Extended));
  // True match (50, 40) <-> (53, 40), image-1 keypoint off by -3 px.
  const auto res = refine_match(img1, img2, Match(47, 40, 53, 40), pairs);
  REQUIRE(res.ok);
  CHECK(res.t1 - res.t2 == Eigen::Vector2i(3, 0));
  CHECK(res.score == doctest::Approx(441.0));
  const Point2 d = res.refined.p2 - res.refined.p1;
  CHECK((d - Point2(3, 0)).norm() < 0.25);
  CHECK((res.t1.isZero() || res.t2.isZero()));
}

TEST_CASE("refine_match invariants") {
  const GrayImage img1 = noise_texture(128, 128, 9);
  const GrayImage img2 = shifted(img1, 2, -1);
  GrayImage img2_affine = img2;
  for (auto& v : img2_affine.data()) v = 0.5 * v + 0.2;
  const auto pairs = build_warp_pairs(WarpPair::identity(), WarpPair::identity(PairTag::Extended));
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> pos(35, 90), off(-3, 3);
  for (int k = 0; k < 6; ++k) {
    const Point2 x1(pos(rng), pos(rng));
    const Match m(x1 + Point2(off(rng), off(rng)), x1 + Point2(2, -1));
    const auto a = refine_match(img1, img2, m, pairs);
    const auto b = refine_match(img1, img2_affine, m, pairs);
    REQUIRE(a.ok);
    REQUIRE(b.ok);
    CHECK((a.t1.isZero() || a.t2.isZero()));
    CHECK(a.t1 == b.t1);
    CHECK(a.t2 == b.t2);
    CHECK(a.pair_index == b.pair_index);
    CHECK(std::abs(a.p.x()) <= 1.0);
    CHECK(std::abs(a.p.y()) <= 1.0);

    const double base = ncc_similarity(warp_patch(img1, Eigen::Matrix3d::Identity(), m.p1, 10),
                                       warp_patch(img2, Eigen::Matrix3d::Identity(), m.p2, 10));
    CHECK(a.score >= base);
    // Identity pairs move a keypoint by at most (r + 1) px per axis.
    CHECK((a.refined.p1 - m.p1).cwiseAbs().maxCoeff() <= 11.0);
    CHECK((a.refined.p2 - m.p2).cwiseAbs().maxCoeff() <= 11.0);
  }
}

TEST_CASE("refine_match without a valid pair returns the input") {
  const GrayImage img = noise_texture(64, 64, 11);
  const auto pairs = build_warp_pairs(WarpPair::identity(), WarpPair::identity(PairTag::Extended));
  const Match m(1, 1, 62, 62);
  const auto res = refine_match(img, img, m, pairs);
  CHECK_FALSE(res.ok);
  CHECK(res.refined == m);
}

TEST_CASE("refine_matches: half-pixel shift") {
  SceneSpec spec;
  spec.width = 200;
  spec.height = 160;
  spec.seed = 12;
  Eigen::Matrix3d H = Eigen::Matrix3d::Identity();
  H(0, 2) = 0.5;
  const auto pair = render_textured_pair(H, spec, 20);
  std::vector<Match> input;
  for (const auto& m : pair.gt_matches) input.emplace_back(m.p1, m.p1);
  const auto out = refine_matches(pair.img1, pair.img2, input, {});
  const Homography G(H);
  double err = 0.0;
  for (const auto& r : out) err += reprojection_error(G, r.refined);
  CHECK(err / double(out.size()) <= 0.25);
}

TEST_CASE("refine_matches is independent of the thread count") {
  const GrayImage img1 = noise_texture(128, 128, 13);
  const GrayImage img2 = shifted(img1, 1, 2);
  std::vector<Match> ms;
  for (int i = 0; i < 12; ++i) ms.emplace_back(40 + 4 * i, 50 + 2 * i, 42 + 4 * i, 51 + 2 * i);
  NccConfig cfg;
  cfg.threads = 1;
  const auto a = refine_matches(img1, img2, ms, {}, cfg);
  cfg.threads = 4;
  const auto b = refine_matches(img1, img2, ms, {}, cfg);
  for (std::size_t i = 0; i < ms.size(); ++i) {
    CHECK(a[i].refined == b[i].refined);
    CHECK(a[i].score == b[i].score);
  }
  CHECK_THROWS_AS(refine_matches(img1, img2, ms, std::vector<PairSeed>(3), cfg),
                  std::invalid_argument);
}
