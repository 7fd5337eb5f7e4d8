#include "planefilter/ncc.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <tuple>

#include <Eigen/Dense>

#include "planefilter/errors.hpp"
#include "planefilter/parallel.hpp"

namespace planefilter {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::optional<Point2> apply(const Eigen::Matrix3d& H, const Point2& p) {
  const Eigen::Vector3d q = H * Eigen::Vector3d(p.x(), p.y(), 1.0);
  if (!(std::abs(q.z()) > kInfinityTolerance)) return std::nullopt;
  if (q.z() == 1.0) return Point2(q.x(), q.y());
  return Point2(q.x() / q.z(), q.y() / q.z());
}

bool invertible(const Eigen::Matrix3d& H) {
  return H.allFinite() &&
         std::abs(normalize_homography_matrix(H).determinant()) > 1e-15;
}

// Square sample grid of the warped image around `c` with per-window box
// statistics for windows of radius r.
class Grid {
 public:
  Grid(const GrayImage& img, const Eigen::Matrix3d& Hinv, const Point2& c,
       int radius, int r)
      : R_(radius), size_(2 * radius + 1), r_(r), v_(size_ * size_), bad_(size_ * size_) {
    for (int i = 0; i < size_; ++i) {
      for (int j = 0; j < size_; ++j) {
        const Point2 w(c.x() + (j - R_), c.y() + (i - R_));
        const auto src = apply(Hinv, w);
        bool inside = false;
        double v = 0.0;
        if (src) v = bilinear(img, src->x(), src->y(), &inside);
        v_[i * size_ + j] = v;
        bad_[i * size_ + j] = inside ? 0 : 1;
      }
    }
    box_stats();
  }

  int radius() const { return R_; }
  int window() const { return 2 * r_ + 1; }
  double value(int i, int j) const { return v_[i * size_ + j]; }
  const double* row(int i) const { return v_.data() + i * size_; }
  std::size_t invalid_at(int i, int j) const { return bad_[i * size_ + j]; }

  // Window centered at offset (ox, oy) from the grid center.
  struct Window {
    const double* origin;
    double mean;
    double var;
    bool usable;
  };

  Window window_at(int ox, int oy) const {
    const int n = window();
    const int ci = R_ + oy;
    const int cj = R_ + ox;
    const int k = (ci - r_) * stats_w_ + (cj - r_);
    const double count = static_cast<double>(n) * n;
    Window w;
    w.origin = v_.data() + (ci - r_) * size_ + (cj - r_);
    w.mean = sum_[k] / count;
    w.var = sumsq_[k] / count - w.mean * w.mean;
    w.usable = static_cast<double>(invalid_[k]) <= kMaxInvalidFraction * count;
    return w;
  }

  int stride() const { return size_; }

 private:
  void box_stats() {
    const int n = window();
    stats_w_ = size_ - n + 1;
    std::vector<double> rs(static_cast<std::size_t>(size_) * stats_w_);
    std::vector<double> rq(rs.size());
    std::vector<int> rb(rs.size());
    for (int i = 0; i < size_; ++i) {
      for (int j = 0; j < stats_w_; ++j) {
        double s = 0.0, q = 0.0;
        int b = 0;
        for (int d = 0; d < n; ++d) {
          const double v = v_[i * size_ + j + d];
          s += v;
          q += v * v;
          b += bad_[i * size_ + j + d];
        }
        rs[i * stats_w_ + j] = s;
        rq[i * stats_w_ + j] = q;
        rb[i * stats_w_ + j] = b;
      }
    }
    const std::size_t m = static_cast<std::size_t>(stats_w_) * stats_w_;
    sum_.assign(m, 0.0);
    sumsq_.assign(m, 0.0);
    invalid_.assign(m, 0);
    for (int i = 0; i < stats_w_; ++i) {
      for (int j = 0; j < stats_w_; ++j) {
        double s = 0.0, q = 0.0;
        int b = 0;
        for (int d = 0; d < n; ++d) {
          s += rs[(i + d) * stats_w_ + j];
          q += rq[(i + d) * stats_w_ + j];
          b += rb[(i + d) * stats_w_ + j];
        }
        sum_[i * stats_w_ + j] = s;
        sumsq_[i * stats_w_ + j] = q;
        invalid_[i * stats_w_ + j] = b;
      }
    }
  }

  int R_;
  int size_;
  int r_;
  int stats_w_ = 0;
  std::vector<double> v_;
  std::vector<std::uint8_t> bad_;
  std::vector<double> sum_;
  std::vector<double> sumsq_;
  std::vector<int> invalid_;
};

// Symmetric in its arguments bit for bit.
double ncc_windows(const Grid::Window& a, int stride_a, const Grid::Window& b,
                   int stride_b, int n) {
  if (!a.usable || !b.usable) return kNegInf;
  if (!(a.var > kMinPatchVariance) || !(b.var > kMinPatchVariance)) return kNegInf;
  double sab = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* pa = a.origin + i * stride_a;
    const double* pb = b.origin + i * stride_b;
    for (int j = 0; j < n; ++j) sab += pa[j] * pb[j];
  }
  const double count = static_cast<double>(n) * n;
  return (sab - count * (a.mean * b.mean)) / std::sqrt(a.var * b.var);
}

// Similarity between the grid-1 window at o1 and the grid-2 window at o2.
double ncc_at(const Grid& g1, int o1x, int o1y, const Grid& g2, int o2x, int o2y) {
  return ncc_windows(g1.window_at(o1x, o1y), g1.stride(), g2.window_at(o2x, o2y),
                     g2.stride(), g1.window());
}

struct Candidate {
  double score = kNegInf;
  std::size_t pair = 0;
  int branch = 0;  // 0: image 1 is the template (t2 = t), 1: image 2 is
  int tx = 0;
  int ty = 0;
  bool set = false;
};

// Higher score, then base pair, then smaller |t|, then (pair, branch, t).
// Scores closer than `tie` count as equal so that rounding noise between
// equally good alignments cannot decide.
bool better(const Candidate& a, const Candidate& b, double tie) {
  if (!b.set) return true;
  if (std::abs(a.score - b.score) > tie) return a.score > b.score;
  const bool abase = a.pair == 0, bbase = b.pair == 0;
  if (abase != bbase) return abase;
  const int na = a.tx * a.tx + a.ty * a.ty;
  const int nb = b.tx * b.tx + b.ty * b.ty;
  if (na != nb) return na < nb;
  return std::tie(a.pair, a.branch, a.ty, a.tx) < std::tie(b.pair, b.branch, b.ty, b.tx);
}

struct PairGeometry {
  Point2 c1, c2;
  Eigen::Matrix3d H1inv, H2inv;
};

std::optional<PairGeometry> pair_geometry(const WarpPair& pair, const Match& m) {
  if (!invertible(pair.H1) || !invertible(pair.H2)) return std::nullopt;
  PairGeometry g;
  g.H1inv = pair.H1.inverse();
  g.H2inv = pair.H2.inverse();
  const auto c1 = apply(pair.H1, m.p1);
  const auto c2 = apply(pair.H2, m.p2);
  if (!c1 || !c2) return std::nullopt;
  g.c1 = *c1;
  g.c2 = *c2;
  return g;
}

bool same_pair(const WarpPair& a, const WarpPair& b) {
  return a.H1 == b.H1 && a.H2 == b.H2;
}

}  // namespace

Eigen::Matrix3d perturbation_matrix(double rho, double f) {
  const double c = std::cos(rho);
  const double s = std::sin(rho);
  Eigen::Matrix3d A;
  A << f * c, -f * s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return A;
}

std::vector<WarpPair> build_warp_pairs(const WarpPair& base,
                                       const WarpPair& extended) {
  std::vector<WarpPair> out;
  out.reserve(51);
  WarpPair b = base;
  b.tag = PairTag::Base;
  b.rho = 0.0;
  b.f = 1.0;
  out.push_back(b);
  for (int side = 0; side < 2; ++side) {
    for (double rho : kPerturbRotations) {
      for (double f : kPerturbShears) {
        WarpPair p = extended;
        p.rho = rho;
        p.f = f;
        const Eigen::Matrix3d A = perturbation_matrix(rho, f);
        if (side == 0) {
          p.H1 = A * extended.H1;
          p.tag = PairTag::PerturbedFirst;
        } else {
          p.H2 = A * extended.H2;
          p.tag = PairTag::PerturbedSecond;
        }
        out.push_back(p);
      }
    }
  }
  return out;
}

Patch warp_patch(const GrayImage& img, const Eigen::Matrix3d& H,
                 const Point2& center, int r) {
  if (r < 0) throw std::invalid_argument("negative patch radius");
  if (!invertible(H)) throw SingularHomography();
  const Eigen::Matrix3d Hinv = H.inverse();
  const auto c = apply(H, center);
  if (!c) throw OutOfBounds("patch center maps to infinity");
  Patch p;
  p.radius = r;
  const int n = 2 * r + 1;
  p.values.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Point2 w(c->x() + (j - r), c->y() + (i - r));
      const auto src = apply(Hinv, w);
      bool inside = false;
      double v = 0.0;
      if (src) v = bilinear(img, src->x(), src->y(), &inside);
      p.values[i * n + j] = v;
      if (!inside) ++p.invalid;
    }
  }
  if (static_cast<double>(p.invalid) > kMaxInvalidFraction * p.values.size()) {
    throw OutOfBounds();
  }
  return p;
}

Patch warp_patch(const GrayImage& img, const Homography& H,
                 const Point2& center, int r) {
  return warp_patch(img, H.matrix(), center, r);
}

double ncc_similarity(const Patch& a, const Patch& b) {
  if (a.radius != b.radius || a.values.size() != b.values.size()) {
    throw std::invalid_argument("patch radius mismatch");
  }
  const double count = static_cast<double>(a.values.size());
  double sa = 0.0, sb = 0.0, qa = 0.0, qb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double x = a.values[i], y = b.values[i];
    sa += x;
    sb += y;
    qa += x * x;
    qb += y * y;
    sab += x * y;
  }
  const double ma = sa / count, mb = sb / count;
  const double va = qa / count - ma * ma;
  const double vb = qb / count - mb * mb;
  if (!(va > kMinPatchVariance) || !(vb > kMinPatchVariance)) return kNegInf;
  return (sab - count * (ma * mb)) / std::sqrt(va * vb);
}

Eigen::Vector2d subpixel_peak(const Eigen::Matrix3d& response) {
  auto axis = [](double minus, double center, double plus) {
    if (!std::isfinite(minus) || !std::isfinite(center) || !std::isfinite(plus)) {
      return 0.0;
    }
    const double den = plus - 2.0 * center + minus;
    if (!(den < -1e-12)) return 0.0;
    const double p = (minus - plus) / (2.0 * den);
    if (!std::isfinite(p)) return 0.0;
    return std::clamp(p, -1.0, 1.0) + 0.0;  // no negative zero
  };
  return {axis(response(1, 0), response(1, 1), response(1, 2)),
          axis(response(0, 1), response(1, 1), response(2, 1))};
}

RefinedMatch refine_match(const GrayImage& img1, const GrayImage& img2,
                          const Match& m, std::span<const WarpPair> pairs,
                          const NccConfig& cfg) {
  const int r = cfg.radius;
  if (r < 1) throw std::invalid_argument("NCC radius must be >= 1");
  const int R = 2 * r + 1;  // search grid radius: offsets up to r, +1 for sub-pixel

  RefinedMatch out;
  out.refined = m;
  Candidate best;
  const double tie = kScoreTieTolerance * (2.0 * r + 1) * (2.0 * r + 1);

  for (std::size_t k = 0; k < pairs.size(); ++k) {
    bool duplicate = false;
    for (std::size_t j = 0; j < k && !duplicate; ++j) {
      duplicate = same_pair(pairs[j], pairs[k]);
    }
    if (duplicate) continue;  // identical scores, the earlier index wins ties
    const auto geo = pair_geometry(pairs[k], m);
    if (!geo) continue;
    const Grid g1(img1, geo->H1inv, geo->c1, R, r);
    const Grid g2(img2, geo->H2inv, geo->c2, R, r);
    for (int branch = 0; branch < 2; ++branch) {
      for (int ty = -r; ty <= r; ++ty) {
        for (int tx = -r; tx <= r; ++tx) {
          if (branch == 1 && tx == 0 && ty == 0) continue;  // same as branch 0
          const double s = branch == 0 ? ncc_at(g1, 0, 0, g2, tx, ty)
                                       : ncc_at(g1, tx, ty, g2, 0, 0);
          if (s == kNegInf) continue;
          const Candidate c{s, k, branch, tx, ty, true};
          if (better(c, best, tie)) best = c;
        }
      }
    }
  }
  if (!best.set) return out;

  const WarpPair& pair = pairs[best.pair];
  const auto geo = pair_geometry(pair, m);
  const Grid g1(img1, geo->H1inv, geo->c1, R, r);
  const Grid g2(img2, geo->H2inv, geo->c2, R, r);
  const bool zero = best.tx == 0 && best.ty == 0;

  Eigen::Matrix3d resp;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      double s;
      if (zero) {
        // Average of both template directions, displacement on image 2.
        s = dx == 0 && dy == 0
                ? best.score
                : 0.5 * (ncc_at(g1, 0, 0, g2, dx, dy) + ncc_at(g1, -dx, -dy, g2, 0, 0));
      } else if (best.branch == 0) {
        s = ncc_at(g1, 0, 0, g2, best.tx + dx, best.ty + dy);
      } else {
        s = ncc_at(g1, best.tx + dx, best.ty + dy, g2, 0, 0);
      }
      resp(dy + 1, dx + 1) = s;
    }
  }
  const Eigen::Vector2d p = subpixel_peak(resp);
  const Eigen::Vector2d t(best.tx, best.ty);

  out.ok = true;
  out.best_pair = pair;
  out.pair_index = best.pair;
  out.score = best.score;
  out.p = p;
  const bool move_first = !zero && best.branch == 1;
  if (move_first) {
    out.t1 = Eigen::Vector2i(best.tx, best.ty);
    if (const auto x = apply(geo->H1inv, geo->c1 + t + p)) out.refined.p1 = *x;
  } else {
    out.t2 = Eigen::Vector2i(best.tx, best.ty);
    if (!zero || p.x() != 0.0 || p.y() != 0.0) {
      if (const auto x = apply(geo->H2inv, geo->c2 + t + p)) out.refined.p2 = *x;
    }
  }
  return out;
}

std::vector<PairSeed> seeds_from_filter(const FilterResult& result,
                                        std::size_t match_count) {
  std::vector<PairSeed> seeds(match_count);
  for (std::size_t i = 0; i < match_count && i < result.assignment.size(); ++i) {
    const int a = result.assignment[i];
    if (a < 0) continue;
    const HomographyModel& plane = result.planes[static_cast<std::size_t>(a)];
    if (plane.miho) {
      seeds[i].extended = WarpPair::from(plane.miho->H1, plane.miho->H2);
    } else {
      // Image 2 is taken into the image-1 plane.
      seeds[i].extended =
          WarpPair::from(Homography::identity(), plane.H.inverse());
      seeds[i].extended.H1 = Eigen::Matrix3d::Identity();
    }
  }
  return seeds;
}

std::vector<RefinedMatch> refine_matches(const GrayImage& img1,
                                         const GrayImage& img2,
                                         std::span<const Match> matches,
                                         std::span<const PairSeed> seeds,
                                         const NccConfig& cfg) {
  if (!seeds.empty() && seeds.size() != matches.size()) {
    throw std::invalid_argument("one pair seed per match required");
  }
  std::vector<RefinedMatch> out(matches.size());
  const PairSeed identity;
  parallel_for(matches.size(), resolve_thread_count(cfg.threads), [&](std::size_t i) {
    const PairSeed& s = seeds.empty() ? identity : seeds[i];
    const auto pairs = build_warp_pairs(s.base, s.extended);
    out[i] = refine_match(img1, img2, matches[i], pairs, cfg);
  });
  return out;
}

}  // namespace planefilter
