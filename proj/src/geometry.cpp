#include "planefilter/geometry.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "planefilter/errors.hpp"

namespace planefilter {

namespace {

constexpr double kDetTolerance = 1e-15;
// Relative floor on the smallest non-null singular value (eigenvalue based
// on minimal samples, so not resolvable much below sqrt(epsilon)).
constexpr double kIllConditioned = 1e-7;

struct Normalizer {
  Eigen::Matrix3d T = Eigen::Matrix3d::Identity();
  double mean_distance = 0.0;
};

// Translate centroid to the origin, scale mean distance to sqrt(2).
Normalizer hartley(std::span<const Match> matches, bool first) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& m : matches) c += first ? m.p1 : m.p2;
  c /= static_cast<double>(matches.size());
  double d = 0.0;
  for (const auto& m : matches) d += ((first ? m.p1 : m.p2) - c).norm();
  d /= static_cast<double>(matches.size());
  Normalizer n;
  n.mean_distance = d;
  if (!(d > 0.0)) return n;
  const double s = std::sqrt(2.0) / d;
  n.T << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return n;
}

bool collinear(std::span<const Match> matches, const Eigen::Matrix3d& T,
               bool first) {
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (const auto& m : matches) {
    const Point2& p = first ? m.p1 : m.p2;
    const Eigen::Vector2d q(T(0, 0) * p.x() + T(0, 2), T(1, 1) * p.y() + T(1, 2));
    scatter += q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(scatter);
  const auto ev = es.eigenvalues();
  return !(ev(0) > 1e-12 * ev(1));
}

std::optional<DltFit> fit_impl(std::span<const Match> matches,
                               const char** reason) {
  if (matches.size() < 4) {
    *reason = "fewer than 4 matches";
    return std::nullopt;
  }
  for (const auto& m : matches) {
    if (!m.p1.allFinite() || !m.p2.allFinite()) {
      *reason = "non-finite keypoint";
      return std::nullopt;
    }
  }
  const Normalizer n1 = hartley(matches, true);
  const Normalizer n2 = hartley(matches, false);
  if (!(n1.mean_distance > 0.0) || !(n2.mean_distance > 0.0) ||
      collinear(matches, n1.T, true) || collinear(matches, n2.T, false)) {
    *reason = "collinear or coincident keypoints";
    return std::nullopt;
  }

  const auto rows = static_cast<Eigen::Index>(2 * matches.size());
  Eigen::MatrixXd A(rows, 9);
  Eigen::Index r = 0;
  for (const auto& m : matches) {
    const Eigen::Vector3d a = n1.T * Eigen::Vector3d(m.p1.x(), m.p1.y(), 1.0);
    const Eigen::Vector3d b = n2.T * Eigen::Vector3d(m.p2.x(), m.p2.y(), 1.0);
    const double x = a.x(), y = a.y(), u = b.x(), v = b.y();
    A.row(r++) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    A.row(r++) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
  }

  Eigen::Matrix<double, 9, 1> h;
  double s_small = 0.0;
  double s_large = 0.0;
  if (matches.size() == 4) {
    // Minimal sample: null vector from a QR of A^T, singular values of A
    // from the eigenvalues of A A^T.
    const Eigen::Matrix<double, 8, 9> Af = A;
    const Eigen::Matrix<double, 8, 8> G = Af * Af.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 8, 8>> es(
        G, Eigen::EigenvaluesOnly);
    s_small = std::sqrt(std::max(es.eigenvalues()(0), 0.0));
    s_large = std::sqrt(std::max(es.eigenvalues()(7), 0.0));
    const Eigen::HouseholderQR<Eigen::Matrix<double, 9, 8>> qr(Af.transpose());
    h = qr.householderQ() * Eigen::Matrix<double, 9, 1>::Unit(8);
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    s_small = svd.singularValues()(7);
    s_large = svd.singularValues()(0);
    h = svd.matrixV().col(8);
  }
  if (!(s_small > kIllConditioned * s_large)) {
    *reason = "ill-conditioned null space";
    return std::nullopt;
  }
  Eigen::Matrix3d Hn;
  Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Eigen::Matrix3d H = n2.T.inverse() * Hn * n1.T;
  if (!H.allFinite() || !(std::abs(normalize_homography_matrix(H).determinant()) >
                          kDetTolerance)) {
    *reason = "singular fit";
    return std::nullopt;
  }
  return DltFit{Homography(H), s_small};
}

}  // namespace

Eigen::Matrix3d normalize_homography_matrix(const Eigen::Matrix3d& m) {
  const double n = m.norm();
  if (!(n > 0.0) || !std::isfinite(n)) return m;
  Eigen::Matrix3d out = m / n;
  Eigen::Index bi = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < 9; ++i) {
    const double a = std::abs(out(i / 3, i % 3));
    if (a > best) {
      best = a;
      bi = i;
    }
  }
  if (out(bi / 3, bi % 3) < 0.0) out = -out;
  return out;
}

Homography::Homography()
    : h_(Eigen::Matrix3d::Identity() / std::sqrt(3.0)),
      inv_(Eigen::Matrix3d::Identity() / std::sqrt(3.0)) {}

Homography::Homography(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) throw SingularHomography("non-finite homography");
  h_ = normalize_homography_matrix(m);
  if (!(std::abs(h_.determinant()) > kDetTolerance)) {
    throw SingularHomography();
  }
  inv_ = normalize_homography_matrix(h_.inverse());
}

Homography Homography::from_normalized(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) throw SingularHomography("non-finite homography");
  if (!(std::abs(m.determinant()) > kDetTolerance)) throw SingularHomography();
  Homography out;
  out.h_ = m;
  out.inv_ = normalize_homography_matrix(m.inverse());
  return out;
}

Homography Homography::translation(double dx, double dy) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = dx;
  m(1, 2) = dy;
  return Homography(m);
}

Homography Homography::inverse() const {
  Homography out;
  out.h_ = inv_;
  out.inv_ = h_;
  return out;
}

Homography Homography::operator*(const Homography& rhs) const {
  return Homography(h_ * rhs.h_);
}

std::optional<Point2> Homography::map(const Point2& p) const {
  const Eigen::Vector3d q = forward_h(p);
  if (!(std::abs(q.z()) > kInfinityTolerance)) return std::nullopt;
  return Point2(q.x() / q.z(), q.y() / q.z());
}

std::optional<Point2> Homography::unmap(const Point2& p) const {
  const Eigen::Vector3d q = backward_h(p);
  if (!(std::abs(q.z()) > kInfinityTolerance)) return std::nullopt;
  return Point2(q.x() / q.z(), q.y() / q.z());
}

DltFit fit_homography_dlt(std::span<const Match> matches) {
  const char* reason = "";
  auto fit = fit_impl(matches, &reason);
  if (!fit) throw DegenerateSample(reason);
  return *fit;
}

std::optional<DltFit> try_fit_homography_dlt(std::span<const Match> matches) {
  const char* reason = "";
  return fit_impl(matches, &reason);
}

double reprojection_error(const Homography& H, const Match& m) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto fwd = H.map(m.p1);
  if (!fwd) return inf;
  const auto bwd = H.unmap(m.p2);
  if (!bwd) return inf;
  return std::max((m.p2 - *fwd).norm(), (m.p1 - *bwd).norm());
}

bool is_quasi_affine(const Homography& H, const Match& anchor, const Match& m) {
  const double wa = H.forward_h(anchor.p1).z();
  const double wm = H.forward_h(m.p1).z();
  if (!(wa * wm > 0.0)) return false;
  const double va = H.backward_h(anchor.p2).z();
  const double vm = H.backward_h(m.p2).z();
  return va * vm > 0.0;
}

std::vector<std::size_t> quasi_affine_set(const Homography& H,
                                          const Match& anchor,
                                          std::span<const Match> matches) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (is_quasi_affine(H, anchor, matches[i])) out.push_back(i);
  }
  return out;
}

double model_error(const HomographyModel& model, const Match& m) {
  if (!model.miho) return reprojection_error(model.H, m);
  const Point2 mid = model.miho->midpoint(m);
  const double e1 = reprojection_error(model.miho->H1, Match(m.p1, mid));
  const double e2 = reprojection_error(model.miho->H2, Match(m.p2, mid));
  return std::max(e1, e2);
}

bool model_quasi_affine(const HomographyModel& model, const Match& m) {
  if (!model.miho) return is_quasi_affine(model.H, model.anchor, m);
  const Point2 mid = model.miho->midpoint(m);
  const Point2 amid = model.miho->midpoint(model.anchor);
  return is_quasi_affine(model.miho->H1, Match(model.anchor.p1, amid),
                         Match(m.p1, mid)) &&
         is_quasi_affine(model.miho->H2, Match(model.anchor.p2, amid),
                         Match(m.p2, mid));
}

double effective_error(const HomographyModel& model, const Match& m) {
  if (!model_quasi_affine(model, m)) {
    return std::numeric_limits<double>::infinity();
  }
  return model_error(model, m);
}

std::vector<std::size_t> inlier_set(const HomographyModel& model,
                                    std::span<const Match> matches, double t) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (effective_error(model, matches[i]) <= t) out.push_back(i);
  }
  return out;
}

bool sample_degeneracy_check(std::span<const Match> sample,
                             double smallest_singular, double min_distance) {
  for (std::size_t i = 0; i < sample.size(); ++i) {
    for (std::size_t j = i + 1; j < sample.size(); ++j) {
      if ((sample[i].p1 - sample[j].p1).norm() < min_distance) return false;
      if ((sample[i].p2 - sample[j].p2).norm() < min_distance) return false;
    }
  }
  return smallest_singular > kMinSingularValue;
}

bool sample_is_quasi_affine(const Homography& H, std::span<const Match> sample) {
  if (sample.empty()) return true;
  for (const auto& m : sample) {
    if (!is_quasi_affine(H, sample.front(), m)) return false;
  }
  return true;
}

Point2 rotate_quarter_turns(const Point2& p, int quarter_turns,
                            const Point2& center) {
  const int q = ((quarter_turns % 4) + 4) % 4;
  const double dx = p.x() - center.x();
  const double dy = p.y() - center.y();
  switch (q) {
    case 1:
      return {center.x() - dy, center.y() + dx};
    case 2:
      return {center.x() - dx, center.y() - dy};
    case 3:
      return {center.x() + dy, center.y() - dx};
    default:
      return p;
  }
}

Eigen::Matrix3d quarter_turn_matrix(int quarter_turns, const Point2& center) {
  const int q = ((quarter_turns % 4) + 4) % 4;
  static constexpr double kCos[4] = {1, 0, -1, 0};
  static constexpr double kSin[4] = {0, 1, 0, -1};
  Eigen::Matrix2d R;
  R << kCos[q], -kSin[q], kSin[q], kCos[q];
  Eigen::Matrix3d M = Eigen::Matrix3d::Identity();
  M.topLeftCorner<2, 2>() = R;
  M.topRightCorner<2, 1>() = center - R * center;
  return M;
}

}  // namespace planefilter
