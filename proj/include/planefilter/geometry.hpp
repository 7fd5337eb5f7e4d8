#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace planefilter {

using Point2 = Eigen::Vector2d;

/// A pair of corresponding keypoints in pixel coordinates.
struct Match {
  Point2 p1 = Point2::Zero();  // image 1
  Point2 p2 = Point2::Zero();  // image 2

  Match() = default;
  Match(Point2 a, Point2 b) : p1(std::move(a)), p2(std::move(b)) {}
  Match(double x1, double y1, double x2, double y2) : p1(x1, y1), p2(x2, y2) {}

  Match swapped() const { return {p2, p1}; }
  bool operator==(const Match& o) const { return p1 == o.p1 && p2 == o.p2; }
};

/// Rigid rotation about `center` by a multiple of 90 degrees (quarter_turns
/// counter-clockwise in x-right/y-up convention), using exact coordinate
/// swaps.
Point2 rotate_quarter_turns(const Point2& p, int quarter_turns,
                            const Point2& center);
Eigen::Matrix3d quarter_turn_matrix(int quarter_turns, const Point2& center);

/// Invertible 3x3 projective map, stored with unit Frobenius norm and the
/// largest-magnitude entry positive. The inverse is cached at construction.
class Homography {
 public:
  Homography();
  /// Throws SingularHomography when `m` is not invertible or not finite.
  explicit Homography(const Eigen::Matrix3d& m);

  static Homography identity() { return Homography(); }
  /// Rebuilds a homography from a matrix() value without renormalizing, so
  /// serialized homographies restore bit for bit.
  static Homography from_normalized(const Eigen::Matrix3d& m);
  static Homography translation(double dx, double dy);

  const Eigen::Matrix3d& matrix() const { return h_; }
  const Eigen::Matrix3d& inverse_matrix() const { return inv_; }
  Homography inverse() const;

  /// Composition: (a * b) maps x to a(b(x)).
  Homography operator*(const Homography& rhs) const;

  Eigen::Vector3d forward_h(const Point2& p) const {
    return h_ * Eigen::Vector3d(p.x(), p.y(), 1.0);
  }
  Eigen::Vector3d backward_h(const Point2& p) const {
    return inv_ * Eigen::Vector3d(p.x(), p.y(), 1.0);
  }
  /// nullopt when the point maps to (near) the plane at infinity.
  std::optional<Point2> map(const Point2& p) const;
  std::optional<Point2> unmap(const Point2& p) const;

 private:
  Eigen::Matrix3d h_;
  Eigen::Matrix3d inv_;
};

/// Projective points with |w| below this are treated as being at infinity.
inline constexpr double kInfinityTolerance = 1e-12;

/// Normalizes scale and sign of a homogeneous 3x3 matrix (unit Frobenius
/// norm, largest-magnitude entry positive).
Eigen::Matrix3d normalize_homography_matrix(const Eigen::Matrix3d& m);

struct DltFit {
  Homography H;
  /// Smallest non-null singular value of the Hartley-normalized system
  /// (the 8th one; for 4 matches the 9th is exactly zero).
  double smallest_singular = 0.0;
};

/// Normalized DLT over >= 4 matches. Throws DegenerateSample.
DltFit fit_homography_dlt(std::span<const Match> matches);
/// Non-throwing variant used in sampling loops.
std::optional<DltFit> try_fit_homography_dlt(std::span<const Match> matches);

/// Maximum of forward and backward transfer distances, +inf when either
/// reprojection lands at infinity.
double reprojection_error(const Homography& H, const Match& m);

/// Forward sign test against anchor.p1 under H and reverse sign test
/// against anchor.p2 under H^-1.
bool is_quasi_affine(const Homography& H, const Match& anchor, const Match& m);

std::vector<std::size_t> quasi_affine_set(const Homography& H,
                                          const Match& anchor,
                                          std::span<const Match> matches);

/// Tied homographies taking each image into the shared middle plane.
struct MihoPair {
  Homography H1;  // image 1 -> middle
  Homography H2;  // image 2 -> middle
  /// Midpoints are taken after turning image-2 keypoints back by this many
  /// quarter turns about `center` (non-zero after rotation fixing).
  int quarter_turns = 0;
  Point2 center = Point2::Zero();

  /// Image 1 -> image 2 map H2^-1 * H1.
  Homography composite() const { return H2.inverse() * H1; }
  Point2 midpoint(const Match& m) const {
    const Point2 p2 = quarter_turns == 0
                          ? m.p2
                          : rotate_quarter_turns(m.p2, -quarter_turns, center);
    return 0.5 * (m.p1 + p2);
  }
};

/// A RANSAC plane: its homography, the anchor sample match (s11, s21) and
/// inlier bookkeeping. When `miho` is set, inlier tests run on the split
/// halves through the pair and `H` holds the composite.
struct HomographyModel {
  Homography H;
  Match anchor;
  std::optional<MihoPair> miho;
  std::vector<std::size_t> inliers_weak;
  std::vector<std::size_t> inliers_strong;
};

/// Reprojection error of `m` under the model ignoring quasi-affinity. For a
/// MiHo model this is the max over both half matches.
double model_error(const HomographyModel& model, const Match& m);

/// Quasi-affinity of `m` with respect to the model's anchor.
bool model_quasi_affine(const HomographyModel& model, const Match& m);

/// model_error when quasi-affine, +inf otherwise. A match is an inlier at t
/// iff effective_error <= t.
double effective_error(const HomographyModel& model, const Match& m);

std::vector<std::size_t> inlier_set(const HomographyModel& model,
                                    std::span<const Match> matches, double t);

/// Pairwise keypoint distance >= min_distance in both images and
/// smallest_singular > kMinSingularValue.
bool sample_degeneracy_check(std::span<const Match> sample,
                             double smallest_singular, double min_distance);

inline constexpr double kMinSingularValue = 0.05;

/// Every sample keypoint in image 1 (resp. image 2) maps with a consistent
/// sign of the last homogeneous coordinate through H (resp. H^-1).
bool sample_is_quasi_affine(const Homography& H, std::span<const Match> sample);


}  // namespace planefilter
