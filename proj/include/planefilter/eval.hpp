#pragma once

#include <array>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "planefilter/geometry.hpp"

namespace planefilter {

/// Relative pose with X2 = R X1 + t; `scale` converts t units to meters.
struct PoseGroundTruth {
  Eigen::Matrix3d K1 = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d K2 = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::UnitX();
  std::optional<double> scale;
};

/// Planar ground truth; the image size is needed for the common-area error.
struct HomographyGroundTruth {
  Eigen::Matrix3d H = Eigen::Matrix3d::Identity();
  int width = 0;
  int height = 0;
};

using GroundTruth = std::variant<PoseGroundTruth, HomographyGroundTruth>;

/// Throws std::invalid_argument when R is not a rotation or a K is not
/// upper-triangular with positive diagonal.
void validate(const PoseGroundTruth& gt);

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// F = K2^-T [t]x R K1^-1.
Eigen::Matrix3d fundamental_from_pose(const PoseGroundTruth& gt);

enum class EpipolarNorm {
  Distance,  // point-to-line distance
  Squared,   // literal squared line-normal denominator
};

/// Max of the two point-to-epipolar-line distances; +inf when a line
/// normal is shorter than 1e-12.
double epipolar_error(const Eigen::Matrix3d& F, const Match& m,
                      EpipolarNorm norm = EpipolarNorm::Distance);

/// Integer thresholds 1..16.
inline constexpr int kScoreThresholdMax = 16;

struct MatchScores {
  double recall = 0.0;
  double precision = 0.0;
  double filtered = 0.0;
};

/// Scores from per-match errors. Counts are over thresholds t with e < t.
/// Recall is 0 on a zero denominator, precision is 0 when M is empty and
/// filtered is 0 when M_b is empty.
MatchScores match_scores_from_errors(std::span<const double> base_errors,
                                     std::span<const double> errors);

/// Per-match errors: epipolar under the GT fundamental matrix for a pose,
/// reprojection under H for a planar GT.
std::vector<double> gt_errors(std::span<const Match> matches,
                              const GroundTruth& gt,
                              EpipolarNorm norm = EpipolarNorm::Distance);

MatchScores match_scores(std::span<const Match> base,
                         std::span<const Match> matches, const GroundTruth& gt,
                         EpipolarNorm norm = EpipolarNorm::Distance);

/// f = max(w, h), principal point (w/2, h/2).
Eigen::Matrix3d estimate_intrinsics(double width, double height);

/// Normalized 8-point least squares with rank-2 enforcement. Throws
/// InsufficientMatches below 8 matches and DegenerateConfiguration when the
/// null space is not one-dimensional.
Eigen::Matrix3d fundamental_eight_point(std::span<const Match> matches);

struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
};

/// The four (R, t) choices of an essential matrix, t of unit norm, in the
/// order (R1, t), (R1, -t), (R2, t), (R2, -t).
std::array<Pose, 4> decompose_essential(const Eigen::Matrix3d& E);

/// E = K2^T F K1 from the matches, then decompose_essential.
std::array<Pose, 4> pose_from_fundamental(std::span<const Match> matches,
                                          const Eigen::Matrix3d& K1,
                                          const Eigen::Matrix3d& K2);

/// Degrees, via the trace formula.
double rotation_error_deg(const Eigen::Matrix3d& R_gt, const Eigen::Matrix3d& R);
/// Degrees between directions; 180 when either vector is zero.
double translation_error_deg(const Eigen::Vector3d& t_gt, const Eigen::Vector3d& t);
/// z * || t_m - ||t_m|| t / ||t|| || with t_m the metric GT translation.
double translation_error_metric(const Eigen::Vector3d& t_gt_metric,
                                const Eigen::Vector3d& t, double z = 10.0);

enum class PoseErrorMode { Angular, Metric };

/// min over candidates of max(translation error, rotation error). Metric
/// mode needs gt.scale and throws std::invalid_argument without it.
double pose_error(std::span<const Pose> candidates, const PoseGroundTruth& gt,
                  PoseErrorMode mode = PoseErrorMode::Angular);

struct AucResult {
  std::vector<double> thresholds;
  std::vector<double> values;
  double mean = 0.0;
};

/// AUC@t = mean over pairs of max(0, 1 - e/t). Empty input gives 0.
AucResult auc(std::span<const double> errors, std::span<const double> thresholds);

inline constexpr std::array<double, 3> kPoseAucThresholds = {5.0, 10.0, 20.0};
inline constexpr std::array<double, 3> kHomographyAucThresholds = {5.0, 10.0, 15.0};

/// Mean ||H_est x - H_gt x|| over integer x in [1,w]x[1,h] with H_gt x in
/// the same range, max with the inverse direction. Stride 4 when w*h > 1e6.
/// +inf on an empty common area.
double homography_common_area_error(const Eigen::Matrix3d& H_est,
                                    const Eigen::Matrix3d& H_gt, int width,
                                    int height);

struct EvalReport {
  std::size_t base_count = 0;
  std::size_t count = 0;
  MatchScores scores;
  /// Pose GT: angular pose error (deg) and, with a scale, the metric one.
  std::optional<double> pose_error_angular;
  std::optional<double> pose_error_metric;
  /// Planar GT: common-area error (px).
  std::optional<double> homography_error;
  std::optional<AucResult> auc_F_angular;
  std::optional<AucResult> auc_F_metric;
  std::optional<AucResult> auc_H;
};

/// Full single-pair evaluation. Geometry that cannot be estimated from the
/// predicted matches scores +inf error (AUC 0).
EvalReport evaluate(std::span<const Match> base, std::span<const Match> matches,
                    const GroundTruth& gt,
                    EpipolarNorm norm = EpipolarNorm::Distance);

}  // namespace planefilter
