#include "planefilter/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "planefilter/errors.hpp"

namespace planefilter {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double acos_deg(double c) { return std::acos(std::clamp(c, -1.0, 1.0)) * kRadToDeg; }

Eigen::Matrix3d hartley_transform(std::span<const Match> matches, bool first) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& m : matches) c += first ? m.p1 : m.p2;
  c /= static_cast<double>(matches.size());
  double d = 0.0;
  for (const auto& m : matches) d += ((first ? m.p1 : m.p2) - c).norm();
  d /= static_cast<double>(matches.size());
  if (!(d > 0.0)) throw DegenerateConfiguration("coincident keypoints");
  const double s = std::sqrt(2.0) / d;
  Eigen::Matrix3d T;
  T << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return T;
}

// Raw (non-normalized) homogeneous mapping; nullopt at infinity.
bool map_point(const Eigen::Matrix3d& H, double x, double y, double& u, double& v) {
  const Eigen::Vector3d q = H * Eigen::Vector3d(x, y, 1.0);
  if (!(std::abs(q.z()) > kInfinityTolerance)) return false;
  u = q.x() / q.z();
  v = q.y() / q.z();
  return std::isfinite(u) && std::isfinite(v);
}

double mean_transfer_error(const Eigen::Matrix3d& H_est, const Eigen::Matrix3d& H_gt,
                           int width, int height, bool& empty) {
  const int stride = static_cast<double>(width) * height > 1e6 ? 4 : 1;
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 1; y <= height; y += stride) {
    for (int x = 1; x <= width; x += stride) {
      double gu, gv;
      if (!map_point(H_gt, x, y, gu, gv)) continue;
      if (gu < 1.0 || gu > width || gv < 1.0 || gv > height) continue;
      double eu, ev;
      if (!map_point(H_est, x, y, eu, ev)) {
        sum = kInf;
        ++count;
        continue;
      }
      sum += std::hypot(eu - gu, ev - gv);
      ++count;
    }
  }
  empty = count == 0;
  return empty ? kInf : sum / static_cast<double>(count);
}

}  // namespace

void validate(const PoseGroundTruth& gt) {
  if (!gt.R.allFinite() ||
      !(gt.R.transpose() * gt.R).isApprox(Eigen::Matrix3d::Identity(), 1e-6) ||
      std::abs(gt.R.determinant() - 1.0) > 1e-6) {
    throw std::invalid_argument("R is not a rotation matrix");
  }
  for (const Eigen::Matrix3d* K : {&gt.K1, &gt.K2}) {
    const Eigen::Matrix3d& k = *K;
    if (!k.allFinite() || k(1, 0) != 0.0 || k(2, 0) != 0.0 || k(2, 1) != 0.0 ||
        !(k(0, 0) > 0.0) || !(k(1, 1) > 0.0) || !(k(2, 2) > 0.0)) {
      throw std::invalid_argument("K must be upper-triangular with positive diagonal");
    }
  }
  if (!gt.t.allFinite()) throw std::invalid_argument("non-finite translation");
  if (gt.scale && !(*gt.scale > 0.0)) throw std::invalid_argument("scale must be positive");
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d S;
  S << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return S;
}

Eigen::Matrix3d fundamental_from_pose(const PoseGroundTruth& gt) {
  return gt.K2.inverse().transpose() * skew(gt.t) * gt.R * gt.K1.inverse();
}

double epipolar_error(const Eigen::Matrix3d& F, const Match& m, EpipolarNorm norm) {
  const Eigen::Vector3d x1(m.p1.x(), m.p1.y(), 1.0);
  const Eigen::Vector3d x2(m.p2.x(), m.p2.y(), 1.0);
  const Eigen::Vector3d l2 = F * x1;              // line in image 2
  const Eigen::Vector3d l1 = F.transpose() * x2;  // line in image 1
  const double n2 = l2.head<2>().norm();
  const double n1 = l1.head<2>().norm();
  if (!(n1 >= 1e-12) || !(n2 >= 1e-12)) return kInf;
  const double r = std::abs(x2.dot(l2));
  if (norm == EpipolarNorm::Squared) return std::max(r / (n2 * n2), r / (n1 * n1));
  return std::max(r / n2, r / n1);
}

MatchScores match_scores_from_errors(std::span<const double> base_errors,
                                     std::span<const double> errors) {
  auto hits = [](std::span<const double> es) {
    std::size_t total = 0;
    for (double e : es) {
      for (int t = 1; t <= kScoreThresholdMax; ++t) total += e < t ? 1 : 0;
    }
    return total;
  };
  const std::size_t num = hits(errors);
  const std::size_t den = hits(base_errors);
  MatchScores s;
  s.recall = den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  s.precision = errors.empty()
                    ? 0.0
                    : static_cast<double>(num) /
                          (static_cast<double>(errors.size()) * kScoreThresholdMax);
  s.filtered = base_errors.empty()
                   ? 0.0
                   : 1.0 - static_cast<double>(errors.size()) /
                               static_cast<double>(base_errors.size());
  return s;
}

std::vector<double> gt_errors(std::span<const Match> matches, const GroundTruth& gt,
                              EpipolarNorm norm) {
  std::vector<double> out;
  out.reserve(matches.size());
  if (const auto* pose = std::get_if<PoseGroundTruth>(&gt)) {
    const Eigen::Matrix3d F = fundamental_from_pose(*pose);
    for (const auto& m : matches) out.push_back(epipolar_error(F, m, norm));
  } else {
    const Homography H(std::get<HomographyGroundTruth>(gt).H);
    for (const auto& m : matches) out.push_back(reprojection_error(H, m));
  }
  return out;
}

MatchScores match_scores(std::span<const Match> base, std::span<const Match> matches,
                         const GroundTruth& gt, EpipolarNorm norm) {
  const auto eb = gt_errors(base, gt, norm);
  const auto em = gt_errors(matches, gt, norm);
  return match_scores_from_errors(eb, em);
}

Eigen::Matrix3d estimate_intrinsics(double width, double height) {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  const double f = std::max(width, height);
  K(0, 0) = f;
  K(1, 1) = f;
  K(0, 2) = width / 2.0;
  K(1, 2) = height / 2.0;
  return K;
}

Eigen::Matrix3d fundamental_eight_point(std::span<const Match> matches) {
  if (matches.size() < 8) throw InsufficientMatches("8-point needs at least 8 matches");
  const Eigen::Matrix3d T1 = hartley_transform(matches, true);
  const Eigen::Matrix3d T2 = hartley_transform(matches, false);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(matches.size()), 9);
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const Eigen::Vector3d a = T1 * Eigen::Vector3d(matches[i].p1.x(), matches[i].p1.y(), 1.0);
    const Eigen::Vector3d b = T2 * Eigen::Vector3d(matches[i].p2.x(), matches[i].p2.y(), 1.0);
    A.row(static_cast<Eigen::Index>(i)) << b.x() * a.x(), b.x() * a.y(), b.x(), b.y() * a.x(),
        b.y() * a.y(), b.y(), a.x(), a.y(), 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() < 8 || !(sv(7) > 1e-10 * sv(0))) {
    throw DegenerateConfiguration("8-point null space is not one-dimensional");
  }
  const Eigen::VectorXd f = svd.matrixV().col(8);
  Eigen::Matrix3d Fn;
  Fn << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);
  Eigen::JacobiSVD<Eigen::Matrix3d> s2(Fn, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d d = s2.singularValues();
  d(2) = 0.0;
  Fn = s2.matrixU() * d.asDiagonal() * s2.matrixV().transpose();
  Eigen::Matrix3d F = T2.transpose() * Fn * T1;
  const double n = F.norm();
  if (!(n > 0.0) || !F.allFinite()) throw DegenerateConfiguration("null fundamental matrix");
  return F / n;
}

std::array<Pose, 4> decompose_essential(const Eigen::Matrix3d& E) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d U = svd.matrixU();
  Eigen::Matrix3d V = svd.matrixV();
  if (U.determinant() < 0) U = -U;
  if (V.determinant() < 0) V = -V;
  Eigen::Matrix3d W;
  W << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Eigen::Matrix3d R1 = U * W * V.transpose();
  const Eigen::Matrix3d R2 = U * W.transpose() * V.transpose();
  const Eigen::Vector3d t = U.col(2);
  return {Pose{R1, t}, Pose{R1, -t}, Pose{R2, t}, Pose{R2, -t}};
}

std::array<Pose, 4> pose_from_fundamental(std::span<const Match> matches,
                                          const Eigen::Matrix3d& K1,
                                          const Eigen::Matrix3d& K2) {
  const Eigen::Matrix3d F = fundamental_eight_point(matches);
  return decompose_essential(K2.transpose() * F * K1);
}

double rotation_error_deg(const Eigen::Matrix3d& R_gt, const Eigen::Matrix3d& R) {
  return acos_deg(((R_gt.transpose() * R).trace() - 1.0) / 2.0);
}

double translation_error_deg(const Eigen::Vector3d& t_gt, const Eigen::Vector3d& t) {
  const double n = t_gt.norm() * t.norm();
  if (!(n > 0.0)) return 180.0;
  return acos_deg(t_gt.dot(t) / n);
}

double translation_error_metric(const Eigen::Vector3d& t_gt_metric,
                                const Eigen::Vector3d& t, double z) {
  const double nt = t.norm();
  if (!(nt > 0.0)) return kInf;
  return z * (t_gt_metric - t_gt_metric.norm() * (t / nt)).norm();
}

double pose_error(std::span<const Pose> candidates, const PoseGroundTruth& gt,
                  PoseErrorMode mode) {
  if (mode == PoseErrorMode::Metric && !gt.scale) {
    throw std::invalid_argument("metric pose error needs a ground-truth scale");
  }
  double best = kInf;
  for (const auto& c : candidates) {
    const double er = rotation_error_deg(gt.R, c.R);
    const double et = mode == PoseErrorMode::Angular
                          ? translation_error_deg(gt.t, c.t)
                          : translation_error_metric(gt.t * *gt.scale, c.t);
    best = std::min(best, std::max(er, et));
  }
  return best;
}

AucResult auc(std::span<const double> errors, std::span<const double> thresholds) {
  AucResult out;
  out.thresholds.assign(thresholds.begin(), thresholds.end());
  for (double t : thresholds) {
    if (!(t > 0.0)) throw std::invalid_argument("AUC thresholds must be positive");
    double s = 0.0;
    for (double e : errors) {
      if (std::isnan(e)) continue;
      s += std::max(0.0, 1.0 - e / t);
    }
    out.values.push_back(errors.empty() ? 0.0 : s / static_cast<double>(errors.size()));
  }
  if (!out.values.empty()) {
    double m = 0.0;
    for (double v : out.values) m += v;
    out.mean = m / static_cast<double>(out.values.size());
  }
  return out;
}

double homography_common_area_error(const Eigen::Matrix3d& H_est,
                                    const Eigen::Matrix3d& H_gt, int width,
                                    int height) {
  if (width < 1 || height < 1) throw std::invalid_argument("image size must be positive");
  bool empty12 = false, empty21 = false;
  const double e12 = mean_transfer_error(H_est, H_gt, width, height, empty12);
  const double e21 =
      mean_transfer_error(H_est.inverse(), H_gt.inverse(), width, height, empty21);
  if (empty12 && empty21) return kInf;
  return std::max(e12, e21);
}

EvalReport evaluate(std::span<const Match> base, std::span<const Match> matches,
                    const GroundTruth& gt, EpipolarNorm norm) {
  EvalReport rep;
  rep.base_count = base.size();
  rep.count = matches.size();
  rep.scores = match_scores(base, matches, gt, norm);
  if (const auto* pose = std::get_if<PoseGroundTruth>(&gt)) {
    double ang = kInf;
    std::optional<double> met;
    if (pose->scale) met = kInf;
    try {
      const auto cands = pose_from_fundamental(matches, pose->K1, pose->K2);
      ang = pose_error(cands, *pose, PoseErrorMode::Angular);
      if (pose->scale) met = pose_error(cands, *pose, PoseErrorMode::Metric);
    } catch (const Error&) {
    }
    rep.pose_error_angular = ang;
    rep.auc_F_angular = auc(std::span<const double>(&ang, 1), kPoseAucThresholds);
    if (met) {
      rep.pose_error_metric = met;
      rep.auc_F_metric = auc(std::span<const double>(&*met, 1), kPoseAucThresholds);
    }
  } else {
    const auto& hg = std::get<HomographyGroundTruth>(gt);
    double err = kInf;
    if (hg.width > 0 && hg.height > 0) {
      if (const auto fit = try_fit_homography_dlt(matches)) {
        err = homography_common_area_error(fit->H.matrix(), hg.H, hg.width, hg.height);
      }
      rep.homography_error = err;
      rep.auc_H = auc(std::span<const double>(&err, 1), kHomographyAucThresholds);
    }
  }
  return rep;
}

}  // namespace planefilter
