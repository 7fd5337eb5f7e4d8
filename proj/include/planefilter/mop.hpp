#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "planefilter/geometry.hpp"

namespace planefilter {

/// Parameters of the multiple-overlapping-planes filter.
struct MopConfig {
  double t_l = 15.0;        // relaxed inlier threshold (px)
  double t_h = 7.5;         // strict threshold, t_l / 2
  std::size_t n_min = 12;   // minimum inliers to accept a plane
  int c_f_max = 3;          // consecutive failures before stopping
  int c_min = 50;           // RANSAC iteration floor
  int c_max = 2000;         // RANSAC iteration ceiling
  std::size_t buffer_size = 5;
  double confidence = 0.999;  // adaptive stopping confidence
  std::uint64_t seed = 0;
  int threads = -1;  // -1: PLANEFILTER_THREADS, 0: hardware concurrency

  static MopConfig plain() { return {}; }
  /// Defaults for MiHo planes (n_min relaxed to 8).
  static MopConfig miho() {
    MopConfig c;
    c.n_min = 8;
    return c;
  }
  /// Sets t_l and the tied strict threshold t_h = t_l / 2.
  MopConfig& with_tl(double tl) {
    t_l = tl;
    t_h = tl / 2.0;
    return *this;
  }
  /// Throws std::invalid_argument on inconsistent values.
  void validate() const;
};

enum class ModelKind { Plain, Miho };

/// Best sub-optimal hypotheses seen by RANSAC, kept across MOP iterations
/// and re-evaluated first at the start of each run. Scores are the inlier
/// counts exclusive of the current best and of earlier entries, so they
/// are non-increasing.
class ModelBuffer {
 public:
  explicit ModelBuffer(std::size_t capacity = 5) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return models_.size(); }
  bool empty() const { return models_.empty(); }
  const std::vector<HomographyModel>& models() const { return models_; }
  const std::vector<std::size_t>& scores() const { return scores_; }

  /// Appends a model for the next run (used to seed the buffer).
  void preload(HomographyModel model);
  void clear() {
    models_.clear();
    scores_.clear();
  }

  // Replaced wholesale by ransac_plane at the end of each run.
  void assign(std::vector<HomographyModel> models,
              std::vector<std::size_t> scores);
  std::vector<HomographyModel> take();

 private:
  std::size_t capacity_;
  std::vector<HomographyModel> models_;
  std::vector<std::size_t> scores_;
};

using Rng = std::mt19937_64;

/// One RANSAC run on the active subset. Returned inlier sets hold indices
/// into `matches` (t_l weak, t_h strong, both restricted to `active`).
/// Throws NoModel when no valid sample is found.
HomographyModel ransac_plane(std::span<const Match> matches,
                             std::span<const std::size_t> active,
                             ModelBuffer& buffer, const MopConfig& cfg,
                             Rng& rng, ModelKind kind = ModelKind::Plain);

struct FilterResult {
  std::vector<std::size_t> kept;
  std::vector<std::size_t> discarded;
  /// Per input match: plane index, or -1 when discarded / passthrough.
  std::vector<int> assignment;
  /// Inlier sets are over the full input at t_l (weak) and t_h (strong).
  std::vector<HomographyModel> planes;
  double alpha_star = 0.0;  // radians, MiHo rotation fixing
  bool passthrough = false;  // fewer than 4 matches, nothing filtered
};

FilterResult mop_filter(std::span<const Match> matches, const MopConfig& cfg);

/// Plane choice for a kept match: among compatible planes (t_l inliers)
/// with inlier count at least the median count of the top 5 compatible
/// ones, the one with minimum reprojection error. Throws NoCompatiblePlane.
std::size_t assign_homography(const Match& m,
                              std::span<const HomographyModel> planes,
                              double t_l);

namespace detail {

/// assign_homography over precomputed effective errors and inlier counts.
/// Returns -1 when no plane is compatible.
int assign_from_errors(std::span<const double> errors,
                       std::span<const std::size_t> counts, double t_l);

FilterResult run_mop(std::span<const Match> matches, const MopConfig& cfg,
                     ModelKind kind);

}  // namespace detail

}  // namespace planefilter
