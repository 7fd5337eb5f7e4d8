#include "planefilter/mop.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>

#include "planefilter/errors.hpp"
#include "planefilter/miho.hpp"
#include "planefilter/parallel.hpp"

namespace planefilter {

void MopConfig::validate() const {
  if (!(t_l > 0.0) || !(t_h > 0.0) || !(t_h < t_l)) {
    throw std::invalid_argument("MopConfig: require 0 < t_h < t_l");
  }
  if (n_min < 5) throw std::invalid_argument("MopConfig: n_min must be >= 5");
  if (c_min < 0 || c_max < 1 || c_min > c_max) {
    throw std::invalid_argument("MopConfig: require 0 <= c_min <= c_max");
  }
  if (c_f_max < 1) throw std::invalid_argument("MopConfig: c_f_max must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::invalid_argument("MopConfig: confidence must be in (0, 1)");
  }
}

void ModelBuffer::preload(HomographyModel model) {
  models_.push_back(std::move(model));
  scores_.push_back(0);
  if (models_.size() > capacity_) {
    models_.resize(capacity_);
    scores_.resize(capacity_);
  }
}

void ModelBuffer::assign(std::vector<HomographyModel> models,
                         std::vector<std::size_t> scores) {
  models_ = std::move(models);
  scores_ = std::move(scores);
}

std::vector<HomographyModel> ModelBuffer::take() {
  std::vector<HomographyModel> out = std::move(models_);
  clear();
  return out;
}

namespace {

constexpr std::size_t kBatch = 16;

struct Entry {
  HomographyModel model;
  std::vector<char> mask;  // t_l inliers over active positions
  std::size_t count = 0;
};

void score_entry(Entry& e, std::span<const Match> matches,
                 std::span<const std::size_t> active, double t_l) {
  e.mask.assign(active.size(), 0);
  e.count = 0;
  for (std::size_t k = 0; k < active.size(); ++k) {
    if (effective_error(e.model, matches[active[k]]) <= t_l) {
      e.mask[k] = 1;
      ++e.count;
    }
  }
}

std::optional<HomographyModel> model_from_sample(std::span<const Match> sample,
                                                 ModelKind kind, double t_l) {
  if (kind == ModelKind::Plain) {
    if (!sample_degeneracy_check(sample, std::numeric_limits<double>::infinity(),
                                 t_l)) {
      return std::nullopt;
    }
    auto fit = try_fit_homography_dlt(sample);
    if (!fit || !sample_degeneracy_check(sample, fit->smallest_singular, t_l) ||
        !sample_is_quasi_affine(fit->H, sample)) {
      return std::nullopt;
    }
    return HomographyModel{fit->H, sample.front(), std::nullopt, {}, {}};
  }
  auto fit = try_fit_dual_homography(sample);
  if (!fit || !dual_sample_is_valid(sample, *fit, t_l)) return std::nullopt;
  try {
    return HomographyModel{fit->pair.composite(), sample.front(), fit->pair, {}, {}};
  } catch (const SingularHomography&) {
    return std::nullopt;
  }
}

// Best hypothesis plus the buffer of sub-optimal ones for one RANSAC run.
class RansacState {
 public:
  explicit RansacState(std::size_t capacity) : capacity_(capacity) {}

  void process(Entry e) {
    if (!best_) {
      best_ = std::move(e);
      reorder();
      return;
    }
    if (e.count > best_->count) {
      Entry old = std::move(*best_);
      best_ = std::move(e);
      if (old.count > 0 && capacity_ > 0) buffer_.push_back(std::move(old));
      reorder();
      return;
    }
    if (e.count == 0 || capacity_ == 0) return;
    if (buffer_.size() < capacity_ || e.count > scores_.back()) {
      buffer_.push_back(std::move(e));
      reorder();
    }
  }

  const std::optional<Entry>& best() const { return best_; }

  void export_to(ModelBuffer& buffer) {
    std::vector<HomographyModel> models;
    models.reserve(buffer_.size());
    for (auto& e : buffer_) models.push_back(std::move(e.model));
    buffer.assign(std::move(models), scores_);
  }

 private:
  // Greedy ordering by inliers exclusive of the best and earlier entries.
  void reorder() {
    const std::size_t n = best_ ? best_->mask.size()
                                : (buffer_.empty() ? 0 : buffer_.front().mask.size());
    std::vector<char> covered(n, 0);
    if (best_) covered = best_->mask;
    std::vector<Entry> ordered;
    std::vector<std::size_t> scores;
    std::vector<bool> used(buffer_.size(), false);
    while (ordered.size() < buffer_.size()) {
      std::size_t pick = 0;
      std::size_t pick_score = 0;
      bool found = false;
      for (std::size_t j = 0; j < buffer_.size(); ++j) {
        if (used[j]) continue;
        std::size_t excl = 0;
        const auto& mask = buffer_[j].mask;
        for (std::size_t k = 0; k < n; ++k) excl += (mask[k] && !covered[k]);
        if (!found || excl > pick_score) {
          pick = j;
          pick_score = excl;
          found = true;
        }
      }
      used[pick] = true;
      const auto& mask = buffer_[pick].mask;
      for (std::size_t k = 0; k < n; ++k) covered[k] = covered[k] || mask[k];
      ordered.push_back(std::move(buffer_[pick]));
      scores.push_back(pick_score);
    }
    if (ordered.size() > capacity_) {
      ordered.resize(capacity_);
      scores.resize(capacity_);
    }
    buffer_ = std::move(ordered);
    scores_ = std::move(scores);
  }

  std::size_t capacity_;
  std::optional<Entry> best_;
  std::vector<Entry> buffer_;
  std::vector<std::size_t> scores_;
};

double required_iterations(double inlier_ratio, double confidence) {
  if (inlier_ratio >= 1.0) return 0.0;
  if (inlier_ratio <= 0.0) return std::numeric_limits<double>::infinity();
  const double p = std::pow(inlier_ratio, 4);
  const double denom = std::log1p(-p);
  if (!(denom < 0.0)) return std::numeric_limits<double>::infinity();
  return std::ceil(std::log(1.0 - confidence) / denom);
}

}  // namespace

HomographyModel ransac_plane(std::span<const Match> matches,
                             std::span<const std::size_t> active,
                             ModelBuffer& buffer, const MopConfig& cfg,
                             Rng& rng, ModelKind kind) {
  if (active.size() < 4) throw NoModel("fewer than 4 active matches");
  const int threads = resolve_thread_count(cfg.threads);
  RansacState state(cfg.buffer_size);

  long c = 0;
  long attempts = 0;
  const long cap = 10L * cfg.c_max;
  auto done = [&] {
    if (c >= cfg.c_max) return true;
    if (c < cfg.c_min) return false;
    const double w = state.best()
                         ? static_cast<double>(state.best()->count) /
                               static_cast<double>(active.size())
                         : 0.0;
    return static_cast<double>(c) >= required_iterations(w, cfg.confidence);
  };

  // Buffered hypotheses are evaluated before any random sample.
  {
    std::vector<Entry> seeds;
    for (auto& m : buffer.take()) seeds.push_back(Entry{std::move(m), {}, 0});
    parallel_for(seeds.size(), threads, [&](std::size_t i) {
      score_entry(seeds[i], matches, active, cfg.t_l);
    });
    for (auto& e : seeds) {
      if (c >= cfg.c_max) break;
      ++c;
      state.process(std::move(e));
    }
  }

  std::uniform_int_distribution<std::size_t> pick(0, active.size() - 1);
  std::vector<std::array<std::size_t, 4>> samples(kBatch);
  std::vector<std::optional<Entry>> batch(kBatch);
  while (!done() && attempts < cap) {
    for (auto& s : samples) {
      for (std::size_t k = 0; k < 4; ++k) {
        std::size_t p;
        do {
          p = pick(rng);
        } while (std::find(s.begin(), s.begin() + k, p) != s.begin() + k);
        s[k] = p;
      }
    }
    parallel_for(kBatch, threads, [&](std::size_t i) {
      std::array<Match, 4> sample;
      for (std::size_t k = 0; k < 4; ++k) sample[k] = matches[active[samples[i][k]]];
      batch[i].reset();
      auto model = model_from_sample(sample, kind, cfg.t_l);
      if (!model) return;
      Entry e{std::move(*model), {}, 0};
      score_entry(e, matches, active, cfg.t_l);
      batch[i] = std::move(e);
    });
    for (auto& h : batch) {
      if (done() || attempts >= cap) break;
      ++attempts;
      if (!h) continue;
      ++c;
      state.process(std::move(*h));
    }
  }

  if (!state.best()) {
    state.export_to(buffer);
    throw NoModel();
  }
  HomographyModel model = state.best()->model;
  const auto& mask = state.best()->mask;
  model.inliers_weak.clear();
  model.inliers_strong.clear();
  for (std::size_t k = 0; k < active.size(); ++k) {
    if (!mask[k]) continue;
    const std::size_t i = active[k];
    model.inliers_weak.push_back(i);
    if (effective_error(model, matches[i]) <= cfg.t_h) {
      model.inliers_strong.push_back(i);
    }
  }
  state.export_to(buffer);
  return model;
}

namespace detail {

int assign_from_errors(std::span<const double> errors,
                       std::span<const std::size_t> counts, double t_l) {
  std::vector<std::size_t> compatible;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (errors[k] <= t_l) compatible.push_back(k);
  }
  if (compatible.empty()) return -1;

  std::vector<std::size_t> by_count = compatible;
  std::stable_sort(by_count.begin(), by_count.end(),
                   [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  const std::size_t top = std::min<std::size_t>(5, by_count.size());
  std::vector<double> top_counts;
  for (std::size_t j = 0; j < top; ++j) {
    top_counts.push_back(static_cast<double>(counts[by_count[j]]));
  }
  std::sort(top_counts.begin(), top_counts.end());
  const double q = top % 2 == 1
                       ? top_counts[top / 2]
                       : 0.5 * (top_counts[top / 2 - 1] + top_counts[top / 2]);

  int best = -1;
  for (std::size_t k : compatible) {
    if (static_cast<double>(counts[k]) < q) continue;
    if (best < 0) {
      best = static_cast<int>(k);
      continue;
    }
    const auto b = static_cast<std::size_t>(best);
    if (errors[k] < errors[b] ||
        (errors[k] == errors[b] && counts[k] > counts[b])) {
      best = static_cast<int>(k);
    }
  }
  return best;
}

FilterResult run_mop(std::span<const Match> matches, const MopConfig& cfg,
                     ModelKind kind) {
  cfg.validate();
  const std::size_t n = matches.size();
  FilterResult res;
  res.assignment.assign(n, -1);
  if (n < 4) {
    res.passthrough = true;
    for (std::size_t i = 0; i < n; ++i) res.kept.push_back(i);
    return res;
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> active(n);
  for (std::size_t i = 0; i < n; ++i) active[i] = i;
  ModelBuffer buffer(cfg.buffer_size);
  int failures = 0;

  while (failures < cfg.c_f_max && active.size() >= 4) {
    HomographyModel model;
    try {
      model = ransac_plane(matches, active, buffer, cfg, rng, kind);
    } catch (const NoModel&) {
      ++failures;
      continue;
    }
    if (model.inliers_weak.size() < cfg.n_min) {
      // Rejected planes stay available to the next run's bootstrap.
      auto kept = buffer.take();
      kept.insert(kept.begin(), std::move(model));
      if (kept.size() > cfg.buffer_size) kept.resize(cfg.buffer_size);
      for (auto& m : kept) buffer.preload(std::move(m));
      ++failures;
      continue;
    }
    const bool strict =
        static_cast<double>(model.inliers_strong.size()) > cfg.n_min / 2.0;
    const auto& removed = strict ? model.inliers_strong : model.inliers_weak;
    failures = strict ? 0 : failures + 1;

    std::vector<std::size_t> next;
    next.reserve(active.size());
    std::set_difference(active.begin(), active.end(), removed.begin(),
                        removed.end(), std::back_inserter(next));
    active = std::move(next);
    res.planes.push_back(std::move(model));
  }

  const std::size_t np = res.planes.size();
  std::vector<double> errors(np * n);
  parallel_for(n, resolve_thread_count(cfg.threads), [&](std::size_t i) {
    for (std::size_t k = 0; k < np; ++k) {
      errors[i * np + k] = effective_error(res.planes[k], matches[i]);
    }
  });
  std::vector<std::size_t> counts(np, 0);
  for (std::size_t k = 0; k < np; ++k) {
    auto& p = res.planes[k];
    p.inliers_weak.clear();
    p.inliers_strong.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const double e = errors[i * np + k];
      if (e <= cfg.t_l) p.inliers_weak.push_back(i);
      if (e <= cfg.t_h) p.inliers_strong.push_back(i);
    }
    counts[k] = p.inliers_weak.size();
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int a = assign_from_errors(
        std::span<const double>(errors.data() + i * np, np), counts, cfg.t_l);
    res.assignment[i] = a;
    (a >= 0 ? res.kept : res.discarded).push_back(i);
  }
  return res;
}

}  // namespace detail

FilterResult mop_filter(std::span<const Match> matches, const MopConfig& cfg) {
  return detail::run_mop(matches, cfg, ModelKind::Plain);
}

std::size_t assign_homography(const Match& m,
                              std::span<const HomographyModel> planes,
                              double t_l) {
  std::vector<double> errors;
  std::vector<std::size_t> counts;
  for (const auto& p : planes) {
    errors.push_back(effective_error(p, m));
    counts.push_back(p.inliers_weak.size());
  }
  const int a = detail::assign_from_errors(errors, counts, t_l);
  if (a < 0) throw NoCompatiblePlane();
  return static_cast<std::size_t>(a);
}

}  // namespace planefilter
