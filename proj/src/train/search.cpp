#include "retfuse/train/search.hpp"

#include <algorithm>
#include <cmath>

#include "retfuse/errors.hpp"
#include "retfuse/rng.hpp"

namespace retfuse::train {

void SearchSpace::check() const {
  if (lr_lo <= 0.0 || lr_hi < lr_lo) throw ConfigError("search: invalid learning-rate interval");
  if (wd_lo < 0.0 || wd_hi < wd_lo) throw ConfigError("search: invalid weight-decay interval");
  if (batch_sizes.empty() && fixed_batch < 2) throw ConfigError("search: invalid fixed batch");
}

bool SearchSpace::contains(double lr, double wd, std::size_t batch,
                           augment::AugmentPolicy::Kind kind) const {
  if (lr < lr_lo || lr > lr_hi || wd < wd_lo || wd > wd_hi) return false;
  if (!batch_sizes.empty() &&
      std::find(batch_sizes.begin(), batch_sizes.end(), batch) == batch_sizes.end())
    return false;
  if (!augment_kinds.empty() &&
      std::find(augment_kinds.begin(), augment_kinds.end(), kind) == augment_kinds.end())
    return false;
  return true;
}

namespace {

bool improves(double candidate, double incumbent, bool maximize) {
  return maximize ? candidate > incumbent : candidate < incumbent;
}

TrialConfig sample_uniform(const SearchSpace& space, Rng& rng) {
  TrialConfig cfg;
  cfg.lr = std::exp(rng.uniform(std::log(space.lr_lo), std::log(space.lr_hi)));
  cfg.wd = rng.uniform(space.wd_lo, space.wd_hi);
  cfg.batch = space.batch_sizes.empty() ? space.fixed_batch
                                        : space.batch_sizes[rng.below(space.batch_sizes.size())];
  cfg.augment = space.augment_kinds.empty()
                    ? space.fixed_augment
                    : space.augment_kinds[rng.below(space.augment_kinds.size())];
  return cfg;
}

double run_trial(const Objective& objective, const TrialConfig& cfg, Trial& trial) {
  trial.config = cfg;
  trial.fold_scores = objective(cfg);
  if (trial.fold_scores.empty()) throw DataError("search objective returned no fold scores");
  double sum = 0.0;
  for (double v : trial.fold_scores) sum += v;
  trial.score = sum / static_cast<double>(trial.fold_scores.size());
  return trial.score;
}

// Normalized coordinates for the two continuous dimensions.
double lr_to_unit(const SearchSpace& s, double lr) {
  return (std::log(lr) - std::log(s.lr_lo)) / (std::log(s.lr_hi) - std::log(s.lr_lo));
}
double unit_to_lr(const SearchSpace& s, double u) {
  return std::exp(std::log(s.lr_lo) + u * (std::log(s.lr_hi) - std::log(s.lr_lo)));
}
double wd_to_unit(const SearchSpace& s, double wd) {
  return s.wd_hi == s.wd_lo ? 0.5 : (wd - s.wd_lo) / (s.wd_hi - s.wd_lo);
}
double unit_to_wd(const SearchSpace& s, double u) { return s.wd_lo + u * (s.wd_hi - s.wd_lo); }

struct Kde {
  std::vector<double> centers;  // rank order: better trials first
  std::vector<double> weights;  // normalized, including the trailing prior slot
  double bandwidth = 0.2;

  static Kde fit(const std::vector<double>& points, const std::vector<double>& raw_weights,
                 double min_bandwidth) {
    Kde kde;
    kde.centers = points;
    const double n = static_cast<double>(points.size());
    if (points.size() >= 2) {
      // Weighted spread, so stale low-rank points stop inflating the
      // proposal width once better trials dominate.
      double wsum = 0.0, mean = 0.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        wsum += raw_weights[i];
        mean += raw_weights[i] * points[i];
      }
      mean /= wsum;
      double var = 0.0;
      for (std::size_t i = 0; i < points.size(); ++i)
        var += raw_weights[i] * (points[i] - mean) * (points[i] - mean);
      var /= wsum;
      const double scott = 1.06 * std::sqrt(var) * std::pow(n, -0.2);
      kde.bandwidth = std::clamp(scott, 0.02, min_bandwidth);
    }
    kde.weights.resize(points.size() + 1);
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      kde.weights[i] = raw_weights[i];
      total += kde.weights[i];
    }
    kde.weights.back() = total / std::max(1.0, n);  // uniform prior slot
    total += kde.weights.back();
    for (double& w : kde.weights) w /= total;
    return kde;
  }

  double log_density(double x) const {
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    double density = weights.back();  // uniform prior has density 1 on [0,1]
    for (std::size_t i = 0; i < centers.size(); ++i) {
      const double z = (x - centers[i]) / bandwidth;
      density += weights[i] * kInvSqrt2Pi / bandwidth * std::exp(-0.5 * z * z);
    }
    return std::log(std::max(density, 1e-300));
  }

  double sample_around(std::size_t center, Rng& rng) const {
    return std::clamp(centers[center] + bandwidth * rng.normal(), 0.0, 1.0);
  }
};

// Rank weights shared by the kernel and categorical models; harmonic decay
// keeps the best few trials dominant.
std::vector<double> rank_weights(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / static_cast<double>(i + 1);
  return w;
}

}  // namespace

SearchResult random_search(const SearchSpace& space, int n_runs, std::uint64_t seed,
                           const Objective& objective, bool maximize) {
  space.check();
  if (n_runs < 1) throw ConfigError("random_search: n_runs must be at least 1");

  SearchResult result;
  Rng rng(stream_seed(seed, "random-search"));
  for (int i = 0; i < n_runs; ++i) {
    Trial trial;
    const double score = run_trial(objective, sample_uniform(space, rng), trial);
    if (result.trials.empty() || improves(score, result.best_score, maximize)) {
      result.best = trial.config;
      result.best_score = score;
    }
    result.trials.push_back(std::move(trial));
  }
  return result;
}

SearchResult tpe_search(const SearchSpace& space, int n_trials, int n_startup,
                        std::uint64_t seed, const Objective& objective, bool maximize) {
  space.check();
  if (n_startup < 1) throw ConfigError("tpe_search: n_startup must be at least 1");
  if (n_trials < n_startup)
    throw ConfigError("tpe_search: n_trials must be at least the startup count");

  constexpr int kCandidates = 32;
  SearchResult result;
  Rng rng(stream_seed(seed, "tpe-search"));

  for (int t = 0; t < n_trials; ++t) {
    TrialConfig cfg;
    if (t < n_startup) {
      cfg = sample_uniform(space, rng);
    } else {
      // Split completed trials at the performance quantile.
      std::vector<std::size_t> order(result.trials.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return maximize ? result.trials[a].score > result.trials[b].score
                        : result.trials[a].score < result.trials[b].score;
      });
      // The good quantile tightens over the budget: broad model early,
      // top-few exploitation late.
      const double good_frac =
          0.25 - 0.17 * std::min(1.0, static_cast<double>(t - n_startup) /
                                          std::max(1.0, 0.8 * static_cast<double>(
                                                            n_trials - n_startup)));
      const std::size_t n_good = std::min<std::size_t>(
          25, std::max<std::size_t>(
                  2, static_cast<std::size_t>(
                         std::ceil(good_frac * static_cast<double>(order.size())))));

      std::vector<double> good_lr, bad_lr, good_wd, bad_wd;
      std::vector<std::size_t> good_batch, good_aug;
      for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& trial = result.trials[order[i]];
        const bool good = i < n_good;
        (good ? good_lr : bad_lr).push_back(lr_to_unit(space, trial.config.lr));
        (good ? good_wd : bad_wd).push_back(wd_to_unit(space, trial.config.wd));
        if (!good) continue;
        if (!space.batch_sizes.empty())
          good_batch.push_back(static_cast<std::size_t>(
              std::find(space.batch_sizes.begin(), space.batch_sizes.end(),
                        trial.config.batch) -
              space.batch_sizes.begin()));
        if (!space.augment_kinds.empty())
          good_aug.push_back(static_cast<std::size_t>(
              std::find(space.augment_kinds.begin(), space.augment_kinds.end(),
                        trial.config.augment) -
              space.augment_kinds.begin()));
      }

      const std::vector<double> good_w = rank_weights(n_good);
      const std::vector<double> bad_w(order.size() - n_good, 1.0);
      // Proposal width anneals from coarse to fine over the budget; it acts
      // as a cap so the endgame concentrates even while the good set still
      // spans the whole descent trajectory.
      const double progress =
          static_cast<double>(t - n_startup) /
          std::max(1.0, 0.7 * static_cast<double>(n_trials - n_startup));
      const double min_bw = 0.03 + 0.15 * (1.0 - std::min(1.0, progress));
      const Kde l_lr = Kde::fit(good_lr, good_w, min_bw), g_lr = Kde::fit(bad_lr, bad_w, min_bw);
      const Kde l_wd = Kde::fit(good_wd, good_w, min_bw), g_wd = Kde::fit(bad_wd, bad_w, min_bw);

      // Candidates jitter around one weighted good trial as a whole, so
      // cross-dimension structure survives; a prior slot proposes fully
      // uniform points and a small mutation rate perturbs the categories.
      double best_ratio = -1e300;
      for (int c = 0; c < kCandidates; ++c) {
        std::size_t center = n_good;  // prior slot unless a kernel wins
        {
          const double pick = rng.uniform();
          double acc = 0.0;
          for (std::size_t i = 0; i <= n_good; ++i) {
            acc += l_lr.weights[i];
            if (pick < acc) {
              center = i;
              break;
            }
          }
        }
        double u_lr, u_wd;
        std::size_t batch_pos, aug_pos;
        if (center == n_good) {
          u_lr = rng.uniform();
          u_wd = rng.uniform();
          batch_pos = space.batch_sizes.empty() ? 0 : rng.below(space.batch_sizes.size());
          aug_pos = space.augment_kinds.empty() ? 0 : rng.below(space.augment_kinds.size());
        } else {
          u_lr = l_lr.sample_around(center, rng);
          u_wd = l_wd.sample_around(center, rng);
          batch_pos = space.batch_sizes.empty() ? 0 : good_batch[center];
          aug_pos = space.augment_kinds.empty() ? 0 : good_aug[center];
          if (!space.batch_sizes.empty() && rng.bernoulli(0.1))
            batch_pos = rng.below(space.batch_sizes.size());
          if (!space.augment_kinds.empty() && rng.bernoulli(0.1))
            aug_pos = rng.below(space.augment_kinds.size());
        }

        // Categorical dims ride along with the sampled center; scoring them
        // by density ratio would let early random trials blame categories
        // for what was positional bad luck.
        const double ratio = l_lr.log_density(u_lr) - g_lr.log_density(u_lr) +
                             l_wd.log_density(u_wd) - g_wd.log_density(u_wd);

        if (ratio > best_ratio) {
          best_ratio = ratio;
          cfg.lr = unit_to_lr(space, u_lr);
          cfg.wd = unit_to_wd(space, u_wd);
          cfg.batch = space.batch_sizes.empty() ? space.fixed_batch
                                                : space.batch_sizes[batch_pos];
          cfg.augment = space.augment_kinds.empty() ? space.fixed_augment
                                                    : space.augment_kinds[aug_pos];
        }
      }
    }

    Trial trial;
    const double score = run_trial(objective, cfg, trial);
    if (result.trials.empty() || improves(score, result.best_score, maximize)) {
      result.best = trial.config;
      result.best_score = score;
    }
    result.trials.push_back(std::move(trial));
  }
  return result;
}

}  // namespace retfuse::train
