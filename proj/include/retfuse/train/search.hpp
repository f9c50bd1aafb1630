#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "retfuse/augment.hpp"
#include "retfuse/train/optim.hpp"

namespace retfuse::train {

// Mixed search space: learning rate (log-uniform), weight decay (uniform),
// plus optional discrete batch-size and augmentation dimensions. Empty
// discrete sets mean those dimensions are fixed, not searched.
struct SearchSpace {
  double lr_lo = 1e-6;
  double lr_hi = 5e-5;
  double wd_lo = 0.0;
  double wd_hi = 1e-3;
  std::vector<std::size_t> batch_sizes = {64, 128, 256};
  std::vector<augment::AugmentPolicy::Kind> augment_kinds = {
      augment::AugmentPolicy::Kind::simple, augment::AugmentPolicy::Kind::harsh};
  std::size_t fixed_batch = 32;
  augment::AugmentPolicy::Kind fixed_augment = augment::AugmentPolicy::Kind::simple;

  static SearchSpace finetune_default() { return {}; }
  static SearchSpace pretrain_default() {
    SearchSpace s;
    s.lr_lo = 1e-6;
    s.lr_hi = 1e-5;
    s.wd_lo = 0.0;
    s.wd_hi = 1e-1;
    s.batch_sizes.clear();
    s.augment_kinds.clear();
    s.fixed_augment = augment::AugmentPolicy::Kind::harsh;
    return s;
  }

  void check() const;
  bool contains(double lr, double wd, std::size_t batch,
                augment::AugmentPolicy::Kind kind) const;
};

struct TrialConfig {
  double lr = 0.0;
  double wd = 0.0;
  std::size_t batch = 0;
  augment::AugmentPolicy::Kind augment = augment::AugmentPolicy::Kind::simple;
};

struct Trial {
  TrialConfig config;
  std::vector<double> fold_scores;
  double score = 0.0;  // mean of fold_scores
};

struct SearchResult {
  TrialConfig best;
  double best_score = 0.0;
  std::vector<Trial> trials;
};

// Returns one score per fold; the trial score is their mean.
using Objective = std::function<std::vector<double>(const TrialConfig&)>;

SearchResult random_search(const SearchSpace& space, int n_runs, std::uint64_t seed,
                           const Objective& objective, bool maximize);

// Sequential model-based optimization with a density-ratio acquisition:
// completed trials are split at the performance quantile into good/bad sets,
// candidates are drawn from a kernel-density model of the good set (plus a
// uniform prior component) and scored by log l(x) - log g(x). The first
// n_startup trials are random.
SearchResult tpe_search(const SearchSpace& space, int n_trials, int n_startup,
                        std::uint64_t seed, const Objective& objective, bool maximize);

}  // namespace retfuse::train
