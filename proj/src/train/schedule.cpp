#include "retfuse/train/schedule.hpp"

#include <cmath>

#include "retfuse/errors.hpp"

namespace retfuse::train {

double cosine_lr(int epoch, double base_lr, double eta_min, int t_max) {
  if (t_max <= 0) throw ConfigError("cosine_lr: t_max must be positive");
  if (epoch < 0 || epoch > t_max) throw ConfigError("cosine_lr: epoch outside [0, t_max]");
  constexpr double kPi = 3.14159265358979323846;
  return eta_min + 0.5 * (base_lr - eta_min) *
                       (1.0 + std::cos(kPi * static_cast<double>(epoch) /
                                       static_cast<double>(t_max)));
}

EarlyStopper::EarlyStopper(int patience, double min_delta)
    : patience_(patience), min_delta_(min_delta) {
  if (patience < 1) throw ConfigError("early stopping: patience must be at least 1");
  if (min_delta < 0.0) throw ConfigError("early stopping: min_delta must be non-negative");
}

bool EarlyStopper::update(double val_loss) {
  ++epoch_;
  if (epoch_ == 1) {
    best_loss_ = val_loss;
    best_epoch_ = 1;
    since_improvement_ = 0;
    improved_last_ = true;
    return false;
  }
  improved_last_ = val_loss < best_loss_ - min_delta_;
  if (improved_last_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch_;
    since_improvement_ = 0;
  } else {
    ++since_improvement_;
  }
  return since_improvement_ >= patience_;
}

bool early_stop_check(const std::vector<double>& val_losses, int patience, double min_delta) {
  if (val_losses.empty()) throw ConfigError("early_stop_check: empty history");
  EarlyStopper stopper(patience, min_delta);
  bool stop = false;
  for (double loss : val_losses) stop = stopper.update(loss);
  return stop;
}

int early_stop_epoch(const std::vector<double>& val_losses, int patience, double min_delta) {
  EarlyStopper stopper(patience, min_delta);
  for (std::size_t i = 0; i < val_losses.size(); ++i)
    if (stopper.update(val_losses[i])) return static_cast<int>(i + 1);
  return 0;
}

}  // namespace retfuse::train
