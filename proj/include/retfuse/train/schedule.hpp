#pragma once

#include <vector>

namespace retfuse::train {

// lr(t) = eta_min + (base_lr - eta_min) * (1 + cos(pi t / t_max)) / 2.
double cosine_lr(int epoch, double base_lr, double eta_min, int t_max);

// Stop when the best validation loss has not improved by more than
// min_delta for `patience` consecutive epochs; improvement means
// new_loss < best_loss - min_delta (strict).
class EarlyStopper {
 public:
  EarlyStopper(int patience, double min_delta);

  // Feed one epoch's validation loss; true means stop now.
  bool update(double val_loss);

  bool improved_last() const { return improved_last_; }
  double best_loss() const { return best_loss_; }
  int best_epoch() const { return best_epoch_; }
  int epochs_seen() const { return epoch_; }

 private:
  int patience_;
  double min_delta_;
  int epoch_ = 0;
  int since_improvement_ = 0;
  int best_epoch_ = 0;
  double best_loss_ = 0.0;
  bool improved_last_ = false;
};

// Walks a full loss sequence; true iff training would have stopped at the
// final entry.
bool early_stop_check(const std::vector<double>& val_losses, int patience, double min_delta);

// Epoch index (1-based) where the walk first stops, or 0 if it never does.
int early_stop_epoch(const std::vector<double>& val_losses, int patience, double min_delta);

}  // namespace retfuse::train
