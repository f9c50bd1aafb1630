#pragma once

#include "retfuse/tensor.hpp"

namespace retfuse {

// Learnable softmax temperature with a floor clamp. Default policy freezes
// tau permanently the first time an update would push it below the floor;
// per_step_clamp instead clamps each offending update and keeps learning.
struct TemperatureState {
  double tau = 0.5;
  bool frozen = false;
  double floor = 0.1;
  double init = 0.5;
  bool per_step_clamp = false;
};

TemperatureState apply_temperature_update(const TemperatureState& temp, double proposed_tau);

struct BceResult {
  double loss = 0.0;
  Tensor grad;  // dLoss/dy_hat
};

// Mean binary cross-entropy over probabilities in (0,1). Probabilities are
// clamped to [eps, 1-eps], eps = 1e-12, before the logs.
BceResult bce_loss(const Tensor& y_hat, const Tensor& y);

struct NtXentResult {
  double loss = 0.0;
  Tensor grad_z;        // dLoss/dz, same shape as z
  double grad_tau = 0.0;  // 0 when the temperature is frozen
};

// Normalized temperature-scaled cross-entropy over a (2K, d) embedding batch
// where rows 2m and 2m+1 are the two augmented views of sample m. Similarity
// is cosine; the loss is averaged over all 2K anchors and the softmax
// denominators use max subtraction.
NtXentResult nt_xent_loss(const Tensor& z, const TemperatureState& temp);

}  // namespace retfuse
