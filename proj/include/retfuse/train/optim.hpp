#pragma once

#include <string>
#include <vector>

#include "retfuse/tensor.hpp"

namespace retfuse::train {

enum class OptimKind { adam, adamw };

const char* to_string(OptimKind k);
OptimKind optim_kind_from_string(const std::string& s);

struct OptimConfig {
  OptimKind kind = OptimKind::adam;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second-moment state, one slot per parameter tensor in visit order.
struct OptimState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step_count = 0;

  static OptimState for_params(const std::vector<Tensor*>& params);
};

// One update. adam applies coupled L2 (grad + wd * p); adamw multiplies
// parameters by (1 - lr * wd) before the moment update. Tensors flagged in
// skip_decay (the log-temperature) are exempt from decay either way.
// Any non-finite gradient rejects the step with a NumericError before any
// parameter is touched.
void optimizer_step(const OptimConfig& config, OptimState& state,
                    const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                    double lr, const std::vector<bool>& skip_decay = {});

}  // namespace retfuse::train
