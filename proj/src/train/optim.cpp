#include "retfuse/train/optim.hpp"

#include <cmath>

#include "retfuse/errors.hpp"

namespace retfuse::train {

const char* to_string(OptimKind k) { return k == OptimKind::adam ? "adam" : "adamw"; }

OptimKind optim_kind_from_string(const std::string& s) {
  if (s == "adam") return OptimKind::adam;
  if (s == "adamw") return OptimKind::adamw;
  throw ConfigError("unknown optimizer: " + s);
}

OptimState OptimState::for_params(const std::vector<Tensor*>& params) {
  OptimState state;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const Tensor* p : params) {
    state.m.emplace_back(p->shape());
    state.v.emplace_back(p->shape());
  }
  return state;
}

void optimizer_step(const OptimConfig& config, OptimState& state,
                    const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                    double lr, const std::vector<bool>& skip_decay) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ShapeError("optimizer_step: parameter/gradient/state size mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (!params[t]->same_shape(*grads[t]))
      throw ShapeError("optimizer_step: gradient shape mismatch at tensor " + std::to_string(t));
    if (!grads[t]->all_finite())
      throw NumericError("optimizer_step: non-finite gradient, step rejected");
  }

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);

  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = *grads[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    const bool decay_this = config.weight_decay != 0.0 &&
                            (skip_decay.empty() || k >= skip_decay.size() || !skip_decay[k]);

    if (config.kind == OptimKind::adamw && decay_this) {
      const double shrink = 1.0 - lr * config.weight_decay;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] *= shrink;
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      double gi = g[i];
      if (config.kind == OptimKind::adam && decay_this) gi += config.weight_decay * p[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

}  // namespace retfuse::train
