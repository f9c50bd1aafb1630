#include "retfuse/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "retfuse/errors.hpp"

namespace retfuse {

TemperatureState apply_temperature_update(const TemperatureState& temp, double proposed_tau) {
  if (!std::isfinite(proposed_tau)) throw NumericError("non-finite temperature update");
  TemperatureState next = temp;
  if (temp.frozen) return next;
  if (proposed_tau < temp.floor) {
    next.tau = temp.floor;
    if (temp.per_step_clamp) {
      next.frozen = false;
    } else {
      next.frozen = true;
    }
  } else {
    next.tau = proposed_tau;
  }
  return next;
}

BceResult bce_loss(const Tensor& y_hat, const Tensor& y) {
  const std::size_t n = y_hat.size();
  if (n == 0) throw ConfigError("bce_loss: empty batch");
  if (y.size() != n) throw ShapeError("bce_loss: prediction/label length mismatch");

  constexpr double kEps = 1e-12;
  BceResult result;
  result.grad = Tensor(y_hat.shape());
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double yi = y[i];
    if (yi != 0.0 && yi != 1.0) throw DataError("bce_loss: labels must be 0 or 1");
    const double p = std::clamp(y_hat[i], kEps, 1.0 - kEps);
    total += yi * std::log(p) + (1.0 - yi) * std::log(1.0 - p);
    result.grad[i] = -(yi / p - (1.0 - yi) / (1.0 - p)) * inv_n;
  }
  result.loss = -total * inv_n;
  return result;
}

NtXentResult nt_xent_loss(const Tensor& z, const TemperatureState& temp) {
  if (z.ndim() != 2) throw ShapeError("nt_xent_loss: embeddings must be 2d");
  const std::size_t rows = z.dim(0);
  const std::size_t d = z.dim(1);
  if (rows < 2 || rows % 2 != 0) throw ConfigError("nt_xent_loss: needs 2K rows, K >= 1");
  if (temp.tau <= 0.0) throw NumericError("nt_xent_loss: temperature must be positive");
  const double tau = temp.tau;

  // L2-normalize rows; cosine similarity is a dot product afterwards.
  std::vector<double> norms(rows);
  Tensor unit(z.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) sq += z[i * d + k] * z[i * d + k];
    const double norm = std::sqrt(sq);
    if (norm == 0.0) throw NumericError("nt_xent_loss: zero-norm embedding row");
    norms[i] = norm;
    for (std::size_t k = 0; k < d; ++k) unit[i * d + k] = z[i * d + k] / norm;
  }

  std::vector<double> sim(rows * rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = i + 1; j < rows; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += unit[i * d + k] * unit[j * d + k];
      sim[i * rows + j] = dot;
      sim[j * rows + i] = dot;
    }

  NtXentResult result;
  Tensor grad_unit(z.shape());
  double loss_total = 0.0;
  double dtau_total = 0.0;
  const double inv_anchors = 1.0 / static_cast<double>(rows);
  std::vector<double> prob(rows);

  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t j = i ^ 1;  // partner view
    double max_logit = -1e300;
    for (std::size_t k = 0; k < rows; ++k) {
      if (k == i) continue;
      max_logit = std::max(max_logit, sim[i * rows + k] / tau);
    }
    double denom = 0.0;
    for (std::size_t k = 0; k < rows; ++k) {
      if (k == i) continue;
      prob[k] = std::exp(sim[i * rows + k] / tau - max_logit);
      denom += prob[k];
    }
    loss_total += -(sim[i * rows + j] / tau - max_logit) + std::log(denom);

    double expected_sim = 0.0;
    for (std::size_t k = 0; k < rows; ++k) {
      if (k == i) continue;
      prob[k] /= denom;
      expected_sim += prob[k] * sim[i * rows + k];
    }
    dtau_total += (sim[i * rows + j] - expected_sim) / (tau * tau);

    // dL_i/dsim(i,k) = (p_ik - [k == j]) / tau; sim is symmetric in both rows.
    for (std::size_t k = 0; k < rows; ++k) {
      if (k == i) continue;
      const double coeff = (prob[k] - (k == j ? 1.0 : 0.0)) / tau * inv_anchors;
      for (std::size_t c = 0; c < d; ++c) {
        grad_unit[i * d + c] += coeff * unit[k * d + c];
        grad_unit[k * d + c] += coeff * unit[i * d + c];
      }
    }
  }

  result.loss = loss_total * inv_anchors;
  result.grad_tau = temp.frozen ? 0.0 : dtau_total * inv_anchors;

  // Backprop through the row normalization: dz = (g - (g.n) n) / |z|.
  result.grad_z = Tensor(z.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    double dot = 0.0;
    for (std::size_t c = 0; c < d; ++c) dot += grad_unit[i * d + c] * unit[i * d + c];
    for (std::size_t c = 0; c < d; ++c)
      result.grad_z[i * d + c] = (grad_unit[i * d + c] - dot * unit[i * d + c]) / norms[i];
  }
  return result;
}

}  // namespace retfuse
