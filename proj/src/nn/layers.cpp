#include "retfuse/nn/layers.hpp"

#include <cmath>

#include "retfuse/errors.hpp"

namespace retfuse::nn {

Conv2d make_conv(std::size_t oc, std::size_t ic, std::size_t k, int stride, int pad, Rng& rng) {
  Conv2d conv;
  conv.w = Tensor({oc, ic, k, k});
  conv.stride = stride;
  conv.pad = pad;
  const double sd = std::sqrt(2.0 / static_cast<double>(ic * k * k));
  for (std::size_t i = 0; i < conv.w.size(); ++i) conv.w[i] = rng.normal(0.0, sd);
  return conv;
}

Dense make_dense(std::size_t in, std::size_t out, Rng& rng) {
  Dense dense;
  dense.w = Tensor({in, out});
  dense.b = Tensor({out});
  const double sd = std::sqrt(2.0 / static_cast<double>(in));
  for (std::size_t i = 0; i < dense.w.size(); ++i) dense.w[i] = rng.normal(0.0, sd);
  return dense;
}

BatchNorm make_bn(std::size_t channels) {
  BatchNorm bn;
  bn.gamma = Tensor::full({channels}, 1.0);
  bn.beta = Tensor({channels});
  bn.running_mean = Tensor({channels});
  bn.running_var = Tensor::full({channels}, 1.0);
  return bn;
}

Conv2d zeros_like(const Conv2d& p) {
  Conv2d g;
  g.w = Tensor(p.w.shape());
  g.stride = p.stride;
  g.pad = p.pad;
  return g;
}

Dense zeros_like(const Dense& p) {
  Dense g;
  g.w = Tensor(p.w.shape());
  g.b = Tensor(p.b.shape());
  return g;
}

BatchNorm zeros_like(const BatchNorm& p) {
  BatchNorm g;
  g.gamma = Tensor(p.gamma.shape());
  g.beta = Tensor(p.beta.shape());
  g.running_mean = Tensor(p.running_mean.shape());
  g.running_var = Tensor(p.running_var.shape());
  return g;
}

void check_finite(const Tensor& t, const char* layer) {
  if (!t.all_finite())
    throw NumericError(std::string("non-finite values after layer ") + layer);
}

Tensor conv2d_forward(const Conv2d& p, const Tensor& x, ConvCache* cache, const char* name) {
  if (x.ndim() != 4 || x.dim(1) != p.w.dim(1))
    throw ShapeError(std::string("conv input shape mismatch in layer ") + name);
  Tensor y;
  kernels::conv2d_forward(x, p.w, p.stride, p.pad, y);
  if (cache) cache->x = x;
  return y;
}

Tensor conv2d_backward(const Conv2d& p, const ConvCache& cache, const Tensor& gy, Conv2d& grad) {
  if (cache.x.size() == 0) throw StateError("conv backward without a matching forward cache");
  Tensor gw(p.w.shape());
  kernels::conv2d_backward_weight(cache.x, gy, p.stride, p.pad, gw);
  grad.w.add_scaled(gw, 1.0);
  Tensor gx(cache.x.shape());
  kernels::conv2d_backward_input(p.w, gy, p.stride, p.pad, gx);
  return gx;
}

Tensor dense_forward(const Dense& p, const Tensor& x, DenseCache* cache, const char* name) {
  if (x.ndim() != 2 || x.dim(1) != p.w.dim(0))
    throw ShapeError(std::string("dense input shape mismatch in layer ") + name);
  Tensor y;
  kernels::dense_forward(x, p.w, p.b, y);
  if (cache) cache->x = x;
  return y;
}

Tensor dense_backward(const Dense& p, const DenseCache& cache, const Tensor& gy, Dense& grad) {
  if (cache.x.size() == 0) throw StateError("dense backward without a matching forward cache");
  Tensor gw(p.w.shape()), gb(p.b.shape());
  kernels::dense_backward_params(cache.x, gy, gw, gb);
  grad.w.add_scaled(gw, 1.0);
  grad.b.add_scaled(gb, 1.0);
  Tensor gx;
  kernels::dense_backward_input(gy, p.w, gx);
  return gx;
}

namespace {

void bn_dims(const Tensor& x, const BatchNorm& p, const char* name, std::size_t& b,
             std::size_t& c, std::size_t& s) {
  if (x.ndim() == 4) {
    b = x.dim(0);
    c = x.dim(1);
    s = x.dim(2) * x.dim(3);
  } else if (x.ndim() == 2) {
    b = x.dim(0);
    c = x.dim(1);
    s = 1;
  } else {
    throw ShapeError(std::string("batch norm expects 2d or 4d input in layer ") + name);
  }
  if (c != p.gamma.size())
    throw ShapeError(std::string("batch norm channel mismatch in layer ") + name);
}

}  // namespace

Tensor bn_forward(BatchNorm& p, const Tensor& x, BnCache* cache, Mode mode, const char* name) {
  std::size_t b = 0, c = 0, s = 0;
  bn_dims(x, p, name, b, c, s);

  Tensor mean({c}), var({c});
  if (mode == Mode::infer) {
    mean = p.running_mean;
    var = p.running_var;
  } else {
    if (b * s < 2)
      throw ConfigError(std::string("batch norm needs at least 2 values per channel in layer ") +
                        name);
    kernels::bn_stats(x, b, c, s, mean, var);
    // Catches inf/nan propagation here; downstream relu would mask it.
    if (!mean.all_finite() || !var.all_finite())
      throw NumericError(std::string("non-finite values after layer ") + name);
    if (mode == Mode::train) {
      const double n = static_cast<double>(b * s);
      const double unbias = n / (n - 1.0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        p.running_mean[ch] = (1.0 - p.momentum) * p.running_mean[ch] + p.momentum * mean[ch];
        p.running_var[ch] =
            (1.0 - p.momentum) * p.running_var[ch] + p.momentum * var[ch] * unbias;
      }
    }
  }

  Tensor inv_std({c});
  for (std::size_t ch = 0; ch < c; ++ch) inv_std[ch] = 1.0 / std::sqrt(var[ch] + p.eps);

  Tensor x_hat(x.shape()), y(x.shape());
  kernels::bn_apply(x, b, c, s, mean, inv_std, p.gamma, p.beta, x_hat, y);
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
    cache->b = b;
    cache->c = c;
    cache->s = s;
    cache->train = (mode == Mode::train);
  }
  return y;
}

Tensor bn_backward(const BatchNorm& p, const BnCache& cache, const Tensor& gy, BatchNorm& grad) {
  if (cache.x_hat.size() == 0 || !cache.train)
    throw StateError("batch norm backward requires a train-mode forward cache");
  Tensor gx(gy.shape()), ggamma({cache.c}), gbeta({cache.c});
  kernels::bn_backward(cache.x_hat, cache.b, cache.c, cache.s, cache.inv_std, p.gamma, gy, gx,
                       ggamma, gbeta);
  grad.gamma.add_scaled(ggamma, 1.0);
  grad.beta.add_scaled(gbeta, 1.0);
  return gx;
}

Tensor relu_forward(const Tensor& x, ReluCache* cache) {
  Tensor y(x.shape());
  kernels::relu_forward(x, y);
  if (cache) cache->y = y;
  return y;
}

Tensor relu_backward(const ReluCache& cache, const Tensor& gy) {
  Tensor gx(gy.shape());
  kernels::relu_backward(cache.y, gy, gx);
  return gx;
}

Tensor gap_forward(const Tensor& x) {
  Tensor y({x.dim(0), x.dim(1)});
  kernels::gap_forward(x, y);
  return y;
}

Tensor gap_backward(const Tensor& gy, std::size_t h, std::size_t w) {
  Tensor gx({gy.dim(0), gy.dim(1), h, w});
  kernels::gap_backward(gy, h, w, gx);
  return gx;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace retfuse::nn
