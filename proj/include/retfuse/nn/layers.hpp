#pragma once

#include <string>

#include "retfuse/nn/kernels.hpp"
#include "retfuse/rng.hpp"
#include "retfuse/tensor.hpp"

namespace retfuse::nn {

// train: batch statistics, running buffers updated.
// infer: pure function of the running statistics.
// batch_eval: batch statistics without touching the buffers (validation
// losses stay a pure function of parameters and data).
enum class Mode { train, infer, batch_eval };

// Parameter blocks are plain structs of tensors; gradients reuse the same
// struct types with matching shapes.

struct Conv2d {
  Tensor w;  // (oc, ic, kh, kw); no bias, batch norm follows every conv
  int stride = 1;
  int pad = 1;
};

struct Dense {
  Tensor w;  // (in, out)
  Tensor b;  // (out)
};

struct BatchNorm {
  Tensor gamma, beta;              // learnable
  Tensor running_mean, running_var;  // buffers, updated in train mode
  double momentum = 0.1;
  double eps = 1e-5;
};

Conv2d make_conv(std::size_t oc, std::size_t ic, std::size_t k, int stride, int pad, Rng& rng);
Dense make_dense(std::size_t in, std::size_t out, Rng& rng);
BatchNorm make_bn(std::size_t channels);

Conv2d zeros_like(const Conv2d& p);
Dense zeros_like(const Dense& p);
BatchNorm zeros_like(const BatchNorm& p);

struct ConvCache {
  Tensor x;
};

struct DenseCache {
  Tensor x;
};

struct BnCache {
  Tensor x_hat;
  Tensor inv_std;
  std::size_t b = 0, c = 0, s = 0;
  bool train = false;
};

struct ReluCache {
  Tensor y;
};

Tensor conv2d_forward(const Conv2d& p, const Tensor& x, ConvCache* cache, const char* name);
// Accumulates into grad.w; returns gx.
Tensor conv2d_backward(const Conv2d& p, const ConvCache& cache, const Tensor& gy, Conv2d& grad);

Tensor dense_forward(const Dense& p, const Tensor& x, DenseCache* cache, const char* name);
Tensor dense_backward(const Dense& p, const DenseCache& cache, const Tensor& gy, Dense& grad);

// Works on (B,C,H,W) and (B,F); train mode uses batch statistics and updates
// the running buffers, infer mode is a pure function of the running stats.
Tensor bn_forward(BatchNorm& p, const Tensor& x, BnCache* cache, Mode mode, const char* name);
Tensor bn_backward(const BatchNorm& p, const BnCache& cache, const Tensor& gy, BatchNorm& grad);

Tensor relu_forward(const Tensor& x, ReluCache* cache);
Tensor relu_backward(const ReluCache& cache, const Tensor& gy);

Tensor gap_forward(const Tensor& x);
Tensor gap_backward(const Tensor& gy, std::size_t h, std::size_t w);

double sigmoid(double x);

void check_finite(const Tensor& t, const char* layer);

}  // namespace retfuse::nn
