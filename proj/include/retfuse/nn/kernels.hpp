#pragma once

#include <cstddef>

#include "retfuse/tensor.hpp"

// Dense numeric kernels. The default implementations in `kernels` are
// OpenMP-parallel over independent output elements only, so results are
// bit-identical for any thread count. `ref` holds naive serial versions of
// the same contracts, kept for equality tests and the kernel benchmark.
//
// Conventions: x (B,C,H,W) or (B,F); conv weights (OC,IC,KH,KW); dense
// weights (IN,OUT). Per-output-element accumulation order is part of the
// contract — both namespaces sum in the same order.

namespace retfuse::nn::kernels {

void conv2d_forward(const Tensor& x, const Tensor& w, int stride, int pad, Tensor& y);
void conv2d_backward_input(const Tensor& w, const Tensor& gy, int stride, int pad, Tensor& gx);
void conv2d_backward_weight(const Tensor& x, const Tensor& gy, int stride, int pad, Tensor& gw);

void dense_forward(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y);
void dense_backward_input(const Tensor& gy, const Tensor& w, Tensor& gx);
void dense_backward_params(const Tensor& x, const Tensor& gy, Tensor& gw, Tensor& gb);

// x viewed as (B, C, S): per-channel biased mean/variance over B*S samples.
void bn_stats(const Tensor& x, std::size_t b, std::size_t c, std::size_t s, Tensor& mean,
              Tensor& var);
void bn_apply(const Tensor& x, std::size_t b, std::size_t c, std::size_t s, const Tensor& mean,
              const Tensor& inv_std, const Tensor& gamma, const Tensor& beta, Tensor& x_hat,
              Tensor& y);
void bn_backward(const Tensor& x_hat, std::size_t b, std::size_t c, std::size_t s,
                 const Tensor& inv_std, const Tensor& gamma, const Tensor& gy, Tensor& gx,
                 Tensor& ggamma, Tensor& gbeta);

void relu_forward(const Tensor& x, Tensor& y);
void relu_backward(const Tensor& y, const Tensor& gy, Tensor& gx);

void gap_forward(const Tensor& x, Tensor& y);                      // (B,C,H,W) -> (B,C)
void gap_backward(const Tensor& gy, std::size_t h, std::size_t w, Tensor& gx);

void add(const Tensor& a, const Tensor& b, Tensor& y);

}  // namespace retfuse::nn::kernels

namespace retfuse::nn::ref {

void conv2d_forward(const Tensor& x, const Tensor& w, int stride, int pad, Tensor& y);
void conv2d_backward_input(const Tensor& w, const Tensor& gy, int stride, int pad, Tensor& gx);
void conv2d_backward_weight(const Tensor& x, const Tensor& gy, int stride, int pad, Tensor& gw);

void dense_forward(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y);
void dense_backward_input(const Tensor& gy, const Tensor& w, Tensor& gx);
void dense_backward_params(const Tensor& x, const Tensor& gy, Tensor& gw, Tensor& gb);

void bn_stats(const Tensor& x, std::size_t b, std::size_t c, std::size_t s, Tensor& mean,
              Tensor& var);

}  // namespace retfuse::nn::ref
