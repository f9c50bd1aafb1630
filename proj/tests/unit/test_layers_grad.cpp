#include <cmath>

#include "doctest.h"
#include "retfuse/losses.hpp"
#include "retfuse/nn/model.hpp"
#include "testutil/gradcheck.hpp"

using namespace retfuse;
using namespace retfuse::nn;

namespace {

ArchConfig tiny_arch() {
  ArchConfig arch;
  arch.image_size = 8;
  arch.widths = {2, 3};
  arch.d_v = 4;
  arch.ehr_inputs = 5;
  arch.ehr_hidden = 4;
  arch.d_e = 3;
  arch.proj_hidden = 4;
  arch.proj_dim = 3;
  return arch;
}

// 0.5 * |y|^2 probe; upstream gradient is y itself.
double quadratic(const Tensor& y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * y[i];
  return 0.5 * acc;
}

}  // namespace

TEST_CASE("dense layer gradients match finite differences") {
  Rng rng(201);
  Dense layer = make_dense(6, 4, rng);
  for (std::size_t i = 0; i < layer.b.size(); ++i) layer.b[i] = rng.normal(0.0, 0.2);
  Tensor x = testutil::random_tensor({3, 6}, rng);

  Dense grad = zeros_like(layer);
  DenseCache cache;
  Tensor y = dense_forward(layer, x, &cache, "t");
  dense_backward(layer, cache, y, grad);

  auto loss = [&] { return quadratic(dense_forward(layer, x, nullptr, "t")); };
  const auto report = testutil::fd_check({{"w", &layer.w}, {"b", &layer.b}},
                                         {{"w", &grad.w}, {"b", &grad.b}}, loss);
  CHECK(report.max_rel_err < 1e-7);
}

TEST_CASE("dense backward matches the hand-computed 2x2 closed form") {
  // loss = |W x|^2 with W = [[1,2],[3,4]] (row-major out x in view: our dense
  // stores (in,out), so set w accordingly), x = [1,1]. dL/dW = 2 (W x) x^T.
  Dense layer;
  layer.w = Tensor({2, 2});
  layer.b = Tensor({2});
  // out_0 = 1*x0 + 2*x1, out_1 = 3*x0 + 4*x1  ->  w[in][out]: w00=1 w01=3 w10=2 w11=4
  layer.w.at2(0, 0) = 1.0;
  layer.w.at2(0, 1) = 3.0;
  layer.w.at2(1, 0) = 2.0;
  layer.w.at2(1, 1) = 4.0;
  Tensor x({1, 2});
  x[0] = 1.0;
  x[1] = 1.0;

  DenseCache cache;
  Tensor y = dense_forward(layer, x, &cache, "t");
  REQUIRE(y[0] == 3.0);
  REQUIRE(y[1] == 7.0);

  Tensor gy({1, 2});
  gy[0] = 2.0 * y[0];
  gy[1] = 2.0 * y[1];
  Dense grad = zeros_like(layer);
  dense_backward(layer, cache, gy, grad);

  // dL/dW(out,in): [[6,6],[14,14]] -> transposed into our (in,out) layout.
  CHECK(grad.w.at2(0, 0) == 6.0);
  CHECK(grad.w.at2(1, 0) == 6.0);
  CHECK(grad.w.at2(0, 1) == 14.0);
  CHECK(grad.w.at2(1, 1) == 14.0);
}

TEST_CASE("conv layer gradients match finite differences") {
  Rng rng(202);
  for (int stride : {1, 2}) {
    Conv2d layer = make_conv(3, 2, 3, stride, 1, rng);
    Tensor x = testutil::random_tensor({2, 2, 7, 7}, rng);

    Conv2d grad = zeros_like(layer);
    ConvCache cache;
    Tensor y = conv2d_forward(layer, x, &cache, "t");
    conv2d_backward(layer, cache, y, grad);

    auto loss = [&] { return quadratic(conv2d_forward(layer, x, nullptr, "t")); };
    const auto report =
        testutil::fd_check({{"w", &layer.w}}, {{"w", &grad.w}}, loss);
    CHECK(report.max_rel_err < 1e-6);
  }
}

TEST_CASE("batch norm gradients match finite differences (2d and 1d)") {
  Rng rng(203);

  // conv -> bn -> quadratic, so bn's input gradient also gets exercised.
  Conv2d conv = make_conv(3, 2, 3, 1, 1, rng);
  BatchNorm bn = make_bn(3);
  for (std::size_t i = 0; i < 3; ++i) {
    bn.gamma[i] = 0.5 + rng.uniform();
    bn.beta[i] = rng.normal(0.0, 0.3);
  }
  Tensor x = testutil::random_tensor({3, 2, 5, 5}, rng);

  auto forward = [&](ConvCache* cc, BnCache* bc) {
    return bn_forward(bn, conv2d_forward(conv, x, cc, "c"), bc, Mode::train, "b");
  };

  Conv2d gconv = zeros_like(conv);
  BatchNorm gbn = zeros_like(bn);
  ConvCache cc;
  BnCache bc;
  Tensor y = forward(&cc, &bc);
  conv2d_backward(conv, cc, bn_backward(bn, bc, y, gbn), gconv);

  auto loss = [&] { return quadratic(forward(nullptr, nullptr)); };
  const auto report = testutil::fd_check(
      {{"conv.w", &conv.w}, {"gamma", &bn.gamma}, {"beta", &bn.beta}},
      {{"conv.w", &gconv.w}, {"gamma", &gbn.gamma}, {"beta", &gbn.beta}}, loss);
  CHECK(report.max_rel_err < 1e-6);

  // 1d path through a dense layer.
  Dense fc = make_dense(4, 3, rng);
  BatchNorm bn1 = make_bn(3);
  Tensor x1 = testutil::random_tensor({5, 4}, rng);
  auto forward1 = [&](DenseCache* dc, BnCache* bc1) {
    return bn_forward(bn1, dense_forward(fc, x1, dc, "f"), bc1, Mode::train, "b1");
  };
  Dense gfc = zeros_like(fc);
  BatchNorm gbn1 = zeros_like(bn1);
  DenseCache dc;
  BnCache bc1;
  Tensor y1 = forward1(&dc, &bc1);
  dense_backward(fc, dc, bn_backward(bn1, bc1, y1, gbn1), gfc);

  auto loss1 = [&] { return quadratic(forward1(nullptr, nullptr)); };
  const auto report1 = testutil::fd_check(
      {{"fc.w", &fc.w}, {"gamma", &bn1.gamma}, {"beta", &bn1.beta}},
      {{"fc.w", &gfc.w}, {"gamma", &gbn1.gamma}, {"beta", &gbn1.beta}}, loss1);
  CHECK(report1.max_rel_err < 1e-6);
}

TEST_CASE("visual encoder probe gradient matches finite differences") {
  Rng rng(204);
  ModelParams model = make_model(tiny_arch(), 77);
  Tensor x = testutil::random_tensor({3, 1, 8, 8}, rng, 0.5);
  Tensor probe = testutil::random_tensor({static_cast<std::size_t>(tiny_arch().d_v)}, rng);

  auto loss = [&] {
    Tensor z = encode_visual(model, x, nullptr, Mode::train);
    double acc = 0.0;
    for (std::size_t b = 0; b < z.dim(0); ++b)
      for (std::size_t k = 0; k < z.dim(1); ++k) acc += probe[k] * z.at2(b, k);
    return acc;
  };

  VisCache cache;
  Tensor z = encode_visual(model, x, &cache, Mode::train);
  Tensor gz(z.shape());
  for (std::size_t b = 0; b < z.dim(0); ++b)
    for (std::size_t k = 0; k < z.dim(1); ++k) gz.at2(b, k) = probe[k];
  ModelParams grads = zeros_like(model);
  backward_visual(model, cache, gz, grads);

  ParamFilter filter;
  filter.ehr = filter.head_oct = filter.head_ehr = filter.head_fuse = false;
  std::vector<std::pair<std::string, Tensor*>> params;
  std::vector<std::pair<std::string, const Tensor*>> grad_list;
  testutil::collect_params(model, grads, filter, params, grad_list);
  const auto report = testutil::fd_check(params, grad_list, loss);
  CHECK(report.max_rel_err < 1e-5);
}

TEST_CASE("fused model BCE gradient matches finite differences") {
  Rng rng(205);
  ModelParams model = make_model(tiny_arch(), 78);
  Tensor x_img = testutil::random_tensor({3, 1, 8, 8}, rng, 0.5);
  Tensor x_ehr = testutil::random_tensor({3, 5}, rng);
  Tensor y({3});
  y[0] = 1.0;
  y[1] = 0.0;
  y[2] = 1.0;

  auto loss = [&] {
    const auto out = forward_fused(model, x_img, x_ehr, nullptr, Mode::train);
    return bce_loss(out.y_hat, y).loss;
  };

  FusedCache cache;
  const auto out = forward_fused(model, x_img, x_ehr, &cache, Mode::train);
  const auto bce = bce_loss(out.y_hat, y);
  ModelParams grads = backward_fused(model, cache, bce.grad);

  ParamFilter filter;  // everything except proj/tau
  std::vector<std::pair<std::string, Tensor*>> params;
  std::vector<std::pair<std::string, const Tensor*>> grad_list;
  testutil::collect_params(model, grads, filter, params, grad_list);
  const auto report = testutil::fd_check(params, grad_list, loss);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("projection head NT-Xent gradient matches finite differences") {
  Rng rng(206);
  ArchConfig arch = tiny_arch();
  arch.proj_hidden = 8;  // wide enough that the relu head keeps rank at init
  ModelParams model = make_model(arch, 79);
  Tensor x = testutil::random_tensor({4, 1, 8, 8}, rng, 0.5);  // K=2 views

  auto loss = [&] {
    Tensor p = encode_project(model, x, nullptr, Mode::train);
    return nt_xent_loss(p, model.temperature).loss;
  };

  ProjCache cache;
  Tensor p = encode_project(model, x, &cache, Mode::train);
  const auto nt = nt_xent_loss(p, model.temperature);
  ModelParams grads = backward_project(model, cache, nt.grad_z);

  double gz_norm = 0.0;
  for (std::size_t i = 0; i < nt.grad_z.size(); ++i) gz_norm += nt.grad_z[i] * nt.grad_z[i];
  REQUIRE(gz_norm > 1e-8);  // instance must not sit on the symmetric saddle

  ParamFilter filter;
  filter.ehr = filter.head_oct = filter.head_ehr = filter.head_fuse = false;
  filter.proj = true;
  std::vector<std::pair<std::string, Tensor*>> params;
  std::vector<std::pair<std::string, const Tensor*>> grad_list;
  testutil::collect_params(model, grads, filter, params, grad_list);
  const auto report = testutil::fd_check(params, grad_list, loss);
  CHECK(report.max_rel_err < 1e-5);
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
  ModelParams model = make_model(tiny_arch(), 80);
  Rng rng(207);
  Tensor x_img = testutil::random_tensor({2, 1, 8, 8}, rng);
  Tensor x_ehr = testutil::random_tensor({2, 5}, rng);

  FusedCache cache;
  forward_fused(model, x_img, x_ehr, &cache, Mode::train);
  ModelParams grads = backward_fused(model, cache, Tensor({2}));

  ModelParams dummy = zeros_like(model);
  bool all_zero = true;
  visit_params(grads, dummy, ParamFilter{}, [&](const std::string&, Tensor& g, Tensor&) {
    for (std::size_t i = 0; i < g.size(); ++i) all_zero = all_zero && g[i] == 0.0;
  });
  CHECK(all_zero);
}
