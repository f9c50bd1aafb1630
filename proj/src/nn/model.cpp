#include "retfuse/nn/model.hpp"

#include <cmath>

#include "retfuse/errors.hpp"

namespace retfuse::nn {

ModelParams make_model(const ArchConfig& arch, std::uint64_t seed) {
  if (arch.widths.empty()) throw ConfigError("architecture needs at least one stage width");
  Rng rng(stream_seed(seed, "model-init"));

  ModelParams m;
  m.arch = arch;

  m.visual.stem = make_conv(arch.widths[0], 1, 3, arch.stem_stride, 1, rng);
  m.visual.stem_bn = make_bn(arch.widths[0]);
  std::size_t in_ch = arch.widths[0];
  for (std::size_t w : arch.widths) {
    ResidualStage stage;
    stage.down = make_conv(w, in_ch, 3, 2, 1, rng);
    stage.bn_down = make_bn(w);
    stage.c1 = make_conv(w, w, 3, 1, 1, rng);
    stage.bn1 = make_bn(w);
    stage.c2 = make_conv(w, w, 3, 1, 1, rng);
    stage.bn2 = make_bn(w);
    m.visual.stages.push_back(std::move(stage));
    in_ch = w;
  }
  m.visual.fc = make_dense(arch.widths.back(), arch.d_v, rng);

  m.ehr.fc1 = make_dense(arch.ehr_inputs, arch.ehr_hidden, rng);
  m.ehr.bn1 = make_bn(arch.ehr_hidden);
  m.ehr.fc2 = make_dense(arch.ehr_hidden, arch.d_e, rng);
  m.ehr.bn2 = make_bn(arch.d_e);

  m.head_oct = make_dense(arch.d_v, 1, rng);
  m.head_ehr = make_dense(arch.d_e, 1, rng);
  m.head_fuse = make_dense(2, 1, rng);

  m.proj.fc1 = make_dense(arch.d_v, arch.proj_hidden, rng);
  m.proj.fc2 = make_dense(arch.proj_hidden, arch.proj_dim, rng);

  m.temperature = TemperatureState{};
  m.log_tau = Tensor::scalar(std::log(m.temperature.init));
  m.temperature.tau = m.temperature.init;
  return m;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams g;
  g.arch = p.arch;
  g.visual.stem = zeros_like(p.visual.stem);
  g.visual.stem_bn = zeros_like(p.visual.stem_bn);
  for (const auto& stage : p.visual.stages) {
    ResidualStage zs;
    zs.down = zeros_like(stage.down);
    zs.bn_down = zeros_like(stage.bn_down);
    zs.c1 = zeros_like(stage.c1);
    zs.bn1 = zeros_like(stage.bn1);
    zs.c2 = zeros_like(stage.c2);
    zs.bn2 = zeros_like(stage.bn2);
    g.visual.stages.push_back(std::move(zs));
  }
  g.visual.fc = zeros_like(p.visual.fc);
  g.ehr.fc1 = zeros_like(p.ehr.fc1);
  g.ehr.bn1 = zeros_like(p.ehr.bn1);
  g.ehr.fc2 = zeros_like(p.ehr.fc2);
  g.ehr.bn2 = zeros_like(p.ehr.bn2);
  g.head_oct = zeros_like(p.head_oct);
  g.head_ehr = zeros_like(p.head_ehr);
  g.head_fuse = zeros_like(p.head_fuse);
  g.proj.fc1 = zeros_like(p.proj.fc1);
  g.proj.fc2 = zeros_like(p.proj.fc2);
  g.log_tau = Tensor({1});
  g.temperature = p.temperature;
  return g;
}

namespace {

void visit_dense(const std::string& name, Dense& p, Dense& g,
                 const std::function<void(const std::string&, Tensor&, Tensor&)>& fn) {
  fn(name + ".w", p.w, g.w);
  fn(name + ".b", p.b, g.b);
}

void visit_bn(const std::string& name, BatchNorm& p, BatchNorm& g,
              const std::function<void(const std::string&, Tensor&, Tensor&)>& fn) {
  fn(name + ".gamma", p.gamma, g.gamma);
  fn(name + ".beta", p.beta, g.beta);
}

}  // namespace

void visit_params(ModelParams& params, ModelParams& grads, const ParamFilter& filter,
                  const std::function<void(const std::string&, Tensor&, Tensor&)>& fn) {
  if (filter.visual) {
    fn("visual.stem.w", params.visual.stem.w, grads.visual.stem.w);
    visit_bn("visual.stem_bn", params.visual.stem_bn, grads.visual.stem_bn, fn);
    for (std::size_t i = 0; i < params.visual.stages.size(); ++i) {
      const std::string base = "visual.stage" + std::to_string(i);
      auto& sp = params.visual.stages[i];
      auto& sg = grads.visual.stages[i];
      fn(base + ".down.w", sp.down.w, sg.down.w);
      visit_bn(base + ".bn_down", sp.bn_down, sg.bn_down, fn);
      fn(base + ".c1.w", sp.c1.w, sg.c1.w);
      visit_bn(base + ".bn1", sp.bn1, sg.bn1, fn);
      fn(base + ".c2.w", sp.c2.w, sg.c2.w);
      visit_bn(base + ".bn2", sp.bn2, sg.bn2, fn);
    }
    visit_dense("visual.fc", params.visual.fc, grads.visual.fc, fn);
  }
  if (filter.ehr) {
    visit_dense("ehr.fc1", params.ehr.fc1, grads.ehr.fc1, fn);
    visit_bn("ehr.bn1", params.ehr.bn1, grads.ehr.bn1, fn);
    visit_dense("ehr.fc2", params.ehr.fc2, grads.ehr.fc2, fn);
    visit_bn("ehr.bn2", params.ehr.bn2, grads.ehr.bn2, fn);
  }
  if (filter.head_oct) visit_dense("head_oct", params.head_oct, grads.head_oct, fn);
  if (filter.head_ehr) visit_dense("head_ehr", params.head_ehr, grads.head_ehr, fn);
  if (filter.head_fuse) visit_dense("head_fuse", params.head_fuse, grads.head_fuse, fn);
  if (filter.proj) {
    visit_dense("proj.fc1", params.proj.fc1, grads.proj.fc1, fn);
    visit_dense("proj.fc2", params.proj.fc2, grads.proj.fc2, fn);
  }
  if (filter.tau) {
    fn("log_tau", params.log_tau, grads.log_tau);
  }
}

namespace {

Tensor stage_forward(ResidualStage& stage, const Tensor& x, StageCache* cache, Mode mode,
                     const std::string& name) {
  ConvCache cd, c1c, c2c;
  BnCache bd, b1, b2;
  ReluCache r0, r1, r_out;

  Tensor y0 = relu_forward(
      bn_forward(stage.bn_down, conv2d_forward(stage.down, x, cache ? &cd : nullptr,
                                               (name + ".down").c_str()),
                 cache ? &bd : nullptr, mode, (name + ".bn_down").c_str()),
      cache ? &r0 : nullptr);
  Tensor h = relu_forward(
      bn_forward(stage.bn1, conv2d_forward(stage.c1, y0, cache ? &c1c : nullptr,
                                           (name + ".c1").c_str()),
                 cache ? &b1 : nullptr, mode, (name + ".bn1").c_str()),
      cache ? &r1 : nullptr);
  Tensor h2 = bn_forward(stage.bn2,
                         conv2d_forward(stage.c2, h, cache ? &c2c : nullptr,
                                        (name + ".c2").c_str()),
                         cache ? &b2 : nullptr, mode, (name + ".bn2").c_str());
  Tensor sum(h2.shape());
  kernels::add(y0, h2, sum);
  Tensor out = relu_forward(sum, cache ? &r_out : nullptr);
  check_finite(out, name.c_str());

  if (cache) {
    cache->down = std::move(cd);
    cache->bn_down = std::move(bd);
    cache->r0 = std::move(r0);
    cache->c1 = std::move(c1c);
    cache->bn1 = std::move(b1);
    cache->r1 = std::move(r1);
    cache->c2 = std::move(c2c);
    cache->bn2 = std::move(b2);
    cache->r_out = std::move(r_out);
  }
  return out;
}

Tensor stage_backward(const ResidualStage& stage, const StageCache& cache, const Tensor& gy,
                      ResidualStage& grad) {
  Tensor g_sum = relu_backward(cache.r_out, gy);
  // Residual: g_sum flows both into the block and the identity branch.
  Tensor g_h = conv2d_backward(stage.c2, cache.c2,
                               bn_backward(stage.bn2, cache.bn2, g_sum, grad.bn2), grad.c2);
  Tensor g_y0 = conv2d_backward(stage.c1, cache.c1,
                                bn_backward(stage.bn1, cache.bn1, relu_backward(cache.r1, g_h),
                                            grad.bn1),
                                grad.c1);
  g_y0.add_scaled(g_sum, 1.0);
  return conv2d_backward(stage.down, cache.down,
                         bn_backward(stage.bn_down, cache.bn_down,
                                     relu_backward(cache.r0, g_y0), grad.bn_down),
                         grad.down);
}

}  // namespace

Tensor encode_visual(ModelParams& params, const Tensor& x, VisCache* cache, Mode mode) {
  const std::size_t s = params.arch.image_size;
  if (x.ndim() != 4 || x.dim(1) != 1 || x.dim(2) != s || x.dim(3) != s)
    throw ShapeError("visual encoder expects (B, 1, " + std::to_string(s) + ", " +
                     std::to_string(s) + ") input");

  ConvCache stem_c;
  BnCache stem_b;
  ReluCache stem_r;
  Tensor h = relu_forward(
      bn_forward(params.visual.stem_bn,
                 conv2d_forward(params.visual.stem, x, cache ? &stem_c : nullptr, "visual.stem"),
                 cache ? &stem_b : nullptr, mode, "visual.stem_bn"),
      cache ? &stem_r : nullptr);
  if (cache) {
    cache->stem = std::move(stem_c);
    cache->stem_bn = std::move(stem_b);
    cache->stem_relu = std::move(stem_r);
    cache->stages.resize(params.visual.stages.size());
  }

  for (std::size_t i = 0; i < params.visual.stages.size(); ++i) {
    h = stage_forward(params.visual.stages[i], h, cache ? &cache->stages[i] : nullptr, mode,
                      "visual.stage" + std::to_string(i));
  }

  if (cache) {
    cache->pool_h = h.dim(2);
    cache->pool_w = h.dim(3);
  }
  Tensor pooled = gap_forward(h);
  Tensor z = dense_forward(params.visual.fc, pooled, cache ? &cache->fc : nullptr, "visual.fc");
  check_finite(z, "visual.fc");
  return z;
}

void backward_visual(const ModelParams& params, const VisCache& cache, const Tensor& gz,
                     ModelParams& grads) {
  Tensor g_pool = dense_backward(params.visual.fc, cache.fc, gz, grads.visual.fc);
  Tensor g = gap_backward(g_pool, cache.pool_h, cache.pool_w);
  for (std::size_t i = params.visual.stages.size(); i-- > 0;) {
    g = stage_backward(params.visual.stages[i], cache.stages[i], g, grads.visual.stages[i]);
  }
  conv2d_backward(params.visual.stem, cache.stem,
                  bn_backward(params.visual.stem_bn, cache.stem_bn,
                              relu_backward(cache.stem_relu, g), grads.visual.stem_bn),
                  grads.visual.stem);
}

Tensor encode_ehr(ModelParams& params, const Tensor& x, EhrCache* cache, Mode mode) {
  if (x.ndim() != 2 || x.dim(1) != params.arch.ehr_inputs)
    throw ShapeError("ehr encoder expects (B, " + std::to_string(params.arch.ehr_inputs) +
                     ") input");
  DenseCache d1, d2;
  BnCache b1, b2;
  ReluCache r1, r2;
  Tensor h = relu_forward(
      bn_forward(params.ehr.bn1, dense_forward(params.ehr.fc1, x, cache ? &d1 : nullptr, "ehr.fc1"),
                 cache ? &b1 : nullptr, mode, "ehr.bn1"),
      cache ? &r1 : nullptr);
  Tensor z = relu_forward(
      bn_forward(params.ehr.bn2, dense_forward(params.ehr.fc2, h, cache ? &d2 : nullptr, "ehr.fc2"),
                 cache ? &b2 : nullptr, mode, "ehr.bn2"),
      cache ? &r2 : nullptr);
  check_finite(z, "ehr.bn2");
  if (cache) {
    cache->fc1 = std::move(d1);
    cache->bn1 = std::move(b1);
    cache->r1 = std::move(r1);
    cache->fc2 = std::move(d2);
    cache->bn2 = std::move(b2);
    cache->r2 = std::move(r2);
  }
  return z;
}

Tensor backward_ehr(const ModelParams& params, const EhrCache& cache, const Tensor& gz,
                    ModelParams& grads) {
  Tensor g = dense_backward(
      params.ehr.fc2, cache.fc2,
      bn_backward(params.ehr.bn2, cache.bn2, relu_backward(cache.r2, gz), grads.ehr.bn2),
      grads.ehr.fc2);
  return dense_backward(
      params.ehr.fc1, cache.fc1,
      bn_backward(params.ehr.bn1, cache.bn1, relu_backward(cache.r1, g), grads.ehr.bn1),
      grads.ehr.fc1);
}

FusedOut forward_fused(ModelParams& params, const Tensor& x_img, const Tensor& x_ehr,
                       FusedCache* cache, Mode mode) {
  if (x_img.dim(0) != x_ehr.dim(0))
    throw ShapeError("fused forward: image and ehr batch sizes differ");
  const std::size_t batch = x_img.dim(0);

  Tensor z_oct = encode_visual(params, x_img, cache ? &cache->vis : nullptr, mode);
  Tensor z_ehr = encode_ehr(params, x_ehr, cache ? &cache->ehr : nullptr, mode);

  Tensor p_oct = dense_forward(params.head_oct, z_oct, cache ? &cache->head_oct : nullptr,
                               "head_oct");
  Tensor p_ehr = dense_forward(params.head_ehr, z_ehr, cache ? &cache->head_ehr : nullptr,
                               "head_ehr");

  // Late fusion: concatenate the two modality logits.
  Tensor fused({batch, 2});
  for (std::size_t i = 0; i < batch; ++i) {
    fused.at2(i, 0) = p_oct[i];
    fused.at2(i, 1) = p_ehr[i];
  }
  Tensor logit = dense_forward(params.head_fuse, fused, cache ? &cache->head_fuse : nullptr,
                               "head_fuse");
  check_finite(logit, "head_fuse");

  FusedOut out;
  out.y_hat = Tensor({batch});
  out.p_oct = Tensor({batch});
  out.p_ehr = Tensor({batch});
  for (std::size_t i = 0; i < batch; ++i) {
    out.y_hat[i] = sigmoid(logit[i]);
    out.p_oct[i] = p_oct[i];
    out.p_ehr[i] = p_ehr[i];
  }
  if (cache) {
    cache->valid = true;
    cache->owner = &params;
    cache->y_hat = out.y_hat;
  }
  return out;
}

ModelParams backward_fused(const ModelParams& params, FusedCache& cache, const Tensor& g_yhat) {
  if (!cache.valid) throw StateError("backward_fused: stale or missing forward cache");
  if (cache.owner != &params)
    throw StateError("backward_fused: cache does not belong to these parameters");
  cache.valid = false;

  const std::size_t batch = g_yhat.size();
  ModelParams grads = zeros_like(params);

  // Chain through the sigmoid: dL/dlogit = dL/dy_hat * y_hat (1 - y_hat).
  Tensor g_logit({batch, 1});
  for (std::size_t i = 0; i < batch; ++i) {
    const double y = cache.y_hat[i];
    g_logit[i] = g_yhat[i] * y * (1.0 - y);
  }

  Tensor g_fused = dense_backward(params.head_fuse, cache.head_fuse, g_logit, grads.head_fuse);
  Tensor g_p_oct({batch, 1}), g_p_ehr({batch, 1});
  for (std::size_t i = 0; i < batch; ++i) {
    g_p_oct[i] = g_fused.at2(i, 0);
    g_p_ehr[i] = g_fused.at2(i, 1);
  }

  Tensor g_z_oct = dense_backward(params.head_oct, cache.head_oct, g_p_oct, grads.head_oct);
  Tensor g_z_ehr = dense_backward(params.head_ehr, cache.head_ehr, g_p_ehr, grads.head_ehr);

  backward_visual(params, cache.vis, g_z_oct, grads);
  backward_ehr(params, cache.ehr, g_z_ehr, grads);
  return grads;
}

Tensor forward_visual_only(ModelParams& params, const Tensor& x_img, UniCache* cache,
                           Mode mode) {
  const std::size_t batch = x_img.dim(0);
  Tensor z = encode_visual(params, x_img, cache ? &cache->vis : nullptr, mode);
  Tensor logit = dense_forward(params.head_oct, z, cache ? &cache->head : nullptr, "head_oct");
  check_finite(logit, "head_oct");
  Tensor y_hat({batch});
  for (std::size_t i = 0; i < batch; ++i) y_hat[i] = sigmoid(logit[i]);
  if (cache) {
    cache->valid = true;
    cache->owner = &params;
    cache->y_hat = y_hat;
  }
  return y_hat;
}

ModelParams backward_visual_only(const ModelParams& params, UniCache& cache,
                                 const Tensor& g_yhat) {
  if (!cache.valid) throw StateError("backward_visual_only: stale or missing forward cache");
  if (cache.owner != &params)
    throw StateError("backward_visual_only: cache does not belong to these parameters");
  cache.valid = false;

  const std::size_t batch = g_yhat.size();
  ModelParams grads = zeros_like(params);
  Tensor g_logit({batch, 1});
  for (std::size_t i = 0; i < batch; ++i) {
    const double y = cache.y_hat[i];
    g_logit[i] = g_yhat[i] * y * (1.0 - y);
  }
  Tensor g_z = dense_backward(params.head_oct, cache.head, g_logit, grads.head_oct);
  backward_visual(params, cache.vis, g_z, grads);
  return grads;
}

Tensor encode_project(ModelParams& params, const Tensor& x, ProjCache* cache, Mode mode) {
  Tensor z = encode_visual(params, x, cache ? &cache->vis : nullptr, mode);
  DenseCache d1, d2;
  ReluCache r1;
  Tensor h = relu_forward(dense_forward(params.proj.fc1, z, cache ? &d1 : nullptr, "proj.fc1"),
                          cache ? &r1 : nullptr);
  Tensor p = dense_forward(params.proj.fc2, h, cache ? &d2 : nullptr, "proj.fc2");
  check_finite(p, "proj.fc2");
  if (cache) {
    cache->fc1 = std::move(d1);
    cache->r1 = std::move(r1);
    cache->fc2 = std::move(d2);
    cache->valid = true;
    cache->owner = &params;
  }
  return p;
}

ModelParams backward_project(const ModelParams& params, ProjCache& cache, const Tensor& g_proj) {
  if (!cache.valid) throw StateError("backward_project: stale or missing forward cache");
  if (cache.owner != &params)
    throw StateError("backward_project: cache does not belong to these parameters");
  cache.valid = false;

  ModelParams grads = zeros_like(params);
  Tensor g_h = dense_backward(params.proj.fc2, cache.fc2, g_proj, grads.proj.fc2);
  Tensor g_z = dense_backward(params.proj.fc1, cache.fc1, relu_backward(cache.r1, g_h),
                              grads.proj.fc1);
  backward_visual(params, cache.vis, g_z, grads);
  return grads;
}

}  // namespace retfuse::nn
