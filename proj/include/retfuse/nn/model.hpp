#pragma once

#include <functional>
#include <string>
#include <vector>

#include "retfuse/losses.hpp"
#include "retfuse/nn/layers.hpp"

namespace retfuse::nn {

// Desk-scale stand-in for a ResNet backbone: a stem conv followed by
// residual stages (strided projection + one identity block each), global
// average pooling and a dense feature layer. Everything is configurable so
// widths and depth can grow.
struct ArchConfig {
  std::size_t image_size = 64;
  int stem_stride = 1;
  std::vector<std::size_t> widths = {8, 16, 32, 64};
  std::size_t d_v = 64;   // visual representation width
  std::size_t ehr_inputs = 34;
  std::size_t ehr_hidden = 32;
  std::size_t d_e = 16;   // ehr representation width
  std::size_t proj_hidden = 64;
  std::size_t proj_dim = 32;
};

struct ResidualStage {
  Conv2d down;      // 3x3 stride-2 projection into the stage width
  BatchNorm bn_down;
  Conv2d c1;
  BatchNorm bn1;
  Conv2d c2;
  BatchNorm bn2;
};

struct VisualEncoder {
  Conv2d stem;
  BatchNorm stem_bn;
  std::vector<ResidualStage> stages;
  Dense fc;  // pooled channels -> d_v
};

struct EhrEncoder {
  Dense fc1;
  BatchNorm bn1;
  Dense fc2;
  BatchNorm bn2;
};

// SimCLR-style projection on top of z_oct; used during pretraining only and
// discarded before fine-tuning.
struct ProjectionHead {
  Dense fc1;
  Dense fc2;
};

struct ModelParams {
  ArchConfig arch;
  VisualEncoder visual;
  EhrEncoder ehr;
  Dense head_oct;   // d_v -> 1 logit
  Dense head_ehr;   // d_e -> 1 logit
  Dense head_fuse;  // 2 -> 1
  ProjectionHead proj;
  Tensor log_tau;   // 1-element; optimized in log space during pretraining
  TemperatureState temperature;
};

ModelParams make_model(const ArchConfig& arch, std::uint64_t seed);
ModelParams zeros_like(const ModelParams& p);

// Which parameter blocks participate in an optimization pass.
struct ParamFilter {
  bool visual = true;
  bool ehr = true;
  bool head_oct = true;
  bool head_ehr = true;
  bool head_fuse = true;
  bool proj = false;
  bool tau = false;

  static ParamFilter finetune_multimodal() { return {}; }
  static ParamFilter finetune_unimodal() {
    ParamFilter f;
    f.ehr = f.head_ehr = f.head_fuse = false;
    return f;
  }
  static ParamFilter pretrain() {
    ParamFilter f;
    f.ehr = f.head_oct = f.head_ehr = f.head_fuse = false;
    f.proj = f.tau = true;
    return f;
  }
};

// Visits (name, param, grad) tensor pairs in a fixed order.
void visit_params(ModelParams& params, ModelParams& grads, const ParamFilter& filter,
                  const std::function<void(const std::string&, Tensor&, Tensor&)>& fn);

struct StageCache {
  ConvCache down;
  BnCache bn_down;
  ReluCache r0;
  ConvCache c1;
  BnCache bn1;
  ReluCache r1;
  ConvCache c2;
  BnCache bn2;
  ReluCache r_out;
};

struct VisCache {
  ConvCache stem;
  BnCache stem_bn;
  ReluCache stem_relu;
  std::vector<StageCache> stages;
  std::size_t pool_h = 0, pool_w = 0;
  DenseCache fc;
};

struct EhrCache {
  DenseCache fc1;
  BnCache bn1;
  ReluCache r1;
  DenseCache fc2;
  BnCache bn2;
  ReluCache r2;
};

struct FusedCache {
  bool valid = false;
  const ModelParams* owner = nullptr;
  VisCache vis;
  DenseCache head_oct;
  EhrCache ehr;
  DenseCache head_ehr;
  DenseCache head_fuse;
  Tensor y_hat;  // (B)
};

struct ProjCache {
  bool valid = false;
  const ModelParams* owner = nullptr;
  VisCache vis;
  DenseCache fc1;
  ReluCache r1;
  DenseCache fc2;
};

// x: (B, 1, S, S) -> z_oct (B, d_v)
Tensor encode_visual(ModelParams& params, const Tensor& x, VisCache* cache, Mode mode);
// gz: (B, d_v); accumulates visual-encoder grads, returns nothing upstream.
void backward_visual(const ModelParams& params, const VisCache& cache, const Tensor& gz,
                     ModelParams& grads);

// x: (B, 34) -> z_ehr (B, d_e)
Tensor encode_ehr(ModelParams& params, const Tensor& x, EhrCache* cache, Mode mode);
Tensor backward_ehr(const ModelParams& params, const EhrCache& cache, const Tensor& gz,
                    ModelParams& grads);

struct FusedOut {
  Tensor y_hat;  // (B), sigmoid probabilities
  Tensor p_oct;  // (B), pre-sigmoid modality logits
  Tensor p_ehr;  // (B)
};

FusedOut forward_fused(ModelParams& params, const Tensor& x_img, const Tensor& x_ehr,
                       FusedCache* cache, Mode mode);

// g_yhat: (B) upstream dLoss/dy_hat. Consumes the cache.
ModelParams backward_fused(const ModelParams& params, FusedCache& cache, const Tensor& g_yhat);

// Pretraining path: visual encoder + projection head.
Tensor encode_project(ModelParams& params, const Tensor& x, ProjCache* cache, Mode mode);
ModelParams backward_project(const ModelParams& params, ProjCache& cache, const Tensor& g_proj);

struct UniCache {
  bool valid = false;
  const ModelParams* owner = nullptr;
  VisCache vis;
  DenseCache head;
  Tensor y_hat;
};

// Image-only variant: y_hat = sigmoid(p_oct). Returns (B) probabilities.
Tensor forward_visual_only(ModelParams& params, const Tensor& x_img, UniCache* cache, Mode mode);
ModelParams backward_visual_only(const ModelParams& params, UniCache& cache,
                                 const Tensor& g_yhat);

}  // namespace retfuse::nn
