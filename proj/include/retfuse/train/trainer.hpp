#pragma once

#include <optional>
#include <string>
#include <vector>

#include "retfuse/augment.hpp"
#include "retfuse/features.hpp"
#include "retfuse/nn/model.hpp"
#include "retfuse/records.hpp"
#include "retfuse/train/optim.hpp"

namespace retfuse::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  std::size_t batch_size = 32;
  int max_epochs = 30;
  int patience = 10;
  double min_delta = 1e-6;
  OptimKind optimizer = OptimKind::adam;
  augment::AugmentPolicy::Kind augment_kind = augment::AugmentPolicy::Kind::simple;
  bool use_augmentation = true;
  double eta_min = 0.0;
  bool tau_per_step_clamp = false;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double tau = 0.0;
};

struct TrainHistory {
  std::vector<EpochLog> epochs;
  double tau_initial = 0.0;
  int freeze_epoch = 0;  // 0 = the temperature never froze
  int stop_epoch = 0;
  int best_epoch = 0;
  std::string stop_reason;  // early_stopping | max_epochs
};

enum class PretrainMode { all_slices, mid_slice, infrared_only };
const char* to_string(PretrainMode m);
PretrainMode pretrain_mode_from_string(const std::string& s);

// all_slices requires fully materialized volumes.
std::vector<const ImageGrid*> collect_pretrain_images(const std::vector<ScanStudy>& studies,
                                                      PretrainMode mode);

struct ImageStats {
  double mean = 0.0;
  double stdev = 1.0;
};

ImageStats image_stats(const std::vector<const ImageGrid*>& images);

struct PretrainResult {
  nn::ModelParams model;  // best-validation weights; projection head included
  TrainHistory history;
  ImageStats stats;
};

// SimCLR-style contrastive pretraining of the visual encoder: two harsh
// views per image, NT-Xent with the learnable floor-clamped temperature,
// AdamW, cosine annealing, early stopping on a fixed 90/10 validation split.
PretrainResult pretrain(const std::vector<const ImageGrid*>& images,
                        const nn::ArchConfig& arch, const TrainConfig& config);

// One entry per labeled sample; images point into the study list.
struct FinetuneData {
  std::vector<const ImageGrid*> images;
  std::vector<features::RawFeatureRow> rows;
  std::vector<int> labels;
};

struct FinetuneResult {
  nn::ModelParams model;  // best-validation weights
  features::Normalizer normalizer;
  ImageStats stats;
  TrainHistory history;
  bool multimodal = true;
};

// End-to-end supervised training with the BCE objective. The feature
// normalizer and image statistics are fitted on the training portion only.
// `pretrained` (when given) initializes the visual encoder; every head is
// freshly initialized. multimodal=false trains the image-only variant
// (sigmoid of the visual head logit).
FinetuneResult finetune(const nn::ModelParams* pretrained, const FinetuneData& data,
                        const std::vector<std::size_t>& train_idx,
                        const std::vector<std::size_t>& val_idx, const nn::ArchConfig& arch,
                        const TrainConfig& config, bool multimodal);

// Inference probabilities for the given sample indices.
std::vector<double> predict(nn::ModelParams& model, const FinetuneData& data,
                            const std::vector<std::size_t>& idx,
                            const features::Normalizer& normalizer, const ImageStats& stats,
                            bool multimodal, std::size_t batch_size = 64);

// Embeddings z_oct under the frozen encoder (inference mode), for probes.
std::vector<std::vector<double>> embed_images(nn::ModelParams& model,
                                              const std::vector<const ImageGrid*>& images,
                                              const ImageStats& stats,
                                              std::size_t batch_size = 64);

}  // namespace retfuse::train
