#include "retfuse/train/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "retfuse/errors.hpp"
#include "retfuse/losses.hpp"
#include "retfuse/train/schedule.hpp"

namespace retfuse::train {

void validate(const TrainConfig& config) {
  if (config.learning_rate < 0.0) throw ConfigError("train: learning rate must be non-negative");
  if (config.weight_decay < 0.0) throw ConfigError("train: weight decay must be non-negative");
  if (config.batch_size < 2) throw ConfigError("train: batch size must be at least 2");
  if (config.max_epochs < 1) throw ConfigError("train: max_epochs must be at least 1");
  if (config.patience < 1) throw ConfigError("train: patience must be at least 1");
  if (config.min_delta < 0.0) throw ConfigError("train: min_delta must be non-negative");
}

const char* to_string(PretrainMode m) {
  switch (m) {
    case PretrainMode::all_slices: return "all_slices";
    case PretrainMode::mid_slice: return "mid_slice";
    default: return "infrared_only";
  }
}

PretrainMode pretrain_mode_from_string(const std::string& s) {
  if (s == "all_slices") return PretrainMode::all_slices;
  if (s == "mid_slice") return PretrainMode::mid_slice;
  if (s == "infrared_only") return PretrainMode::infrared_only;
  throw ConfigError("unknown pretrain mode: " + s);
}

std::vector<const ImageGrid*> collect_pretrain_images(const std::vector<ScanStudy>& studies,
                                                      PretrainMode mode) {
  std::vector<const ImageGrid*> images;
  for (const auto& study : studies) {
    switch (mode) {
      case PretrainMode::all_slices:
        if (!study.full_volume)
          throw ConfigError("all-slices pretraining needs fully materialized volumes");
        for (const auto& slice : study.oct_volume) images.push_back(&slice);
        break;
      case PretrainMode::mid_slice:
        images.push_back(&study.mid_slice());
        break;
      case PretrainMode::infrared_only:
        if (study.infrared) images.push_back(&*study.infrared);
        break;
    }
  }
  return images;
}

ImageStats image_stats(const std::vector<const ImageGrid*>& images) {
  ImageStats stats;
  if (images.empty()) return stats;
  double sum = 0.0, count = 0.0;
  for (const ImageGrid* img : images) {
    for (double p : img->pixels) sum += p;
    count += static_cast<double>(img->pixels.size());
  }
  stats.mean = sum / count;
  double sq = 0.0;
  for (const ImageGrid* img : images)
    for (double p : img->pixels) sq += (p - stats.mean) * (p - stats.mean);
  stats.stdev = std::sqrt(sq / count);
  if (stats.stdev < 1e-8) stats.stdev = 1.0;
  return stats;
}

namespace {

using augment::AugmentPolicy;

// Packs images (optionally resized) into a (N, 1, S, S) tensor, normalized
// with the training-set statistics.
void pack_image(const ImageGrid& img, std::size_t image_size, const ImageStats& stats,
                Tensor& batch, std::size_t row) {
  const ImageGrid* src = &img;
  ImageGrid resized;
  if (img.height != image_size || img.width != image_size) {
    resized = augment::resize_bilinear(img, image_size, image_size);
    src = &resized;
  }
  double* out = batch.data() + row * image_size * image_size;
  for (std::size_t i = 0; i < src->pixels.size(); ++i)
    out[i] = (src->pixels[i] - stats.mean) / stats.stdev;
}

struct ParamRefs {
  std::vector<std::string> names;
  std::vector<Tensor*> params;
  std::vector<bool> skip_decay;

  std::vector<const Tensor*> grads_of(nn::ModelParams& grads, const nn::ParamFilter& filter) {
    std::vector<const Tensor*> out;
    // Aliasing grads for both visit slots is fine; only addresses are taken.
    nn::visit_params(grads, grads, filter,
                     [&](const std::string&, Tensor& g, Tensor&) { out.push_back(&g); });
    return out;
  }

  static ParamRefs collect(nn::ModelParams& model, const nn::ParamFilter& filter) {
    ParamRefs refs;
    nn::ModelParams dummy = nn::zeros_like(model);
    nn::visit_params(model, dummy, filter,
                     [&](const std::string& name, Tensor& p, Tensor&) {
                       refs.names.push_back(name);
                       refs.params.push_back(&p);
                       refs.skip_decay.push_back(name == "log_tau");
                     });
    return refs;
  }
};

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

// Chunks of `batch`, except the last one absorbs a would-be single-sample
// tail (batch norm needs at least two values per channel).
std::vector<std::pair<std::size_t, std::size_t>> chunk_ranges(std::size_t n,
                                                              std::size_t batch) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t lo = 0;
  while (lo < n) {
    std::size_t hi = std::min(lo + batch, n);
    if (n - hi == 1) hi = n;
    out.emplace_back(lo, hi);
    lo = hi;
  }
  return out;
}

}  // namespace

PretrainResult pretrain(const std::vector<const ImageGrid*>& images, const nn::ArchConfig& arch,
                        const TrainConfig& config) {
  validate(config);
  if (images.size() < 4) throw ConfigError("pretrain: needs at least 4 images");
  if (config.batch_size > images.size())
    throw ConfigError("pretrain: batch size exceeds dataset size");

  // 90/10 train/validation split of the image pool.
  Rng split_rng(stream_seed(config.seed, "pretrain-split"));
  auto order = shuffled_indices(images.size(), split_rng);
  const std::size_t n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(images.size()))));
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());

  std::vector<const ImageGrid*> train_images;
  for (auto i : train_idx) train_images.push_back(images[i]);
  const ImageStats stats = image_stats(train_images);

  nn::ModelParams model = nn::make_model(arch, stream_seed(config.seed, "model-init"));
  const nn::ParamFilter filter = nn::ParamFilter::pretrain();
  ParamRefs refs = ParamRefs::collect(model, filter);
  model.temperature.per_step_clamp = config.tau_per_step_clamp;

  OptimConfig opt;
  opt.kind = config.optimizer;
  opt.weight_decay = config.weight_decay;
  OptimState state = OptimState::for_params(refs.params);

  const std::size_t s = arch.image_size;
  const AugmentPolicy policy = AugmentPolicy::harsh();

  TrainHistory history;
  history.tau_initial = model.temperature.tau;
  EarlyStopper stopper(config.patience, config.min_delta);
  nn::ModelParams best = model;
  TemperatureState best_temp = model.temperature;

  auto batch_views = [&](const std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi,
                         std::uint64_t stream_tag) {
    const std::size_t b = hi - lo;
    Tensor x({2 * b, 1, s, s});
    for (std::size_t m = 0; m < b; ++m) {
      Rng view_rng(stream_seed(stream_tag, "views", idx[lo + m]));
      const auto [va, vb] = augment::make_views(policy, *images[idx[lo + m]], view_rng);
      pack_image(va, s, stats, x, 2 * m);
      pack_image(vb, s, stats, x, 2 * m + 1);
    }
    return x;
  };

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double lr = cosine_lr(epoch - 1, config.learning_rate, config.eta_min,
                                config.max_epochs);

    Rng order_rng(stream_seed(config.seed, "pretrain-order", static_cast<std::uint64_t>(epoch)));
    auto epoch_idx = shuffled_indices(train_idx.size(), order_rng);
    const std::uint64_t view_tag =
        stream_seed(config.seed, "pretrain-views", static_cast<std::uint64_t>(epoch));

    double train_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t lo = 0; lo + 2 <= epoch_idx.size(); lo += config.batch_size) {
      const std::size_t hi = std::min(lo + config.batch_size, epoch_idx.size());
      if (hi - lo < 2) break;
      std::vector<std::size_t> batch_ids;
      for (std::size_t m = lo; m < hi; ++m) batch_ids.push_back(train_idx[epoch_idx[m]]);

      Tensor x({2 * (hi - lo), 1, s, s});
      for (std::size_t m = 0; m < batch_ids.size(); ++m) {
        Rng view_rng(stream_seed(view_tag, "views", batch_ids[m]));
        const auto [va, vb] = augment::make_views(policy, *images[batch_ids[m]], view_rng);
        pack_image(va, s, stats, x, 2 * m);
        pack_image(vb, s, stats, x, 2 * m + 1);
      }

      nn::ProjCache cache;
      Tensor proj = nn::encode_project(model, x, &cache, nn::Mode::train);
      const auto nt = nt_xent_loss(proj, model.temperature);
      nn::ModelParams grads = nn::backward_project(model, cache, nt.grad_z);
      // Optimize log tau; chain rule dL/dlog_tau = tau * dL/dtau.
      grads.log_tau[0] =
          model.temperature.frozen ? 0.0 : nt.grad_tau * model.temperature.tau;

      optimizer_step(opt, state, refs.params, refs.grads_of(grads, filter), lr,
                     refs.skip_decay);

      if (!model.temperature.frozen) {
        const double proposed = std::exp(model.log_tau[0]);
        const TemperatureState next = apply_temperature_update(model.temperature, proposed);
        if (next.frozen && history.freeze_epoch == 0) history.freeze_epoch = epoch;
        model.temperature = next;
        model.log_tau[0] = std::log(next.tau);
      } else {
        model.log_tau[0] = std::log(model.temperature.tau);
      }

      train_loss += nt.loss;
      ++n_batches;
    }
    train_loss /= std::max<std::size_t>(1, n_batches);

    // Validation loss with frozen per-sample view streams; batch statistics
    // without buffer updates, so it is a pure function of the parameters.
    double val_loss = 0.0;
    double val_weight = 0.0;
    for (const auto& [lo, hi] : chunk_ranges(val_idx.size(), config.batch_size)) {
      Tensor x = batch_views(val_idx, lo, hi, stream_seed(config.seed, "pretrain-val-views"));
      Tensor proj = nn::encode_project(model, x, nullptr, nn::Mode::batch_eval);
      const double w = static_cast<double>(hi - lo);
      val_loss += nt_xent_loss(proj, model.temperature).loss * w;
      val_weight += w;
    }
    val_loss /= val_weight;

    history.epochs.push_back({epoch, train_loss, val_loss, lr, model.temperature.tau});
    const bool stop = stopper.update(val_loss);
    if (stopper.improved_last()) {
      best = model;
      best_temp = model.temperature;
    }
    history.stop_epoch = epoch;
    if (stop) {
      history.stop_reason = "early_stopping";
      break;
    }
  }
  if (history.stop_reason.empty()) history.stop_reason = "max_epochs";
  history.best_epoch = stopper.best_epoch();

  PretrainResult result{std::move(best), std::move(history), stats};
  result.model.temperature = best_temp;
  return result;
}

namespace {

Tensor pack_features(const FinetuneData& data, const std::vector<std::size_t>& ids,
                     const features::Normalizer& normalizer) {
  Tensor x({ids.size(), features::kFeatureDim});
  for (std::size_t m = 0; m < ids.size(); ++m) {
    const auto fv = normalizer.transform(data.rows[ids[m]]);
    for (std::size_t k = 0; k < features::kFeatureDim; ++k) x.at2(m, k) = fv.values[k];
  }
  return x;
}

}  // namespace

FinetuneResult finetune(const nn::ModelParams* pretrained, const FinetuneData& data,
                        const std::vector<std::size_t>& train_idx,
                        const std::vector<std::size_t>& val_idx, const nn::ArchConfig& arch,
                        const TrainConfig& config, bool multimodal) {
  validate(config);
  if (data.images.size() != data.rows.size() || data.images.size() != data.labels.size())
    throw DataError("finetune: images/rows/labels must align");
  if (train_idx.size() < 2) throw ConfigError("finetune: training fold needs at least 2 samples");
  if (val_idx.empty()) throw ConfigError("finetune: empty validation fold");

  bool any_pos = false, any_neg = false;
  for (auto i : train_idx) {
    any_pos = any_pos || data.labels[i] == 1;
    any_neg = any_neg || data.labels[i] == 0;
  }
  if (!any_pos || !any_neg)
    throw DataError("finetune: degenerate fold, training labels are single-class");

  std::vector<features::RawFeatureRow> train_rows;
  std::vector<const ImageGrid*> train_images;
  for (auto i : train_idx) {
    train_rows.push_back(data.rows[i]);
    train_images.push_back(data.images[i]);
  }
  const auto normalizer = features::Normalizer::fit(train_rows);
  const ImageStats stats = image_stats(train_images);

  nn::ModelParams model = nn::make_model(arch, stream_seed(config.seed, "model-init"));
  if (pretrained) {
    if (pretrained->arch.widths != arch.widths || pretrained->arch.d_v != arch.d_v ||
        pretrained->arch.image_size != arch.image_size ||
        pretrained->arch.stem_stride != arch.stem_stride)
      throw ConfigError("finetune: pretrained encoder architecture differs");
    model.visual = pretrained->visual;  // only f_oct; heads stay freshly initialized
  }

  const nn::ParamFilter filter =
      multimodal ? nn::ParamFilter::finetune_multimodal() : nn::ParamFilter::finetune_unimodal();
  ParamRefs refs = ParamRefs::collect(model, filter);

  OptimConfig opt;
  opt.kind = config.optimizer;
  opt.weight_decay = config.weight_decay;
  OptimState state = OptimState::for_params(refs.params);

  const std::size_t s = arch.image_size;
  AugmentPolicy policy = config.augment_kind == AugmentPolicy::Kind::harsh
                             ? AugmentPolicy::harsh()
                             : AugmentPolicy::simple();

  TrainHistory history;
  history.tau_initial = model.temperature.tau;
  EarlyStopper stopper(config.patience, config.min_delta);
  nn::ModelParams best = model;

  auto val_bce = [&]() {
    double loss = 0.0, weight = 0.0;
    for (const auto& [lo, hi] : chunk_ranges(val_idx.size(), config.batch_size)) {
      std::vector<std::size_t> ids(val_idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                   val_idx.begin() + static_cast<std::ptrdiff_t>(hi));
      Tensor x({ids.size(), 1, s, s});
      for (std::size_t m = 0; m < ids.size(); ++m)
        pack_image(*data.images[ids[m]], s, stats, x, m);
      Tensor y({ids.size()});
      for (std::size_t m = 0; m < ids.size(); ++m)
        y[m] = static_cast<double>(data.labels[ids[m]]);
      double chunk_loss = 0.0;
      if (multimodal) {
        Tensor f = pack_features(data, ids, normalizer);
        const auto out = nn::forward_fused(model, x, f, nullptr, nn::Mode::batch_eval);
        chunk_loss = bce_loss(out.y_hat, y).loss;
      } else {
        Tensor y_hat = nn::forward_visual_only(model, x, nullptr, nn::Mode::batch_eval);
        chunk_loss = bce_loss(y_hat, y).loss;
      }
      loss += chunk_loss * static_cast<double>(ids.size());
      weight += static_cast<double>(ids.size());
    }
    return loss / weight;
  };

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double lr = cosine_lr(epoch - 1, config.learning_rate, config.eta_min,
                                config.max_epochs);
    Rng order_rng(stream_seed(config.seed, "finetune-order", static_cast<std::uint64_t>(epoch)));
    auto epoch_order = shuffled_indices(train_idx.size(), order_rng);
    const std::uint64_t aug_tag =
        stream_seed(config.seed, "finetune-aug", static_cast<std::uint64_t>(epoch));

    double train_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t lo = 0; lo + 2 <= epoch_order.size(); lo += config.batch_size) {
      const std::size_t hi = std::min(lo + config.batch_size, epoch_order.size());
      if (hi - lo < 2) break;
      std::vector<std::size_t> ids;
      for (std::size_t m = lo; m < hi; ++m) ids.push_back(train_idx[epoch_order[m]]);

      Tensor x({ids.size(), 1, s, s});
      for (std::size_t m = 0; m < ids.size(); ++m) {
        if (config.use_augmentation) {
          Rng aug_rng(stream_seed(aug_tag, "sample", ids[m]));
          pack_image(augment::apply(policy, *data.images[ids[m]], aug_rng), s, stats, x, m);
        } else {
          pack_image(*data.images[ids[m]], s, stats, x, m);
        }
      }
      Tensor y({ids.size()});
      for (std::size_t m = 0; m < ids.size(); ++m)
        y[m] = static_cast<double>(data.labels[ids[m]]);

      nn::ModelParams grads = nn::zeros_like(model);
      double loss = 0.0;
      if (multimodal) {
        Tensor f = pack_features(data, ids, normalizer);
        nn::FusedCache cache;
        const auto out = nn::forward_fused(model, x, f, &cache, nn::Mode::train);
        const auto bce = bce_loss(out.y_hat, y);
        loss = bce.loss;
        grads = nn::backward_fused(model, cache, bce.grad);
      } else {
        nn::UniCache cache;
        Tensor y_hat = nn::forward_visual_only(model, x, &cache, nn::Mode::train);
        const auto bce = bce_loss(y_hat, y);
        loss = bce.loss;
        grads = nn::backward_visual_only(model, cache, bce.grad);
      }
      optimizer_step(opt, state, refs.params, refs.grads_of(grads, filter), lr,
                     refs.skip_decay);
      train_loss += loss;
      ++n_batches;
    }
    train_loss /= std::max<std::size_t>(1, n_batches);

    const double val_loss = val_bce();

    history.epochs.push_back({epoch, train_loss, val_loss, lr, model.temperature.tau});
    const bool stop = stopper.update(val_loss);
    if (stopper.improved_last()) best = model;
    history.stop_epoch = epoch;
    if (stop) {
      history.stop_reason = "early_stopping";
      break;
    }
  }
  if (history.stop_reason.empty()) history.stop_reason = "max_epochs";
  history.best_epoch = stopper.best_epoch();

  FinetuneResult result{std::move(best), normalizer, stats, std::move(history), multimodal};
  return result;
}

std::vector<double> predict(nn::ModelParams& model, const FinetuneData& data,
                            const std::vector<std::size_t>& idx,
                            const features::Normalizer& normalizer, const ImageStats& stats,
                            bool multimodal, std::size_t batch_size) {
  const std::size_t s = model.arch.image_size;
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t lo = 0; lo < idx.size(); lo += batch_size) {
    const std::size_t hi = std::min(lo + batch_size, idx.size());
    std::vector<std::size_t> ids(idx.begin() + lo, idx.begin() + hi);
    Tensor x({ids.size(), 1, s, s});
    for (std::size_t m = 0; m < ids.size(); ++m)
      pack_image(*data.images[ids[m]], s, stats, x, m);
    if (multimodal) {
      Tensor f = pack_features(data, ids, normalizer);
      const auto fused = nn::forward_fused(model, x, f, nullptr, nn::Mode::infer);
      for (std::size_t m = 0; m < ids.size(); ++m) out.push_back(fused.y_hat[m]);
    } else {
      Tensor y_hat = nn::forward_visual_only(model, x, nullptr, nn::Mode::infer);
      for (std::size_t m = 0; m < ids.size(); ++m) out.push_back(y_hat[m]);
    }
  }
  return out;
}

std::vector<std::vector<double>> embed_images(nn::ModelParams& model,
                                              const std::vector<const ImageGrid*>& images,
                                              const ImageStats& stats, std::size_t batch_size) {
  const std::size_t s = model.arch.image_size;
  std::vector<std::vector<double>> out;
  out.reserve(images.size());
  for (std::size_t lo = 0; lo < images.size(); lo += batch_size) {
    const std::size_t hi = std::min(lo + batch_size, images.size());
    Tensor x({hi - lo, 1, s, s});
    for (std::size_t m = 0; m < hi - lo; ++m) pack_image(*images[lo + m], s, stats, x, m);
    Tensor z = nn::encode_visual(model, x, nullptr, nn::Mode::infer);
    for (std::size_t m = 0; m < hi - lo; ++m) {
      std::vector<double> row(z.dim(1));
      for (std::size_t k = 0; k < z.dim(1); ++k) row[k] = z.at2(m, k);
      out.push_back(std::move(row));
    }
  }
  return out;
}

}  // namespace retfuse::train
