#pragma once

#include <utility>

#include "retfuse/records.hpp"
#include "retfuse/rng.hpp"

namespace retfuse::augment {

// Two policies: "harsh" for contrastive pretraining views (resized crop,
// intensity jitter standing in for color jitter on grayscale, Gaussian blur,
// both flips) and "simple" for fine-tuning (flip, rotation, shear,
// translation, each with probability 0.5). Magnitudes are not canonical;
// every range is configurable.
struct AugmentPolicy {
  enum class Kind { harsh, simple };
  Kind kind = Kind::simple;

  // harsh
  double crop_scale_lo = 0.6, crop_scale_hi = 1.0;
  double aspect_lo = 0.75, aspect_hi = 4.0 / 3.0;
  double brightness = 0.2;
  double contrast_lo = 0.8, contrast_hi = 1.25;
  double blur_sigma_lo = 0.1, blur_sigma_hi = 1.5;
  double p_crop = 1.0, p_jitter = 0.8, p_blur = 0.5, p_hflip = 0.5, p_vflip = 0.5;

  // simple
  double rotate_deg = 15.0;
  double shear_deg = 10.0;
  double translate_frac = 0.1;
  double p_simple = 0.5;

  static AugmentPolicy harsh();
  static AugmentPolicy simple();
  static AugmentPolicy identity(Kind kind);  // all probabilities zero
};

const char* to_string(AugmentPolicy::Kind k);
AugmentPolicy::Kind augment_kind_from_string(const std::string& s);

// Deterministic in (policy, image, stream). Output shape equals input shape;
// pixels are clipped to [0, 1]. Geometric transforms use bilinear
// interpolation with edge-value fill.
ImageGrid apply(const AugmentPolicy& policy, const ImageGrid& image, Rng& rng);

// Two independent harsh draws from split sub-streams of `rng`.
std::pair<ImageGrid, ImageGrid> make_views(const ImageGrid& image, Rng& rng);
std::pair<ImageGrid, ImageGrid> make_views(const AugmentPolicy& policy, const ImageGrid& image,
                                           Rng& rng);

ImageGrid resize_bilinear(const ImageGrid& image, std::size_t h, std::size_t w);

}  // namespace retfuse::augment
