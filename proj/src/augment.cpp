#include "retfuse/augment.hpp"

#include <algorithm>
#include <cmath>

#include "retfuse/errors.hpp"

namespace retfuse::augment {

AugmentPolicy AugmentPolicy::harsh() {
  AugmentPolicy p;
  p.kind = Kind::harsh;
  return p;
}

AugmentPolicy AugmentPolicy::simple() {
  AugmentPolicy p;
  p.kind = Kind::simple;
  return p;
}

AugmentPolicy AugmentPolicy::identity(Kind kind) {
  AugmentPolicy p;
  p.kind = kind;
  p.p_crop = p.p_jitter = p.p_blur = p.p_hflip = p.p_vflip = 0.0;
  p.p_simple = 0.0;
  return p;
}

const char* to_string(AugmentPolicy::Kind k) {
  return k == AugmentPolicy::Kind::harsh ? "harsh" : "simple";
}

AugmentPolicy::Kind augment_kind_from_string(const std::string& s) {
  if (s == "harsh") return AugmentPolicy::Kind::harsh;
  if (s == "simple") return AugmentPolicy::Kind::simple;
  throw ConfigError("unknown augmentation kind: " + s);
}

namespace {

double sample_clamped(const ImageGrid& img, double r, double c) {
  r = std::clamp(r, 0.0, static_cast<double>(img.height - 1));
  c = std::clamp(c, 0.0, static_cast<double>(img.width - 1));
  const auto r0 = static_cast<std::size_t>(r);
  const auto c0 = static_cast<std::size_t>(c);
  const std::size_t r1 = std::min(r0 + 1, img.height - 1);
  const std::size_t c1 = std::min(c0 + 1, img.width - 1);
  const double fr = r - static_cast<double>(r0);
  const double fc = c - static_cast<double>(c0);
  const double top = img.at(r0, c0) * (1.0 - fc) + img.at(r0, c1) * fc;
  const double bot = img.at(r1, c0) * (1.0 - fc) + img.at(r1, c1) * fc;
  return top * (1.0 - fr) + bot * fr;
}

ImageGrid hflip(const ImageGrid& img) {
  ImageGrid out(img.height, img.width, img.modality);
  for (std::size_t r = 0; r < img.height; ++r)
    for (std::size_t c = 0; c < img.width; ++c) out.at(r, c) = img.at(r, img.width - 1 - c);
  return out;
}

ImageGrid vflip(const ImageGrid& img) {
  ImageGrid out(img.height, img.width, img.modality);
  for (std::size_t r = 0; r < img.height; ++r)
    for (std::size_t c = 0; c < img.width; ++c) out.at(r, c) = img.at(img.height - 1 - r, c);
  return out;
}

// Inverse-maps every output pixel through a 2x2 matrix + offset about the
// image center, sampling with bilinear interpolation and edge fill.
ImageGrid warp_affine(const ImageGrid& img, double m00, double m01, double m10, double m11,
                      double dr, double dc) {
  ImageGrid out(img.height, img.width, img.modality);
  const double cy = 0.5 * static_cast<double>(img.height - 1);
  const double cx = 0.5 * static_cast<double>(img.width - 1);
  for (std::size_t r = 0; r < img.height; ++r) {
    for (std::size_t c = 0; c < img.width; ++c) {
      const double yr = static_cast<double>(r) - cy - dr;
      const double xc = static_cast<double>(c) - cx - dc;
      const double src_r = m00 * yr + m01 * xc + cy;
      const double src_c = m10 * yr + m11 * xc + cx;
      out.at(r, c) = sample_clamped(img, src_r, src_c);
    }
  }
  return out;
}

ImageGrid crop_resize(const ImageGrid& img, double area_frac, double aspect, std::size_t top,
                      std::size_t left, std::size_t ch, std::size_t cw) {
  (void)area_frac;
  (void)aspect;
  ImageGrid out(img.height, img.width, img.modality);
  const double sr = static_cast<double>(ch) / static_cast<double>(img.height);
  const double sc = static_cast<double>(cw) / static_cast<double>(img.width);
  for (std::size_t r = 0; r < img.height; ++r) {
    for (std::size_t c = 0; c < img.width; ++c) {
      const double src_r = (static_cast<double>(r) + 0.5) * sr - 0.5 + static_cast<double>(top);
      const double src_c = (static_cast<double>(c) + 0.5) * sc - 0.5 + static_cast<double>(left);
      out.at(r, c) = sample_clamped(img, src_r, src_c);
    }
  }
  return out;
}

void clip01(ImageGrid& img) {
  for (auto& p : img.pixels) p = std::clamp(p, 0.0, 1.0);
}

ImageGrid apply_harsh(const AugmentPolicy& p, const ImageGrid& image, Rng& rng) {
  ImageGrid img = image;

  // Coins and parameters are always drawn so the stream stays aligned
  // whether or not a transform fires.
  {
    const bool on = rng.bernoulli(p.p_crop);
    const double area = rng.uniform(p.crop_scale_lo, p.crop_scale_hi);
    const double aspect = rng.uniform(p.aspect_lo, p.aspect_hi);
    const double hw = static_cast<double>(img.height) * static_cast<double>(img.width);
    auto ch = static_cast<std::size_t>(std::lround(std::sqrt(area * hw / aspect)));
    auto cw = static_cast<std::size_t>(std::lround(std::sqrt(area * hw * aspect)));
    ch = std::clamp<std::size_t>(ch, 4, img.height);
    cw = std::clamp<std::size_t>(cw, 4, img.width);
    const auto top = static_cast<std::size_t>(rng.below(img.height - ch + 1));
    const auto left = static_cast<std::size_t>(rng.below(img.width - cw + 1));
    if (on) img = crop_resize(img, area, aspect, top, left, ch, cw);
  }
  {
    const bool on = rng.bernoulli(p.p_jitter);
    const double delta = rng.uniform(-p.brightness, p.brightness);
    const double factor = rng.uniform(p.contrast_lo, p.contrast_hi);
    if (on) {
      double mean = 0.0;
      for (double v : img.pixels) mean += v;
      mean /= static_cast<double>(img.pixels.size());
      for (auto& v : img.pixels) v = mean + factor * (v - mean) + delta;
    }
  }
  {
    const bool on = rng.bernoulli(p.p_blur);
    const double sigma = rng.uniform(p.blur_sigma_lo, p.blur_sigma_hi);
    if (on) {
      const int radius = std::min<int>(static_cast<int>(std::ceil(3.0 * sigma)),
                                       static_cast<int>(img.width) - 1);
      std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
      double sum = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        kernel[static_cast<std::size_t>(i + radius)] =
            std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[static_cast<std::size_t>(i + radius)];
      }
      for (auto& k : kernel) k /= sum;

      const auto h = static_cast<long long>(img.height);
      const auto w = static_cast<long long>(img.width);
      ImageGrid tmp(img.height, img.width, img.modality);
      for (long long r = 0; r < h; ++r)
        for (long long c = 0; c < w; ++c) {
          double acc = 0.0;
          for (int i = -radius; i <= radius; ++i) {
            const long long cc = std::clamp(c + i, 0LL, w - 1);
            acc += kernel[static_cast<std::size_t>(i + radius)] *
                   img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(cc));
          }
          tmp.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
        }
      for (long long r = 0; r < h; ++r)
        for (long long c = 0; c < w; ++c) {
          double acc = 0.0;
          for (int i = -radius; i <= radius; ++i) {
            const long long rr = std::clamp(r + i, 0LL, h - 1);
            acc += kernel[static_cast<std::size_t>(i + radius)] *
                   tmp.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(c));
          }
          img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
        }
    }
  }
  if (rng.bernoulli(p.p_hflip)) img = hflip(img);
  if (rng.bernoulli(p.p_vflip)) img = vflip(img);
  clip01(img);
  return img;
}

ImageGrid apply_simple(const AugmentPolicy& p, const ImageGrid& image, Rng& rng) {
  ImageGrid img = image;
  constexpr double kDegToRad = 0.017453292519943295;

  if (rng.bernoulli(p.p_simple)) img = hflip(img);
  {
    const bool on = rng.bernoulli(p.p_simple);
    const double theta = rng.uniform(-p.rotate_deg, p.rotate_deg) * kDegToRad;
    // Inverse rotation matrix.
    if (on) img = warp_affine(img, std::cos(theta), std::sin(theta), -std::sin(theta),
                              std::cos(theta), 0.0, 0.0);
  }
  {
    const bool on = rng.bernoulli(p.p_simple);
    const double s = std::tan(rng.uniform(-p.shear_deg, p.shear_deg) * kDegToRad);
    if (on) img = warp_affine(img, 1.0, 0.0, -s, 1.0, 0.0, 0.0);  // x-shear inverse
  }
  {
    const bool on = rng.bernoulli(p.p_simple);
    const double dr = rng.uniform(-p.translate_frac, p.translate_frac) *
                      static_cast<double>(img.height);
    const double dc = rng.uniform(-p.translate_frac, p.translate_frac) *
                      static_cast<double>(img.width);
    if (on) img = warp_affine(img, 1.0, 0.0, 0.0, 1.0, dr, dc);
  }
  clip01(img);
  return img;
}

}  // namespace

ImageGrid apply(const AugmentPolicy& policy, const ImageGrid& image, Rng& rng) {
  return policy.kind == AugmentPolicy::Kind::harsh ? apply_harsh(policy, image, rng)
                                                   : apply_simple(policy, image, rng);
}

std::pair<ImageGrid, ImageGrid> make_views(const AugmentPolicy& policy, const ImageGrid& image,
                                           Rng& rng) {
  Rng a(rng.next_u64());
  Rng b(rng.next_u64());
  return {apply(policy, image, a), apply(policy, image, b)};
}

std::pair<ImageGrid, ImageGrid> make_views(const ImageGrid& image, Rng& rng) {
  return make_views(AugmentPolicy::harsh(), image, rng);
}

ImageGrid resize_bilinear(const ImageGrid& image, std::size_t h, std::size_t w) {
  if (image.height == h && image.width == w) return image;
  ImageGrid out(h, w, image.modality);
  const double sr = static_cast<double>(image.height) / static_cast<double>(h);
  const double sc = static_cast<double>(image.width) / static_cast<double>(w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      out.at(r, c) = sample_clamped(image, (static_cast<double>(r) + 0.5) * sr - 0.5,
                                    (static_cast<double>(c) + 0.5) * sc - 0.5);
  return out;
}

}  // namespace retfuse::augment
