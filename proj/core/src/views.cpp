#include "partshot/views.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "partshot/errors.hpp"

namespace partshot {
namespace {

bool legal(const CropBox& b, int src_h, int src_w) {
  return b.w <= 1.0 && b.h <= 1.0 && b.w * src_w >= 1.0 && b.h * src_h >= 1.0;
}

float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

void adjust_brightness(Image& img, double factor) {
  for (float& v : img.data) v = clamp01(static_cast<float>(v * factor));
}

float luma(const Image& img, std::size_t p) {
  const std::size_t n = img.plane_size();
  return 0.299f * img.data[p] + 0.587f * img.data[n + p] + 0.114f * img.data[2 * n + p];
}

void adjust_contrast(Image& img, double factor) {
  const std::size_t n = img.plane_size();
  double mean = 0.0;
  for (std::size_t p = 0; p < n; ++p) mean += luma(img, p);
  mean /= static_cast<double>(n);
  for (float& v : img.data) v = clamp01(static_cast<float>(mean + factor * (v - mean)));
}

void adjust_saturation(Image& img, double factor) {
  const std::size_t n = img.plane_size();
  for (std::size_t p = 0; p < n; ++p) {
    const float g = luma(img, p);
    for (int c = 0; c < Image::kChannels; ++c) {
      float& v = img.data[c * n + p];
      v = clamp01(static_cast<float>(g + factor * (v - g)));
    }
  }
}

// Hue rotation of the chroma plane in YIQ space; `shift` is a fraction of a turn.
void adjust_hue(Image& img, double shift) {
  const double theta = 2.0 * std::numbers::pi * shift;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const std::size_t n = img.plane_size();
  for (std::size_t p = 0; p < n; ++p) {
    const double r = img.data[p], g = img.data[n + p], b = img.data[2 * n + p];
    const double y = 0.299 * r + 0.587 * g + 0.114 * b;
    const double i = 0.596 * r - 0.274 * g - 0.322 * b;
    const double q = 0.211 * r - 0.523 * g + 0.312 * b;
    const double i2 = cs * i - sn * q;
    const double q2 = sn * i + cs * q;
    img.data[p] = clamp01(static_cast<float>(y + 0.956 * i2 + 0.621 * q2));
    img.data[n + p] = clamp01(static_cast<float>(y - 0.272 * i2 - 0.647 * q2));
    img.data[2 * n + p] = clamp01(static_cast<float>(y - 1.106 * i2 + 1.703 * q2));
  }
}

int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

}  // namespace

CropBox sample_crop(const ScaleRange& scale, int src_height, int src_width, Rng& rng) {
  if (!(scale.lo > 0.0) || scale.hi > 1.0 || scale.lo > scale.hi) {
    throw Error("crop scale range must satisfy 0 < lo <= hi <= 1");
  }
  const double log_lo = std::log(3.0 / 4.0), log_hi = std::log(4.0 / 3.0);
  for (int attempt = 0; attempt < kMaxCropAttempts; ++attempt) {
    const double area = uniform(rng, scale.lo, scale.hi);
    const double ratio = std::exp(uniform(rng, log_lo, log_hi));
    CropBox box;
    box.w = std::sqrt(area * ratio);
    box.h = std::sqrt(area / ratio);
    if (!legal(box, src_height, src_width)) continue;
    box.x = uniform(rng, 0.0, 1.0 - box.w);
    box.y = uniform(rng, 0.0, 1.0 - box.h);
    return box;
  }
  const double min_area = std::max(scale.lo, 1.0 / std::min(src_height, src_width) /
                                                 std::min(src_height, src_width));
  const double side = std::sqrt(std::min(min_area, 1.0));
  return CropBox{(1.0 - side) / 2.0, (1.0 - side) / 2.0, side, side};
}

Image crop_resize(const Image& image, const CropBox& box, int side) {
  Image out(side, side);
  const double x0 = box.x * image.width, y0 = box.y * image.height;
  const double sx = box.w * image.width / side, sy = box.h * image.height / side;
  for (int v = 0; v < side; ++v) {
    const double fy = std::clamp(y0 + (v + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int iy = std::min(static_cast<int>(fy), image.height - 1);
    const int iy1 = std::min(iy + 1, image.height - 1);
    const float ty = static_cast<float>(fy - iy);
    for (int u = 0; u < side; ++u) {
      const double fx = std::clamp(x0 + (u + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int ix = std::min(static_cast<int>(fx), image.width - 1);
      const int ix1 = std::min(ix + 1, image.width - 1);
      const float tx = static_cast<float>(fx - ix);
      for (int c = 0; c < Image::kChannels; ++c) {
        const float top = image.at(c, iy, ix) * (1 - tx) + image.at(c, iy, ix1) * tx;
        const float bot = image.at(c, iy1, ix) * (1 - tx) + image.at(c, iy1, ix1) * tx;
        out.at(c, v, u) = top * (1 - ty) + bot * ty;
      }
    }
  }
  return out;
}

void gaussian_blur(Image& image, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(2.0 * sigma)));
  std::vector<float> kernel(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * k * k / (sigma * sigma));
    kernel[k + radius] = static_cast<float>(w);
    total += w;
  }
  for (float& k : kernel) k = static_cast<float>(k / total);

  Image tmp(image.height, image.width);
  for (int c = 0; c < Image::kChannels; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        float acc = 0.0f;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * image.at(c, y, reflect(x + k, image.width));
        tmp.at(c, y, x) = acc;
      }
    }
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        float acc = 0.0f;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp.at(c, reflect(y + k, image.height), x);
        image.at(c, y, x) = acc;
      }
    }
  }
}

void augment(Image& image, const AugmentConfig& config, Rng& rng) {
  if (config.flip && uniform(rng) < 0.5) {
    for (int c = 0; c < Image::kChannels; ++c) {
      for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width / 2; ++x) std::swap(image.at(c, y, x), image.at(c, y, image.width - 1 - x));
      }
    }
  }
  if (config.color_jitter && uniform(rng) < config.jitter_probability) {
    const double b = uniform(rng, 1.0 - config.brightness, 1.0 + config.brightness);
    const double c = uniform(rng, 1.0 - config.contrast, 1.0 + config.contrast);
    const double s = uniform(rng, 1.0 - config.saturation, 1.0 + config.saturation);
    const double h = uniform(rng, -config.hue, config.hue);
    adjust_brightness(image, b);
    adjust_contrast(image, c);
    adjust_saturation(image, s);
    adjust_hue(image, h);
  }
  if (config.blur && uniform(rng) < config.blur_probability) {
    gaussian_blur(image, uniform(rng, config.blur_sigma_lo, config.blur_sigma_hi));
  }
}

ViewSet generate_views(const Image& image, const ViewConfig& config, std::uint64_t seed) {
  if (config.n_parts < 1) throw Error("n_parts must be >= 1");
  Rng rng = make_rng(seed);
  ViewSet views;
  views.rng_seed = seed;
  views.global_box = sample_crop(config.global_scale, image.height, image.width, rng);
  views.global_view = crop_resize(image, views.global_box, config.output_side);
  augment(views.global_view, config.aug, rng);
  views.parts.reserve(config.n_parts);
  for (int i = 0; i < config.n_parts; ++i) {
    views.part_boxes.push_back(sample_crop(config.part_scale, image.height, image.width, rng));
    views.parts.push_back(crop_resize(image, views.part_boxes.back(), config.output_side));
    augment(views.parts.back(), config.aug, rng);
  }
  return views;
}

}  // namespace partshot
