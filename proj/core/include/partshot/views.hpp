#pragma once

#include <cstdint>
#include <vector>

#include "partshot/image.hpp"
#include "partshot/rng.hpp"

namespace partshot {

/// Area fraction range of a random crop, relative to the source image.
struct ScaleRange {
  double lo = 0.0;
  double hi = 1.0;
};

struct AugmentConfig {
  bool flip = true;
  bool color_jitter = true;
  double jitter_probability = 0.8;
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;
  bool blur = true;
  double blur_probability = 0.5;
  double blur_sigma_lo = 0.1;
  double blur_sigma_hi = 2.0;

  static AugmentConfig none() {
    AugmentConfig a;
    a.flip = a.color_jitter = a.blur = false;
    return a;
  }
};

struct ViewConfig {
  int n_parts = 6;
  ScaleRange part_scale{0.05, 0.14};
  ScaleRange global_scale{0.14, 1.0};
  int output_side = 32;
  AugmentConfig aug;
};

/// Crop rectangle in normalized source coordinates, [0,1] on both axes.
struct CropBox {
  double x = 0.0;
  double y = 0.0;
  double w = 1.0;
  double h = 1.0;

  double area() const { return w * h; }
  bool operator==(const CropBox&) const = default;
};

struct ViewSet {
  Image global_view;
  std::vector<Image> parts;
  CropBox global_box;
  std::vector<CropBox> part_boxes;
  std::uint64_t rng_seed = 0;
};

/// Area uniform in `scale`, aspect ratio log-uniform in [3/4, 4/3]. Boxes that
/// leave the image or fall under one source pixel are resampled; after
/// `kMaxCropAttempts` the center crop at the smallest legal scale is returned.
CropBox sample_crop(const ScaleRange& scale, int src_height, int src_width, Rng& rng);
inline constexpr int kMaxCropAttempts = 10;

/// Bilinear resampling of `box` onto a side x side grid.
Image crop_resize(const Image& image, const CropBox& box, int side);

/// The whole image at encoder resolution, as used for feature extraction.
inline Image full_view(const Image& image, int side) { return crop_resize(image, CropBox{}, side); }

/// Flip, color jitter and Gaussian blur in place, each drawn from `rng`.
void augment(Image& image, const AugmentConfig& config, Rng& rng);

/// Separable Gaussian blur with reflected borders.
void gaussian_blur(Image& image, double sigma);

/// Global view plus n independent part crops, all taken from the original
/// image and independently augmented. Pure function of its arguments.
ViewSet generate_views(const Image& image, const ViewConfig& config, std::uint64_t seed);

}  // namespace partshot
