#pragma once

#include <cstdint>
#include <filesystem>

#include "partshot/image.hpp"

namespace partshot {

/// Procedural image classes for desk-scale experiments. Each class is a small
/// patterned object (shape, two-color stripe pattern, stripe orientation)
/// placed at a random position on a textured background with solid-colored
/// distractor shapes drawn from the same shape vocabulary. The class signal
/// lives in a small region, so part-level features matter.
struct SyntheticSpec {
  int classes = 40;
  int images_per_class = 60;
  int side = 64;
  int distractors = 3;
  double object_scale_lo = 0.30;  // object side as a fraction of the image side
  double object_scale_hi = 0.45;
  std::uint64_t seed = 0;
};

Image render_synthetic(const SyntheticSpec& spec, int class_id, int instance);

/// Writes <root>/class_XXX/img_YYYY.png for every class and instance. Skips
/// files that already exist with the expected name.
void write_synthetic_dataset(const std::filesystem::path& root, const SyntheticSpec& spec);

}  // namespace partshot
