#pragma once

#include <filesystem>
#include <vector>

namespace partshot {

/// RGB image, planar (channel-major) float storage with values in [0, 1].
struct Image {
  static constexpr int kChannels = 3;

  int height = 0;
  int width = 0;
  std::vector<float> data;  // [c][y][x]

  Image() = default;
  Image(int h, int w, float fill = 0.0f)
      : height(h), width(w), data(static_cast<std::size_t>(kChannels) * h * w, fill) {}

  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  bool empty() const { return data.empty(); }

  bool operator==(const Image&) const = default;
};

/// Decodes PNG/JPEG and resizes to side x side (area interpolation).
/// Returns an empty image when the file cannot be decoded.
Image read_image(const std::filesystem::path& path, int side);

/// Writes an 8-bit PNG. Values are clamped to [0, 1].
void write_png(const std::filesystem::path& path, const Image& image);

/// Resize with area interpolation (used when shrinking to the encoder side).
Image resize(const Image& image, int height, int width);

}  // namespace partshot
