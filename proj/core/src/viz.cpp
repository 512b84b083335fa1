#include "partshot/viz.hpp"

#include <algorithm>
#include <numeric>

#include "partshot/errors.hpp"

namespace partshot {

std::vector<std::size_t> order_by_distance(const Eigen::VectorXd& distances) {
  std::vector<std::size_t> order(static_cast<std::size_t>(distances.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return distances(static_cast<Eigen::Index>(a)) > distances(static_cast<Eigen::Index>(b));
  });
  return order;
}

Image hstack(const std::vector<Image>& tiles, int gap) {
  if (tiles.empty()) return {};
  int height = 0, width = 0;
  for (const auto& t : tiles) {
    height = std::max(height, t.height);
    width += t.width;
  }
  width += gap * static_cast<int>(tiles.size() - 1);
  Image out(height, width, 1.0f);
  int x0 = 0;
  for (const auto& t : tiles) {
    for (int c = 0; c < Image::kChannels; ++c)
      for (int y = 0; y < t.height; ++y)
        for (int x = 0; x < t.width; ++x) out.at(c, y, x0 + x) = t.at(c, y, x);
    x0 += t.width + gap;
  }
  return out;
}

namespace {

void outline(Image& image, int thickness, std::array<float, 3> color) {
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const bool edge = y < thickness || x < thickness || y >= image.height - thickness || x >= image.width - thickness;
      if (!edge) continue;
      for (int c = 0; c < Image::kChannels; ++c) image.at(c, y, x) = color[c];
    }
  }
}

}  // namespace

Image crop_panel(const ViewSet& views, const Eigen::VectorXd& distances, std::size_t selected, int tile, int gap) {
  if (static_cast<std::size_t>(distances.size()) != views.parts.size()) {
    throw ShapeError("crop panel needs one distance per part");
  }
  if (selected >= views.parts.size()) throw ShapeError("selected part index out of range");
  std::vector<Image> tiles;
  tiles.push_back(resize(views.global_view, tile, tile));
  for (std::size_t idx : order_by_distance(distances)) {
    Image t = resize(views.parts[idx], tile, tile);
    if (idx == selected) outline(t, std::max(1, tile / 16), {1.0f, 0.0f, 0.0f});
    tiles.push_back(std::move(t));
  }
  return hstack(tiles, gap);
}

Eigen::MatrixXd attention_overlay_values(const AttentionMap& attention, int k) {
  if (k < 0 || k >= attention.alpha.cols()) throw ShapeError("class index out of range for attention map");
  Eigen::MatrixXd grid(attention.height, attention.width);
  for (int i = 0; i < attention.height; ++i)
    for (int j = 0; j < attention.width; ++j) grid(i, j) = attention.alpha(i * attention.width + j, k);
  const double lo = grid.minCoeff();
  const double hi = grid.maxCoeff();
  if (hi - lo <= 0.0) return Eigen::MatrixXd::Zero(grid.rows(), grid.cols());
  return (grid.array() - lo) / (hi - lo);
}

std::array<float, 3> heat_color(double value) {
  const double v = std::clamp(value, 0.0, 1.0);
  return {static_cast<float>(std::clamp(3.0 * v, 0.0, 1.0)), static_cast<float>(std::clamp(3.0 * v - 1.0, 0.0, 1.0)),
          static_cast<float>(std::clamp(3.0 * v - 2.0, 0.0, 1.0))};
}

double heat_value(float r, float g, float b) { return (static_cast<double>(r) + g + b) / 3.0; }

Image heatmap(const Eigen::MatrixXd& values, int cell) {
  Image out(static_cast<int>(values.rows()) * cell, static_cast<int>(values.cols()) * cell);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const auto rgb = heat_color(values(y / cell, x / cell));
      for (int c = 0; c < Image::kChannels; ++c) out.at(c, y, x) = rgb[c];
    }
  }
  return out;
}

Image attention_overlay(const Image& image, const Eigen::MatrixXd& values, double opacity) {
  Image out = image;
  const auto a = static_cast<float>(std::clamp(opacity, 0.0, 1.0));
  for (int y = 0; y < image.height; ++y) {
    const auto i = static_cast<Eigen::Index>(static_cast<long long>(y) * values.rows() / image.height);
    for (int x = 0; x < image.width; ++x) {
      const auto j = static_cast<Eigen::Index>(static_cast<long long>(x) * values.cols() / image.width);
      const auto rgb = heat_color(values(i, j));
      for (int c = 0; c < Image::kChannels; ++c) out.at(c, y, x) = (1.0f - a) * image.at(c, y, x) + a * rgb[c];
    }
  }
  return out;
}

}  // namespace partshot
