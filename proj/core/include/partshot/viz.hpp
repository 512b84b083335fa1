#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "partshot/attention.hpp"
#include "partshot/image.hpp"
#include "partshot/views.hpp"

namespace partshot {

/// Part indices by descending sample-set distance; ties keep index order.
std::vector<std::size_t> order_by_distance(const Eigen::VectorXd& distances);

/// One row of tiles: the global view, then the parts ordered by descending
/// distance. The selected part gets a red outline. Tiles are `tile` pixels
/// square with a `gap`-pixel white separator.
Image crop_panel(const ViewSet& views, const Eigen::VectorXd& distances, std::size_t selected, int tile = 64,
                 int gap = 4);

/// alpha for class k as an H x W grid, min-max normalized to [0, 1]. A
/// constant map normalizes to all zeros.
Eigen::MatrixXd attention_overlay_values(const AttentionMap& attention, int k);

/// "hot" colormap: black -> red -> yellow -> white, each channel a linear
/// ramp over one third of [0, 1]. The channel mean equals the input value, so
/// rendered heatmaps decode back exactly up to 8-bit quantization.
std::array<float, 3> heat_color(double value);
double heat_value(float r, float g, float b);

/// Nearest-neighbour upsampled heatmap of `values`, `cell` pixels per cell.
Image heatmap(const Eigen::MatrixXd& values, int cell);

/// The image with the heatmap blended on top at the given opacity.
Image attention_overlay(const Image& image, const Eigen::MatrixXd& values, double opacity = 0.5);

/// Tiles images left to right at a common height with white gaps.
Image hstack(const std::vector<Image>& tiles, int gap = 4);

}  // namespace partshot
