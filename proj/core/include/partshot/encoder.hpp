#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "partshot/image.hpp"

namespace partshot {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Storage that Eigen maps over. A fixed alignment keeps vectorized reductions
/// in the same order regardless of heap layout, so training is reproducible.
using FloatBuffer = std::vector<float, Eigen::aligned_allocator<float>>;

/// Architecture of the backbone f and the projection head.
///
/// The backbone is `blocks` repetitions of conv3x3 -> GroupNorm -> ReLU, the
/// first `pooled_blocks` of which end in 2x2 max pooling. GroupNorm keeps the
/// backbone per-sample, so feature maps do not depend on batch composition.
/// The head is fc -> BatchNorm -> ReLU -> fc -> L2 normalisation.
struct EncoderSpec {
  std::string arch = "conv4";
  int input_side = 32;
  int channels = 64;
  int blocks = 4;
  int pooled_blocks = 3;
  int groups = 8;
  int head_hidden = 0;  // 0 selects `channels`
  int embed_dim = 128;

  int map_side() const;
  int hidden_dim() const { return head_hidden > 0 ? head_hidden : channels; }
  void validate() const;

  nlohmann::json to_json() const;
  static EncoderSpec from_json(const nlohmann::json& j);
  bool operator==(const EncoderSpec&) const = default;
};

struct Tensor {
  std::string name;
  std::vector<int> shape;
  FloatBuffer data;
  bool trainable = true;  // false for BatchNorm running statistics

  bool operator==(const Tensor&) const = default;
};

/// Learnable parameters of backbone and head. The momentum twin is simply a
/// second EncoderParams with an identical layout.
struct EncoderParams {
  EncoderSpec spec;
  std::vector<Tensor> tensors;

  /// He-normal convolution and linear weights, unit GroupNorm scale.
  static EncoderParams initialize(const EncoderSpec& spec, std::uint64_t seed);

  std::size_t parameter_count() const;
  bool same_layout(const EncoderParams& other) const;
  bool operator==(const EncoderParams&) const = default;
};

/// One gradient buffer per parameter tensor.
struct Gradients {
  std::vector<FloatBuffer> buffers;

  static Gradients zeros_like(const EncoderParams& params);
  void set_zero();
};

/// Pre-pooling backbone output; layout [i][j][d] with d fastest.
struct FeatureMap {
  int height = 0;
  int width = 0;
  int depth = 0;
  FloatBuffer data;

  std::size_t positions() const { return static_cast<std::size_t>(height) * width; }
  std::span<const float> at(int i, int j) const {
    return {data.data() + (static_cast<std::size_t>(i) * width + j) * depth, static_cast<std::size_t>(depth)};
  }
  std::span<const float> at(std::size_t position) const {
    return {data.data() + position * depth, static_cast<std::size_t>(depth)};
  }
};

Eigen::VectorXf global_average_pool(const FeatureMap& map);

/// Which statistics the head BatchNorm normalises with.
enum class NormStats { running, batch };

/// Unit-norm projection embeddings, one row per view. With NormStats::batch
/// the whole span is one normalisation batch, as during training.
RowMatrix encode(const EncoderParams& params, std::span<const Image> views,
                 NormStats stats = NormStats::running);

FeatureMap extract_feature_map(const EncoderParams& params, const Image& image);
std::vector<FeatureMap> extract_feature_maps(const EncoderParams& params, std::span<const Image> images);

/// Forward pass that records activations for a single backward call.
class EncoderTape {
 public:
  EncoderTape();
  ~EncoderTape();
  EncoderTape(EncoderTape&&) noexcept;
  EncoderTape& operator=(EncoderTape&&) noexcept;

  RowMatrix forward(const EncoderParams& params, std::span<const Image> views);

  /// Accumulates dLoss/dparams into `grads` given dLoss/dembeddings (one row
  /// per view, same order as forward).
  void backward(const RowMatrix& grad_embeddings, Gradients& grads);

  /// Moves the running statistics of `params` toward the batch statistics of
  /// the last forward call: running <- (1 - rate) running + rate batch.
  void update_running_statistics(EncoderParams& params, float rate) const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

}  // namespace partshot
