#pragma once

#include <Eigen/Core>

#include "partshot/encoder.hpp"
#include "partshot/linear_classifier.hpp"

namespace partshot {

/// Per-location class scores and their class-competitive weights. Rows index
/// spatial positions (i * width + j), columns index episode classes.
struct AttentionMap {
  int height = 0;
  int width = 0;
  Eigen::MatrixXd scores;
  Eigen::MatrixXd alpha;

  int classes() const { return static_cast<int>(scores.cols()); }
};

/// S^k(i,j) = W^k . M(i,j) + b^k for every class and location.
Eigen::MatrixXd class_attention_map(const FeatureMap& map, const LinearClassifier& clf);

/// Softmax across classes at each location: rows sum to one.
Eigen::MatrixXd competitive_attention(const Eigen::MatrixXd& scores);

/// Raw CAM turned into pooling weights by shifting each class map so its
/// minimum is zero. A constant map (zero mass) becomes uniform.
Eigen::MatrixXd plain_attention(const Eigen::MatrixXd& scores);

AttentionMap compute_attention(const FeatureMap& map, const LinearClassifier& clf);

/// z = sum_p w(p) M(p) / sum_p w(p). Weights must be non-negative with
/// positive total mass.
Eigen::VectorXd pooled_part_feature(const FeatureMap& map, const Eigen::Ref<const Eigen::VectorXd>& weights);

}  // namespace partshot
