#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "partshot/encoder.hpp"

namespace partshot {

/// p(y | z) = softmax(W z + b), one row of W per episode class.
struct LinearClassifier {
  Eigen::MatrixXd weight;  // way x D
  Eigen::VectorXd bias;    // way

  int way() const { return static_cast<int>(weight.rows()); }
  int dim() const { return static_cast<int>(weight.cols()); }

  Eigen::VectorXd logits(const Eigen::Ref<const Eigen::VectorXd>& z) const { return weight * z + bias; }
  Eigen::VectorXd probabilities(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  /// Argmax of the logits, lowest class index on ties.
  int predict(const Eigen::Ref<const Eigen::VectorXd>& z) const;

  static LinearClassifier zeros(int way, int dim);
  /// Gaussian weights with standard deviation `stddev`, zero bias.
  static LinearClassifier random(int way, int dim, double stddev, std::uint64_t seed);
};

/// Row-wise samples with their episode-local class ids.
struct LabeledFeatures {
  Eigen::MatrixXd features;  // N x D
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);

/// Index of the largest entry, lowest index on ties.
int argmax(const Eigen::Ref<const Eigen::VectorXd>& values);

/// Adam with L2 weight decay folded into the gradient.
class AdamOptimizer {
 public:
  AdamOptimizer(int way, int dim, double learning_rate, double weight_decay);
  void step(LinearClassifier& clf, const Eigen::MatrixXd& grad_weight, const Eigen::VectorXd& grad_bias);

 private:
  double lr_, wd_, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int t_ = 0;
  Eigen::MatrixXd m_w_, v_w_;
  Eigen::VectorXd m_b_, v_b_;
};

struct ClassifierTrainConfig {
  int steps = 100;
  double learning_rate = 1e-3;
  double weight_decay = 1e-3;
  double init_stddev = 0.01;
  std::uint64_t seed = 0;
};

/// Mean cross-entropy and its gradient over labeled features.
double cross_entropy(const LinearClassifier& clf, const LabeledFeatures& data, Eigen::MatrixXd* grad_weight,
                     Eigen::VectorXd* grad_bias);

/// Full-batch Adam on the support set from a seeded random initialization.
LinearClassifier train_initial_classifier(const LabeledFeatures& support, int way,
                                          const ClassifierTrainConfig& config = {});

struct PseudoLabel {
  int label = 0;
  double probability = 0.0;
};

/// Pseudo-label of each base image from its pooled feature GAP(M).
std::vector<PseudoLabel> classify_base_images(std::span<const FeatureMap> maps, const LinearClassifier& clf);

/// Same, from pre-pooled features (one row per image).
std::vector<PseudoLabel> classify_features(const Eigen::MatrixXd& pooled, const LinearClassifier& clf);

struct RetrievedImage {
  std::size_t image = 0;
  double probability = 0.0;
};

/// The min(n_a, available) images pseudo-labeled `k` with the highest
/// probability, descending; equal probabilities ordered by image index.
std::vector<RetrievedImage> retrieve_top(std::span<const PseudoLabel> pool, int k, int n_a);

}  // namespace partshot
