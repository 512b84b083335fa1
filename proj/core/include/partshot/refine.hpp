#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "partshot/linear_classifier.hpp"

namespace partshot {

/// Smoothed target: 1 - epsilon on the true class, epsilon / (way - 1) elsewhere.
struct SmoothedLabel {
  Eigen::VectorXd distribution;
  double epsilon = 0.0;
};

SmoothedLabel smooth_label(int y, double epsilon, int way);

/// Divergence between the prediction p and the smoothed target t.
///   forward: KL(t || p), the label-smoothing cross-entropy minus H(t)
///   reverse: KL(p || t)
enum class KlDirection { forward, reverse };

std::string to_string(KlDirection d);
KlDirection kl_direction_from_string(const std::string& name);

double divergence(const Eigen::VectorXd& prediction, const Eigen::VectorXd& target, KlDirection direction);

/// Attention-pooled features from retrieved base images, labeled with the
/// class they were retrieved for.
struct AugmentedFeatureSet {
  Eigen::MatrixXd features;  // N x D
  std::vector<int> labels;
  std::vector<std::size_t> sources;
  std::vector<double> probabilities;

  std::size_t size() const { return labels.size(); }
};

struct ObjectiveValue {
  double value = 0.0;
  Eigen::MatrixXd grad_weight;
  Eigen::VectorXd grad_bias;
};

/// mean_support CE(y, p(.|z)) + lambda * mean_augmented divergence(p(.|z), p_y).
/// Either set may be empty (its term is then zero).
ObjectiveValue refinement_objective(const LinearClassifier& clf, const LabeledFeatures& support,
                                    const LabeledFeatures& augmented, double lambda, double epsilon,
                                    KlDirection direction);

struct RefineConfig {
  int steps = 100;
  double learning_rate = 1e-3;
  double weight_decay = 1e-3;
  KlDirection direction = KlDirection::forward;
};

/// Continues training from `initial` on the support set and the augmented
/// set together (both full-batch every step, fresh Adam state).
LinearClassifier refine_classifier(const LinearClassifier& initial, const LabeledFeatures& support,
                                   const AugmentedFeatureSet& augmented, double lambda, double epsilon,
                                   const RefineConfig& config = {});

}  // namespace partshot
