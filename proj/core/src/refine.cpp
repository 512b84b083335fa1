#include "partshot/refine.hpp"

#include <cmath>

#include "partshot/errors.hpp"

namespace partshot {

SmoothedLabel smooth_label(int y, double epsilon, int way) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error("label smoothing epsilon must lie in (0, 1)");
  if (way < 2) throw Error("label smoothing needs at least two classes");
  if (y < 0 || y >= way) throw Error("label out of range");
  SmoothedLabel s;
  s.epsilon = epsilon;
  s.distribution = Eigen::VectorXd::Constant(way, epsilon / (way - 1));
  s.distribution[y] = 1.0 - epsilon;
  return s;
}

std::string to_string(KlDirection d) { return d == KlDirection::forward ? "forward" : "reverse"; }

KlDirection kl_direction_from_string(const std::string& name) {
  if (name == "forward") return KlDirection::forward;
  if (name == "reverse") return KlDirection::reverse;
  throw Error("unknown KL direction '" + name + "'");
}

double divergence(const Eigen::VectorXd& prediction, const Eigen::VectorXd& target, KlDirection direction) {
  const Eigen::VectorXd& from = direction == KlDirection::forward ? target : prediction;
  const Eigen::VectorXd& to = direction == KlDirection::forward ? prediction : target;
  double kl = 0.0;
  for (Eigen::Index k = 0; k < from.size(); ++k) {
    if (from[k] > 0.0) kl += from[k] * (std::log(from[k]) - std::log(to[k]));
  }
  return kl;
}

ObjectiveValue refinement_objective(const LinearClassifier& clf, const LabeledFeatures& support,
                                    const LabeledFeatures& augmented, double lambda, double epsilon,
                                    KlDirection direction) {
  ObjectiveValue out;
  out.grad_weight = Eigen::MatrixXd::Zero(clf.way(), clf.dim());
  out.grad_bias = Eigen::VectorXd::Zero(clf.way());
  if (support.size() > 0) {
    Eigen::MatrixXd gw;
    Eigen::VectorXd gb;
    out.value = cross_entropy(clf, support, &gw, &gb);
    out.grad_weight += gw;
    out.grad_bias += gb;
  }
  if (augmented.size() == 0 || lambda == 0.0) return out;
  if (augmented.features.cols() != clf.dim()) throw ShapeError("augmented feature dimension mismatch");

  const double scale = lambda / static_cast<double>(augmented.size());
  Eigen::MatrixXd dlogits(static_cast<Eigen::Index>(augmented.size()), clf.way());
  for (std::size_t i = 0; i < augmented.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd z = augmented.features.row(row).transpose();
    const Eigen::VectorXd logits = clf.logits(z);
    const double shift = logits.maxCoeff();
    const double lse = std::log((logits.array() - shift).exp().sum()) + shift;
    const Eigen::VectorXd log_p = logits.array() - lse;
    const Eigen::VectorXd p = log_p.array().exp();
    const Eigen::VectorXd t = smooth_label(augmented.labels[i], epsilon, clf.way()).distribution;
    const Eigen::VectorXd log_t = t.array().log();
    double value = 0.0;
    Eigen::VectorXd g;
    if (direction == KlDirection::forward) {
      value = (t.array() * (log_t - log_p).array()).sum();
      g = p - t;
    } else {
      const Eigen::VectorXd a = log_p - log_t;
      value = (p.array() * a.array()).sum();
      g = p.array() * (a.array() - value);
    }
    out.value += scale * value;
    dlogits.row(row) = scale * g.transpose();
  }
  out.grad_weight += dlogits.transpose() * augmented.features;
  out.grad_bias += dlogits.colwise().sum().transpose();
  return out;
}

LinearClassifier refine_classifier(const LinearClassifier& initial, const LabeledFeatures& support,
                                   const AugmentedFeatureSet& augmented, double lambda, double epsilon,
                                   const RefineConfig& config) {
  if (support.size() == 0) throw Error("refinement needs a non-empty support set");
  if (lambda < 0.0) throw Error("lambda must be non-negative");
  LabeledFeatures aug{augmented.features, augmented.labels};
  LinearClassifier clf = initial;
  AdamOptimizer adam(clf.way(), clf.dim(), config.learning_rate, config.weight_decay);
  for (int s = 0; s < config.steps; ++s) {
    const ObjectiveValue obj = refinement_objective(clf, support, aug, lambda, epsilon, config.direction);
    adam.step(clf, obj.grad_weight, obj.grad_bias);
  }
  return clf;
}

}  // namespace partshot
