#include "partshot/linear_classifier.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "partshot/errors.hpp"
#include "partshot/rng.hpp"

namespace partshot {

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  const double shift = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - shift).exp().matrix();
  return e / e.sum();
}

int argmax(const Eigen::Ref<const Eigen::VectorXd>& values) {
  int best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

Eigen::VectorXd LinearClassifier::probabilities(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  return softmax(logits(z));
}

int LinearClassifier::predict(const Eigen::Ref<const Eigen::VectorXd>& z) const { return argmax(logits(z)); }

LinearClassifier LinearClassifier::zeros(int way, int dim) {
  return {Eigen::MatrixXd::Zero(way, dim), Eigen::VectorXd::Zero(way)};
}

LinearClassifier LinearClassifier::random(int way, int dim, double stddev, std::uint64_t seed) {
  LinearClassifier clf = zeros(way, dim);
  Rng rng = make_rng(derive_seed(seed, "classifier-init"));
  for (Eigen::Index i = 0; i < clf.weight.size(); ++i) clf.weight.data()[i] = stddev * normal(rng);
  return clf;
}

AdamOptimizer::AdamOptimizer(int way, int dim, double learning_rate, double weight_decay)
    : lr_(learning_rate),
      wd_(weight_decay),
      m_w_(Eigen::MatrixXd::Zero(way, dim)),
      v_w_(Eigen::MatrixXd::Zero(way, dim)),
      m_b_(Eigen::VectorXd::Zero(way)),
      v_b_(Eigen::VectorXd::Zero(way)) {}

void AdamOptimizer::step(LinearClassifier& clf, const Eigen::MatrixXd& grad_weight, const Eigen::VectorXd& grad_bias) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_), c2 = 1.0 - std::pow(beta2_, t_);
  const Eigen::MatrixXd gw = grad_weight + wd_ * clf.weight;
  const Eigen::VectorXd gb = grad_bias + wd_ * clf.bias;
  m_w_ = beta1_ * m_w_ + (1 - beta1_) * gw;
  v_w_ = beta2_ * v_w_ + (1 - beta2_) * gw.cwiseAbs2();
  m_b_ = beta1_ * m_b_ + (1 - beta1_) * gb;
  v_b_ = beta2_ * v_b_ + (1 - beta2_) * gb.cwiseAbs2();
  clf.weight.array() -= lr_ * (m_w_.array() / c1) / ((v_w_.array() / c2).sqrt() + eps_);
  clf.bias.array() -= lr_ * (m_b_.array() / c1) / ((v_b_.array() / c2).sqrt() + eps_);
}

double cross_entropy(const LinearClassifier& clf, const LabeledFeatures& data, Eigen::MatrixXd* grad_weight,
                     Eigen::VectorXd* grad_bias) {
  if (data.features.rows() != static_cast<Eigen::Index>(data.size())) throw ShapeError("feature/label count mismatch");
  if (data.size() == 0) return 0.0;
  if (data.features.cols() != clf.dim()) throw ShapeError("feature dimension mismatch");
  Eigen::MatrixXd logits = data.features * clf.weight.transpose();  // N x way
  logits.rowwise() += clf.bias.transpose();
  const auto n = static_cast<double>(data.size());
  double loss = 0.0;
  Eigen::MatrixXd dlogits(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Eigen::VectorXd row = logits.row(i).transpose();
    const double shift = row.maxCoeff();
    const double lse = std::log((row.array() - shift).exp().sum()) + shift;
    const int y = data.labels[static_cast<std::size_t>(i)];
    loss += lse - row[y];
    dlogits.row(i) = (row.array() - lse).exp().transpose();
    dlogits(i, y) -= 1.0;
  }
  if (grad_weight) *grad_weight = dlogits.transpose() * data.features / n;
  if (grad_bias) *grad_bias = dlogits.colwise().sum().transpose() / n;
  return loss / n;
}

LinearClassifier train_initial_classifier(const LabeledFeatures& support, int way,
                                          const ClassifierTrainConfig& config) {
  if (way < 1) throw Error("way must be positive");
  std::vector<int> counts(static_cast<std::size_t>(way), 0);
  for (int y : support.labels) {
    if (y < 0 || y >= way) throw Error("support label out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  for (int k = 0; k < way; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) throw Error("class " + std::to_string(k) + " has no support samples");
  }
  const int dim = static_cast<int>(support.features.cols());
  LinearClassifier clf = LinearClassifier::random(way, dim, config.init_stddev, config.seed);
  AdamOptimizer adam(way, dim, config.learning_rate, config.weight_decay);
  Eigen::MatrixXd gw;
  Eigen::VectorXd gb;
  for (int s = 0; s < config.steps; ++s) {
    cross_entropy(clf, support, &gw, &gb);
    adam.step(clf, gw, gb);
  }
  return clf;
}

std::vector<PseudoLabel> classify_features(const Eigen::MatrixXd& pooled, const LinearClassifier& clf) {
  if (pooled.rows() > 0 && pooled.cols() != clf.dim()) throw ShapeError("feature dimension mismatch");
  std::vector<PseudoLabel> out(static_cast<std::size_t>(pooled.rows()));
  for (Eigen::Index i = 0; i < pooled.rows(); ++i) {
    const Eigen::VectorXd p = clf.probabilities(pooled.row(i).transpose());
    const int k = argmax(p);
    out[static_cast<std::size_t>(i)] = {k, p[k]};
  }
  return out;
}

std::vector<PseudoLabel> classify_base_images(std::span<const FeatureMap> maps, const LinearClassifier& clf) {
  Eigen::MatrixXd pooled(static_cast<Eigen::Index>(maps.size()), clf.dim());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].depth != clf.dim()) throw ShapeError("feature map depth does not match classifier");
    pooled.row(static_cast<Eigen::Index>(i)) = global_average_pool(maps[i]).cast<double>().transpose();
  }
  return classify_features(pooled, clf);
}

std::vector<RetrievedImage> retrieve_top(std::span<const PseudoLabel> pool, int k, int n_a) {
  std::vector<RetrievedImage> hits;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].label == k) hits.push_back({i, pool[i].probability});
  }
  if (hits.empty()) {
    spdlog::warn("no base images pseudo-labeled as class {}; refining without augmentation for it", k);
    return hits;
  }
  const std::size_t keep = std::min(hits.size(), static_cast<std::size_t>(std::max(n_a, 0)));
  auto by_rank = [](const RetrievedImage& a, const RetrievedImage& b) {
    return a.probability != b.probability ? a.probability > b.probability : a.image < b.image;
  };
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), by_rank);
  hits.resize(keep);
  return hits;
}

}  // namespace partshot
