#include "partshot/attention.hpp"

#include "partshot/errors.hpp"

namespace partshot {
namespace {

Eigen::Map<const Eigen::MatrixXf> positions_by_depth(const FeatureMap& map) {
  // data is [position][depth], i.e. a column-major depth x positions matrix.
  return {map.data.data(), map.depth, static_cast<Eigen::Index>(map.positions())};
}

}  // namespace

Eigen::MatrixXd class_attention_map(const FeatureMap& map, const LinearClassifier& clf) {
  if (map.depth != clf.dim()) throw ShapeError("feature map depth does not match classifier");
  Eigen::MatrixXd scores = positions_by_depth(map).cast<double>().transpose() * clf.weight.transpose();
  scores.rowwise() += clf.bias.transpose();
  return scores;
}

Eigen::MatrixXd competitive_attention(const Eigen::MatrixXd& scores) {
  if (scores.cols() < 2) throw Error("class-competitive attention needs at least two classes");
  Eigen::MatrixXd alpha(scores.rows(), scores.cols());
  for (Eigen::Index p = 0; p < scores.rows(); ++p) {
    alpha.row(p) = softmax(scores.row(p).transpose()).transpose();
  }
  return alpha;
}

Eigen::MatrixXd plain_attention(const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd w(scores.rows(), scores.cols());
  for (Eigen::Index k = 0; k < scores.cols(); ++k) {
    w.col(k) = scores.col(k).array() - scores.col(k).minCoeff();
    if (!(w.col(k).sum() > 0.0)) w.col(k).setConstant(1.0);
  }
  return w;
}

AttentionMap compute_attention(const FeatureMap& map, const LinearClassifier& clf) {
  AttentionMap a;
  a.height = map.height;
  a.width = map.width;
  a.scores = class_attention_map(map, clf);
  a.alpha = competitive_attention(a.scores);
  return a;
}

Eigen::VectorXd pooled_part_feature(const FeatureMap& map, const Eigen::Ref<const Eigen::VectorXd>& weights) {
  if (weights.size() != static_cast<Eigen::Index>(map.positions())) throw ShapeError("attention weight count mismatch");
  if ((weights.array() < 0.0).any()) throw Error("attention weights must be non-negative");
  const double mass = weights.sum();
  if (!(mass > 0.0)) throw Error("attention weights have zero total mass");
  return positions_by_depth(map).cast<double>() * weights / mass;
}

}  // namespace partshot
