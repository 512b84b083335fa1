#include "partshot/part_selection.hpp"

#include "partshot/errors.hpp"

namespace partshot {

double sample_set_distance(std::span<const float> part, const NegativeQueue& negatives) {
  if (negatives.empty()) throw Error("sample-set distance needs a non-empty negative queue; warm it up first");
  if (static_cast<int>(part.size()) != negatives.dim()) throw ShapeError("part embedding dimension mismatch");
  const Eigen::Map<const Eigen::VectorXf> p(part.data(), static_cast<Eigen::Index>(part.size()));
  const Eigen::VectorXf sims = negatives.stored() * p;
  return -sims.cast<double>().sum() / static_cast<double>(negatives.filled());
}

Eigen::VectorXd sample_set_distances(const RowMatrix& parts, const NegativeQueue& negatives) {
  Eigen::VectorXd d(parts.rows());
  for (Eigen::Index i = 0; i < parts.rows(); ++i) {
    d[i] = sample_set_distance(std::span(parts.row(i).data(), static_cast<std::size_t>(parts.cols())), negatives);
  }
  return d;
}

PartChoice select_discriminative_part(const RowMatrix& parts, const NegativeQueue& negatives) {
  if (parts.rows() == 0) throw Error("part selection needs at least one part");
  const Eigen::VectorXd d = sample_set_distances(parts, negatives);
  PartChoice choice;
  choice.distance = d[0];
  for (Eigen::Index i = 1; i < d.size(); ++i) {
    if (d[i] > choice.distance) {
      choice.distance = d[i];
      choice.index = static_cast<std::size_t>(i);
    }
  }
  choice.embedding = parts.row(static_cast<Eigen::Index>(choice.index)).transpose();
  return choice;
}

}  // namespace partshot
