#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Core>

#include "partshot/negative_queue.hpp"

namespace partshot {

/// Mean negative cosine similarity between a unit-norm part embedding and
/// every stored negative; lies in [-1, 1]. Throws on an empty queue.
double sample_set_distance(std::span<const float> part, const NegativeQueue& negatives);

/// sample_set_distance for every row of `parts`.
Eigen::VectorXd sample_set_distances(const RowMatrix& parts, const NegativeQueue& negatives);

struct PartChoice {
  std::size_t index = 0;
  double distance = 0.0;
  Eigen::VectorXf embedding;
};

/// The part farthest (on average) from the negative set; ties go to the
/// lowest index.
PartChoice select_discriminative_part(const RowMatrix& parts, const NegativeQueue& negatives);

}  // namespace partshot
