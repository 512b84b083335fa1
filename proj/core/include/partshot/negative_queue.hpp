#pragma once

#include <cstddef>

#include "partshot/encoder.hpp"

namespace partshot {

/// Fixed-capacity FIFO ring of unit-norm momentum embeddings used as the
/// negative set, both for part selection and for the contrastive loss.
class NegativeQueue {
 public:
  NegativeQueue(std::size_t capacity, int dim);

  /// Appends rows, evicting the oldest entries once full. Every row must be
  /// unit norm and the batch may not exceed the capacity.
  void enqueue(const RowMatrix& batch);

  std::size_t capacity() const { return static_cast<std::size_t>(buffer_.rows()); }
  std::size_t filled() const { return filled_; }
  int dim() const { return static_cast<int>(buffer_.cols()); }
  bool empty() const { return filled_ == 0; }
  bool full() const { return filled_ == capacity(); }

  /// Valid rows in storage (ring) order. Order is irrelevant to every consumer
  /// because the negative set enters the math only through sums.
  auto stored() const { return buffer_.topRows(static_cast<Eigen::Index>(filled_)); }

  /// Contents oldest first.
  RowMatrix ordered() const;

 private:
  RowMatrix buffer_;
  std::size_t head_ = 0;
  std::size_t filled_ = 0;
};

}  // namespace partshot
