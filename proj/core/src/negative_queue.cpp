#include "partshot/negative_queue.hpp"

#include <cmath>

#include "partshot/errors.hpp"

namespace partshot {

namespace {
constexpr double kNormTolerance = 1e-4;
}

NegativeQueue::NegativeQueue(std::size_t capacity, int dim)
    : buffer_(RowMatrix::Zero(static_cast<Eigen::Index>(capacity), dim)) {
  if (capacity == 0 || dim <= 0) throw ShapeError("negative queue needs positive capacity and dimension");
}

void NegativeQueue::enqueue(const RowMatrix& batch) {
  if (batch.cols() != buffer_.cols()) throw ShapeError("negative queue dimension mismatch");
  if (static_cast<std::size_t>(batch.rows()) > capacity()) {
    throw ShapeError("batch of " + std::to_string(batch.rows()) + " exceeds queue capacity " +
                     std::to_string(capacity()));
  }
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    if (std::abs(batch.row(r).norm() - 1.0) > kNormTolerance) throw Error("negative queue entries must be unit norm");
  }
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    buffer_.row(static_cast<Eigen::Index>(head_)) = batch.row(r);
    head_ = (head_ + 1) % capacity();
  }
  filled_ = std::min(capacity(), filled_ + static_cast<std::size_t>(batch.rows()));
}

RowMatrix NegativeQueue::ordered() const {
  RowMatrix out(static_cast<Eigen::Index>(filled_), buffer_.cols());
  const std::size_t start = full() ? head_ : 0;
  for (std::size_t i = 0; i < filled_; ++i) {
    out.row(static_cast<Eigen::Index>(i)) = buffer_.row(static_cast<Eigen::Index>((start + i) % capacity()));
  }
  return out;
}

}  // namespace partshot
