#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "partshot/errors.hpp"

namespace partshot {

template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
struct ContrastiveResult {
  T loss{};
  Vec<T> grad_query;
  Vec<T> grad_positive;
};

/// InfoNCE over one positive and a set of negatives:
///
///   loss = -log( exp(q.k / tau) / (exp(q.k / tau) + sum_n exp(q.n / tau)) )
///
/// Inputs are unit norm, so dot products are cosine similarities. Gradients
/// are returned for the query and the positive only; negatives are constants.
/// The log-sum-exp is shifted by its maximum logit.
template <class T>
ContrastiveResult<T> contrastive_loss(const Eigen::Ref<const Vec<T>>& query, const Eigen::Ref<const Vec<T>>& positive,
                                      const Eigen::Ref<const RowMat<T>>& negatives, T tau) {
  if (!(tau > T(0))) throw Error("temperature must be positive");
  if (query.size() != positive.size() || (negatives.rows() > 0 && negatives.cols() != query.size())) {
    throw ShapeError("contrastive loss dimension mismatch");
  }
  const T pos_logit = query.dot(positive) / tau;
  Vec<T> neg_logits = negatives.rows() > 0 ? Vec<T>((negatives * query) / tau) : Vec<T>(0);
  T max_logit = pos_logit;
  if (neg_logits.size() > 0) max_logit = std::max(max_logit, neg_logits.maxCoeff());

  const T pos_exp = std::exp(pos_logit - max_logit);
  Vec<T> neg_exp = (neg_logits.array() - max_logit).exp().matrix();
  const T denom = pos_exp + neg_exp.sum();

  ContrastiveResult<T> r;
  r.loss = std::log(denom) + max_logit - pos_logit;
  const T p_pos = pos_exp / denom;
  r.grad_positive = (p_pos - T(1)) * query / tau;
  r.grad_query = (p_pos - T(1)) * positive / tau;
  if (negatives.rows() > 0) r.grad_query += negatives.transpose() * (neg_exp / denom) / tau;
  return r;
}

}  // namespace partshot
