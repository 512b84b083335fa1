#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "partshot/contrastive.hpp"
#include "partshot/rng.hpp"

using namespace partshot;

namespace {

Vec<double> unit(int dim, Rng& rng) {
  Vec<double> v(dim);
  for (int i = 0; i < dim; ++i) v[i] = normal(rng);
  return v.normalized();
}

RowMat<double> units(int rows, int dim, Rng& rng) {
  RowMat<double> m(rows, dim);
  for (int r = 0; r < rows; ++r) m.row(r) = unit(dim, rng).transpose();
  return m;
}

// Unit vector at a given cosine to `q`.
Vec<double> at_cosine(const Vec<double>& q, double cosine, Rng& rng) {
  Vec<double> o = unit(static_cast<int>(q.size()), rng);
  o = (o - o.dot(q) * q).normalized();
  return cosine * q + std::sqrt(1.0 - cosine * cosine) * o;
}

}  // namespace

TEST(Contrastive, OneEqualNegativeIsLnTwo) {
  Rng rng = make_rng(1);
  for (double tau : {0.05, 0.2, 1.0, 7.0}) {
    const Vec<double> q = unit(8, rng);
    const Vec<double> k = at_cosine(q, 0.3, rng);
    RowMat<double> n(1, 8);
    n.row(0) = at_cosine(q, 0.3, rng).transpose();
    EXPECT_NEAR(contrastive_loss<double>(q, k, n, tau).loss, std::log(2.0), 1e-9);
  }
}

TEST(Contrastive, NEqualNegativesIsLnNPlusOne) {
  Rng rng = make_rng(2);
  for (int n_neg : {1, 5, 64, 1024}) {
    const Vec<double> q = unit(16, rng);
    const Vec<double> k = at_cosine(q, -0.2, rng);
    RowMat<double> n(n_neg, 16);
    for (int i = 0; i < n_neg; ++i) n.row(i) = at_cosine(q, -0.2, rng).transpose();
    EXPECT_NEAR(contrastive_loss<double>(q, k, n, 0.2).loss, std::log(n_neg + 1.0), 1e-9);
  }
}

TEST(Contrastive, OppositeNegativeHandValue) {
  Vec<double> q(2), k(2);
  q << 1, 0;
  k << 1, 0;
  RowMat<double> n(1, 2);
  n << -1, 0;
  const double want = -std::log(std::exp(5.0) / (std::exp(5.0) + std::exp(-5.0)));
  EXPECT_NEAR(contrastive_loss<double>(q, k, n, 0.2).loss, want, 1e-15);
  EXPECT_NEAR(want, 4.54e-5, 1e-7);
}

TEST(Contrastive, MatchesUnshiftedOracleAndIsPositive) {
  Rng rng = make_rng(3);
  for (int t = 0; t < 200; ++t) {
    const int dim = 2 + static_cast<int>(uniform_index(rng, 7));
    const int n_neg = 1 + static_cast<int>(uniform_index(rng, 128));
    const Vec<double> q = unit(dim, rng), k = unit(dim, rng);
    const RowMat<double> n = units(n_neg, dim, rng);
    const double tau = uniform(rng, 0.1, 1.0);
    oracle::Matrix on;
    for (int r = 0; r < n_neg; ++r) on.emplace_back(n.row(r).data(), n.row(r).data() + dim);
    const double want = oracle::infonce({q.data(), q.data() + dim}, {k.data(), k.data() + dim}, on, tau);
    const double got = contrastive_loss<double>(q, k, n, tau).loss;
    EXPECT_NEAR(got, want, 1e-9 * std::max(1.0, want));
    EXPECT_GT(got, 0.0);
  }
}

TEST(Contrastive, GradientsMatchCentralDifferences) {
  Rng rng = make_rng(4);
  for (int t = 0; t < 100; ++t) {
    const int dim = 2 + static_cast<int>(uniform_index(rng, 7));
    const int n_neg = 1 + static_cast<int>(uniform_index(rng, 64));
    const Vec<double> q = unit(dim, rng), k = unit(dim, rng);
    const RowMat<double> n = units(n_neg, dim, rng);
    const double tau = uniform(rng, 0.1, 1.0);
    const auto r = contrastive_loss<double>(q, k, n, tau);
    const double h = 1e-6;
    for (int i = 0; i < dim; ++i) {
      Vec<double> qp = q, qm = q, kp = k, km = k;
      qp[i] += h;
      qm[i] -= h;
      kp[i] += h;
      km[i] -= h;
      const double dq = (contrastive_loss<double>(qp, k, n, tau).loss - contrastive_loss<double>(qm, k, n, tau).loss) / (2 * h);
      const double dk = (contrastive_loss<double>(q, kp, n, tau).loss - contrastive_loss<double>(q, km, n, tau).loss) / (2 * h);
      EXPECT_LE(std::abs(dq - r.grad_query[i]), 1e-4 * std::max(1.0, std::abs(dq)));
      EXPECT_LE(std::abs(dk - r.grad_positive[i]), 1e-4 * std::max(1.0, std::abs(dk)));
    }
  }
}

TEST(Contrastive, NegativesAreLeftUntouched) {
  Rng rng = make_rng(5);
  const Vec<double> q = unit(8, rng), k = unit(8, rng);
  const RowMat<double> n = units(32, 8, rng);
  const RowMat<double> copy = n;
  const auto r = contrastive_loss<double>(q, k, n, 0.2);
  EXPECT_EQ(n, copy);
  EXPECT_EQ(r.grad_query.size(), 8);
  EXPECT_EQ(r.grad_positive.size(), 8);
}

TEST(Contrastive, DecreasingInPositiveSimilarityProperty) {
  Rng rng = make_rng(6);
  for (int t = 0; t < 200; ++t) {
    const Vec<double> q = unit(8, rng);
    const RowMat<double> n = units(16, 8, rng);
    double a = uniform(rng, -0.99, 0.99), b = uniform(rng, -0.99, 0.99);
    if (a > b) std::swap(a, b);
    if (b - a < 1e-6) continue;
    const Vec<double> ka = at_cosine(q, a, rng), kb = at_cosine(q, b, rng);
    EXPECT_GT(contrastive_loss<double>(q, ka, n, 0.2).loss, contrastive_loss<double>(q, kb, n, 0.2).loss);
  }
}

TEST(Contrastive, StableForTinyTemperature) {
  Rng rng = make_rng(7);
  const Vec<double> q = unit(8, rng), k = unit(8, rng);
  const RowMat<double> n = units(64, 8, rng);
  const auto r = contrastive_loss<double>(q, k, n, 1e-4);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_TRUE(r.grad_query.allFinite());
  EXPECT_THROW(contrastive_loss<double>(q, k, n, 0.0), Error);
  const auto f = contrastive_loss<float>(q.cast<float>(), k.cast<float>(), n.cast<float>(), 0.01f);
  EXPECT_TRUE(std::isfinite(f.loss));
}
