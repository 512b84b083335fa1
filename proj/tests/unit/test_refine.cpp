#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "partshot/errors.hpp"
#include "partshot/refine.hpp"
#include "partshot/rng.hpp"

using namespace partshot;

namespace {

LabeledFeatures random_set(int n, int way, int dim, Rng& rng) {
  LabeledFeatures s{Eigen::MatrixXd(n, dim), {}};
  for (Eigen::Index i = 0; i < s.features.size(); ++i) s.features.data()[i] = normal(rng);
  for (int i = 0; i < n; ++i) s.labels.push_back(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(way))));
  return s;
}

LinearClassifier random_classifier(int way, int dim, Rng& rng) {
  LinearClassifier clf = LinearClassifier::zeros(way, dim);
  for (Eigen::Index i = 0; i < clf.weight.size(); ++i) clf.weight.data()[i] = 0.7 * normal(rng);
  for (int k = 0; k < way; ++k) clf.bias[k] = 0.3 * normal(rng);
  return clf;
}

// Relative error with a unit floor, as for gradient checks near zero.
double relative_error(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace

TEST(SmoothLabel, OneShotAndFiveShotValues) {
  const auto one = smooth_label(0, 0.2, 5).distribution;
  EXPECT_DOUBLE_EQ(one[0], 0.8);
  for (int k = 1; k < 5; ++k) EXPECT_DOUBLE_EQ(one[k], 0.05);
  const auto five = smooth_label(3, 0.7, 5).distribution;
  EXPECT_NEAR(five[3], 0.3, 1e-15);
  for (int k : {0, 1, 2, 4}) EXPECT_DOUBLE_EQ(five[k], 0.175);
}

TEST(SmoothLabel, SumsToOne) {
  Rng rng = make_rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const int way = 2 + static_cast<int>(uniform_index(rng, 19));
    const double eps = uniform(rng, 1e-6, 1.0 - 1e-6);
    const int y = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(way)));
    EXPECT_NEAR(smooth_label(y, eps, way).distribution.sum(), 1.0, 1e-12);
  }
}

TEST(SmoothLabel, RejectsBadArguments) {
  EXPECT_THROW(smooth_label(0, 0.0, 5), Error);
  EXPECT_THROW(smooth_label(0, 1.0, 5), Error);
  EXPECT_THROW(smooth_label(0, 0.2, 1), Error);
  EXPECT_THROW(smooth_label(5, 0.2, 5), Error);
}

TEST(KlDirection, StringRoundTrip) {
  for (auto d : {KlDirection::forward, KlDirection::reverse}) EXPECT_EQ(kl_direction_from_string(to_string(d)), d);
  EXPECT_THROW(kl_direction_from_string("both"), Error);
}

TEST(Divergence, ZeroWhenPredictionEqualsTarget) {
  const auto t = smooth_label(2, 0.2, 5).distribution;
  EXPECT_EQ(divergence(t, t, KlDirection::forward), 0.0);
  EXPECT_EQ(divergence(t, t, KlDirection::reverse), 0.0);
}

TEST(Divergence, MatchesDefinitionInBothDirections) {
  Rng rng = make_rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd z(5);
    for (int i = 0; i < 5; ++i) z[i] = normal(rng);
    const Eigen::VectorXd p = softmax(z);
    const Eigen::VectorXd t = smooth_label(trial % 5, 0.2, 5).distribution;
    const oracle::Vector op(p.data(), p.data() + 5), ot(t.data(), t.data() + 5);
    EXPECT_NEAR(divergence(p, t, KlDirection::forward), oracle::kl(ot, op), 1e-12);
    EXPECT_NEAR(divergence(p, t, KlDirection::reverse), oracle::kl(op, ot), 1e-12);
    EXPECT_GE(divergence(p, t, KlDirection::forward), 0.0);
  }
}

TEST(RefinementObjective, DivergenceTermVanishesAtTheTarget) {
  // One-dimensional features with z = 1: logits equal the bias, so setting the
  // bias to log t makes p(.|z) = t exactly up to rounding.
  const auto t = smooth_label(1, 0.2, 4).distribution;
  LinearClassifier clf = LinearClassifier::zeros(4, 1);
  clf.bias = t.array().log();
  LabeledFeatures augmented{Eigen::MatrixXd::Ones(3, 1), {1, 1, 1}};
  for (auto dir : {KlDirection::forward, KlDirection::reverse}) {
    const auto obj = refinement_objective(clf, {}, augmented, 1.0, 0.2, dir);
    EXPECT_NEAR(obj.value, 0.0, 1e-15);
    EXPECT_LT(obj.grad_bias.cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(RefinementObjective, SupportOnlyEqualsCrossEntropy) {
  Rng rng = make_rng(3);
  const auto support = random_set(6, 3, 4, rng);
  const auto clf = random_classifier(3, 4, rng);
  const auto augmented = random_set(5, 3, 4, rng);
  const auto obj = refinement_objective(clf, support, augmented, 0.0, 0.2, KlDirection::forward);
  Eigen::MatrixXd gw;
  Eigen::VectorXd gb;
  EXPECT_DOUBLE_EQ(obj.value, cross_entropy(clf, support, &gw, &gb));
  EXPECT_EQ(obj.grad_weight, gw);
  EXPECT_EQ(obj.grad_bias, gb);
}

TEST(RefinementObjective, ForwardDirectionIsSmoothedCrossEntropyMinusEntropy) {
  Rng rng = make_rng(4);
  const auto augmented = random_set(7, 5, 3, rng);
  const auto clf = random_classifier(5, 3, rng);
  const double eps = 0.2;
  const auto obj = refinement_objective(clf, {}, augmented, 1.0, eps, KlDirection::forward);
  double ce = 0.0, entropy = 0.0;
  for (std::size_t i = 0; i < augmented.size(); ++i) {
    const Eigen::VectorXd p = clf.probabilities(augmented.features.row(static_cast<Eigen::Index>(i)).transpose());
    const Eigen::VectorXd t = smooth_label(augmented.labels[i], eps, 5).distribution;
    ce -= (t.array() * p.array().log()).sum();
    entropy -= (t.array() * t.array().log()).sum();
  }
  EXPECT_NEAR(obj.value, (ce - entropy) / 7.0, 1e-12);
}

class RefinementGradient : public ::testing::TestWithParam<KlDirection> {};

TEST_P(RefinementGradient, MatchesCentralDifferences) {
  Rng rng = make_rng(5);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const int way = 2 + static_cast<int>(uniform_index(rng, 4));
    const int dim = 1 + static_cast<int>(uniform_index(rng, 8));
    const auto support = random_set(way, way, dim, rng);
    const auto augmented = random_set(3 + trial % 5, way, dim, rng);
    const auto clf = random_classifier(way, dim, rng);
    const double lambda = uniform(rng, 0.1, 2.0), eps = uniform(rng, 0.05, 0.9);
    auto value = [&](const LinearClassifier& c) {
      return refinement_objective(c, support, augmented, lambda, eps, GetParam()).value;
    };
    const auto obj = refinement_objective(clf, support, augmented, lambda, eps, GetParam());
    for (Eigen::Index i = 0; i < clf.weight.size(); ++i) {
      auto p = clf, m = clf;
      p.weight.data()[i] += h;
      m.weight.data()[i] -= h;
      EXPECT_LT(relative_error(obj.grad_weight.data()[i], (value(p) - value(m)) / (2 * h)), 1e-4);
    }
    for (int k = 0; k < way; ++k) {
      auto p = clf, m = clf;
      p.bias[k] += h;
      m.bias[k] -= h;
      EXPECT_LT(relative_error(obj.grad_bias[k], (value(p) - value(m)) / (2 * h)), 1e-4);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(BothDirections, RefinementGradient,
                         ::testing::Values(KlDirection::forward, KlDirection::reverse),
                         [](const auto& info) { return to_string(info.param); });

TEST(RefineClassifier, ZeroStepsLeavesClassifierUnchanged) {
  Rng rng = make_rng(6);
  const auto support = random_set(5, 5, 4, rng);
  const auto clf = random_classifier(5, 4, rng);
  RefineConfig config;
  config.steps = 0;
  const auto out = refine_classifier(clf, support, {}, 0.0, 0.2, config);
  EXPECT_EQ(out.weight, clf.weight);
  EXPECT_EQ(out.bias, clf.bias);
}

TEST(RefineClassifier, LambdaZeroEqualsSupportOnlyTraining) {
  Rng rng = make_rng(7);
  const auto support = random_set(10, 5, 4, rng);
  const auto clf = random_classifier(5, 4, rng);
  const auto aug_set = random_set(8, 5, 4, rng);
  AugmentedFeatureSet augmented{aug_set.features, aug_set.labels, std::vector<std::size_t>(8), std::vector<double>(8)};
  const auto with_aug = refine_classifier(clf, support, augmented, 0.0, 0.2);
  const auto without = refine_classifier(clf, support, {}, 1.0, 0.2);
  EXPECT_EQ(with_aug.weight, without.weight);
  EXPECT_EQ(with_aug.bias, without.bias);
}

TEST(RefineClassifier, LowersObjectiveWhenAugmentationMatchesSupport) {
  Rng rng = make_rng(8);
  const auto support = random_set(5, 5, 16, rng);
  LabeledFeatures fixed = support;
  for (int k = 0; k < 5; ++k) fixed.labels[static_cast<std::size_t>(k)] = k;
  const auto clf = LinearClassifier::random(5, 16, 0.01, 9);
  AugmentedFeatureSet augmented{fixed.features, fixed.labels, std::vector<std::size_t>(5), std::vector<double>(5)};
  const double eps = 0.01;
  const auto before = refinement_objective(clf, fixed, {augmented.features, augmented.labels}, 1.0, eps,
                                           KlDirection::forward);
  const auto refined = refine_classifier(clf, fixed, augmented, 1.0, eps);
  const auto after = refinement_objective(refined, fixed, {augmented.features, augmented.labels}, 1.0, eps,
                                          KlDirection::forward);
  EXPECT_LT(after.value, before.value);
}

TEST(RefineClassifier, RejectsEmptySupportAndNegativeLambda) {
  const auto clf = LinearClassifier::zeros(2, 3);
  EXPECT_THROW(refine_classifier(clf, {}, {}, 1.0, 0.2), Error);
  LabeledFeatures support{Eigen::MatrixXd::Zero(2, 3), {0, 1}};
  EXPECT_THROW(refine_classifier(clf, support, {}, -1.0, 0.2), Error);
}
