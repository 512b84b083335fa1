#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "partshot/attention.hpp"
#include "partshot/encoder.hpp"
#include "partshot/linear_classifier.hpp"
#include "partshot/refine.hpp"

namespace partshot {

/// How retrieved feature maps are pooled into augmented features.
///   c2am  - class-competitive attention (softmax across classes per location)
///   plain - raw class activation map, min-shifted to non-negative weights
///   off   - plain global average pooling
enum class CamMode { c2am, plain, off };

std::string to_string(CamMode mode);
CamMode cam_mode_from_string(const std::string& name);

struct PanConfig {
  bool enabled = true;
  int n_a = 1024;
  double epsilon_1shot = 0.2;
  double epsilon_5shot = 0.7;
  double lambda = 1.0;
  CamMode cam_mode = CamMode::c2am;
  KlDirection kl_direction = KlDirection::forward;
  int initial_steps = 100;
  int refine_steps = 100;
  double learning_rate = 1e-3;
  double weight_decay = 1e-3;
  double init_stddev = 0.01;

  /// 1-shot value for shot <= 1, 5-shot value otherwise.
  double epsilon_for(int shot) const { return shot <= 1 ? epsilon_1shot : epsilon_5shot; }
};

/// z' = (z - mean) / scale, fitted on unlabeled base-pool GAP features with a
/// single scalar scale (the RMS deviation from the mean). Being affine, it
/// commutes with average and attention pooling, so class activation maps of
/// normalized maps stay consistent with the classifier logits.
struct FeatureNormalizer {
  Eigen::VectorXd mean;  // empty for the identity
  double scale = 1.0;

  static FeatureNormalizer fit(const Eigen::MatrixXd& rows);
  bool identity() const { return mean.size() == 0; }
  void apply(Eigen::MatrixXd& rows) const;
  void apply(FeatureMap& map) const;
};

/// Cached backbone maps of the unlabeled base pool plus their GAP features.
struct BasePool {
  std::vector<FeatureMap> maps;
  Eigen::MatrixXd pooled;  // one row per image
  std::vector<std::string> ids;
  FeatureNormalizer normalizer;  // already applied to maps and pooled

  /// Maps as given.
  static BasePool from_maps(std::vector<FeatureMap> maps, std::vector<std::string> ids = {});
  /// Fits a normalizer on the pool's GAP features and applies it to every map.
  static BasePool normalized(std::vector<FeatureMap> maps, std::vector<std::string> ids = {});
  std::size_t size() const { return maps.size(); }
};

struct TraceEntry {
  std::size_t image = 0;
  std::string id;
  int class_k = 0;
  double probability = 0.0;
  std::string checksum;  // FNV-1a of the pooled feature as float32
};

struct PanResult {
  LinearClassifier initial;
  LinearClassifier refined;
  AugmentedFeatureSet augmented;
  std::vector<TraceEntry> trace;
};

/// Pools one retrieved map for class k under the configured attention mode.
Eigen::VectorXd augmented_feature(const FeatureMap& map, const LinearClassifier& clf, int k, CamMode mode);

/// Initial classifier -> pseudo-label the pool -> top-N_a per class ->
/// attention pooling -> refinement. With PAN disabled, no pool or N_a = 0 the
/// refinement runs on the support set alone.
PanResult augment_and_refine(const LabeledFeatures& support, int way, int shot, const BasePool* pool,
                             const PanConfig& config, std::uint64_t seed);

}  // namespace partshot
