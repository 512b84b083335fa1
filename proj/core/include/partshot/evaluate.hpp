#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "partshot/dataset.hpp"
#include "partshot/encoder.hpp"
#include "partshot/episode.hpp"
#include "partshot/pan.hpp"

namespace partshot {

struct EvalProtocol {
  int way = 5;
  int shot = 1;
  int query_per_class = 15;
  int episodes = 600;
  std::uint64_t seed = 0;
  /// Probe with the randomly initialized head instead of a trained one.
  bool untrained_head = false;

  nlohmann::json to_json() const;
};

nlohmann::json to_json(const PanConfig& pan);

/// GAP features of every image of one split, grouped by class.
struct SplitFeatures {
  Eigen::MatrixXd pooled;  // one row per image of `images`
  std::vector<std::size_t> images;
  std::vector<std::vector<std::size_t>> by_class;  // row indices into `pooled`
};

struct EvalReport {
  std::vector<double> accuracies;
  double mean = 0.0;
  double ci95 = 0.0;
  std::string fingerprint;
  double runtime_seconds = 0.0;
  nlohmann::json provenance = nlohmann::json::object();

  nlohmann::json to_json() const;
  /// "episode,accuracy" header plus one line per episode.
  std::string accuracies_csv() const;
};

/// Backbone maps of full images at encoder resolution.
std::vector<FeatureMap> extract_image_maps(const EncoderParams& params, const DatasetHandle& dataset,
                                           const std::vector<std::size_t>& indices);

/// Pass the base pool's normalizer so novel features live in the same space.
SplitFeatures split_features(const EncoderParams& params, const DatasetHandle& dataset, Split split,
                             const FeatureNormalizer& normalizer);

/// Normalized base pool (see BasePool::normalized).
BasePool build_base_pool(const EncoderParams& params, const DatasetHandle& dataset);

/// The base-pool normalizer without keeping the maps.
FeatureNormalizer fit_base_normalizer(const EncoderParams& params, const DatasetHandle& dataset);

struct EpisodeRun {
  Episode episode;
  PanResult pan;  // initial/refined stay empty with an untrained head
  LinearClassifier classifier;
  double accuracy = 0.0;
};

/// Episode `index` of the protocol, fully determined by protocol.seed.
EpisodeRun run_episode(const SplitFeatures& novel, const BasePool* pool, const EvalProtocol& protocol,
                       const PanConfig& pan, int index);

/// Runs the episodic protocol on precomputed features. `pool` is required
/// when PAN is enabled.
EvalReport evaluate(const SplitFeatures& novel, const BasePool* pool, const EvalProtocol& protocol,
                    const PanConfig& pan);

/// Uses the pool's normalizer, or fits one on the base split without a pool.
EvalReport evaluate(const EncoderParams& encoder, const DatasetHandle& dataset, const EvalProtocol& protocol,
                    const PanConfig& pan, const BasePool* pool);

/// Accuracy of one episode with a given classifier.
double episode_accuracy(const Episode& episode, const SplitFeatures& features, const LinearClassifier& clf);

}  // namespace partshot
