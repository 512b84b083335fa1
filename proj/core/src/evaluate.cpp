#include "partshot/evaluate.hpp"

#include <chrono>
#include <sstream>

#include "partshot/errors.hpp"
#include "partshot/hash.hpp"
#include "partshot/stats.hpp"
#include "partshot/views.hpp"

namespace partshot {

nlohmann::json EvalProtocol::to_json() const {
  return {{"way", way},
          {"shot", shot},
          {"query_per_class", query_per_class},
          {"episodes", episodes},
          {"seed", seed},
          {"untrained_head", untrained_head}};
}

nlohmann::json to_json(const PanConfig& pan) {
  return {{"enabled", pan.enabled},
          {"n_a", pan.n_a},
          {"epsilon_1shot", pan.epsilon_1shot},
          {"epsilon_5shot", pan.epsilon_5shot},
          {"lambda", pan.lambda},
          {"cam_mode", to_string(pan.cam_mode)},
          {"kl_direction", to_string(pan.kl_direction)},
          {"initial_steps", pan.initial_steps},
          {"refine_steps", pan.refine_steps},
          {"learning_rate", pan.learning_rate},
          {"weight_decay", pan.weight_decay},
          {"init_stddev", pan.init_stddev}};
}

nlohmann::json EvalReport::to_json() const {
  return {{"mean", mean},
          {"ci95", ci95},
          {"episodes", accuracies.size()},
          {"fingerprint", fingerprint},
          {"runtime_seconds", runtime_seconds},
          {"accuracies", accuracies},
          {"provenance", provenance}};
}

std::string EvalReport::accuracies_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "episode,accuracy\n";
  for (std::size_t i = 0; i < accuracies.size(); ++i) os << i << "," << accuracies[i] << "\n";
  return os.str();
}

std::vector<FeatureMap> extract_image_maps(const EncoderParams& params, const DatasetHandle& dataset,
                                           const std::vector<std::size_t>& indices) {
  std::vector<FeatureMap> maps;
  maps.reserve(indices.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < indices.size(); start += kChunk) {
    std::vector<Image> views;
    for (std::size_t i = start; i < std::min(indices.size(), start + kChunk); ++i) {
      views.push_back(full_view(dataset.image(indices[i]), params.spec.input_side));
    }
    auto chunk = extract_feature_maps(params, views);
    for (auto& m : chunk) maps.push_back(std::move(m));
  }
  return maps;
}

namespace {

Eigen::MatrixXd gap_rows(const std::vector<FeatureMap>& maps, int depth) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(maps.size()), depth);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = global_average_pool(maps[i]).cast<double>().transpose();
  }
  return rows;
}

}  // namespace

SplitFeatures split_features(const EncoderParams& params, const DatasetHandle& dataset, Split split,
                             const FeatureNormalizer& normalizer) {
  SplitFeatures f;
  const auto groups = dataset.images_by_class(split);
  for (const auto& group : groups) {
    std::vector<std::size_t> rows;
    for (std::size_t image : group) {
      rows.push_back(f.images.size());
      f.images.push_back(image);
    }
    f.by_class.push_back(std::move(rows));
  }
  f.pooled = gap_rows(extract_image_maps(params, dataset, f.images), params.spec.channels);
  normalizer.apply(f.pooled);
  return f;
}

BasePool build_base_pool(const EncoderParams& params, const DatasetHandle& dataset) {
  const auto& indices = dataset.indices(Split::base);
  std::vector<std::string> ids;
  for (std::size_t i : indices) ids.push_back(dataset.source(i).empty() ? std::to_string(i) : dataset.source(i));
  return BasePool::normalized(extract_image_maps(params, dataset, indices), std::move(ids));
}

FeatureNormalizer fit_base_normalizer(const EncoderParams& params, const DatasetHandle& dataset) {
  return FeatureNormalizer::fit(gap_rows(extract_image_maps(params, dataset, dataset.indices(Split::base)),
                                         params.spec.channels));
}

namespace {

LabeledFeatures gather(const std::vector<EpisodeItem>& items, const SplitFeatures& features) {
  LabeledFeatures out;
  out.features.resize(static_cast<Eigen::Index>(items.size()), features.pooled.cols());
  for (std::size_t i = 0; i < items.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.pooled.row(static_cast<Eigen::Index>(items[i].image));
    out.labels.push_back(items[i].label);
  }
  return out;
}

}  // namespace

double episode_accuracy(const Episode& episode, const SplitFeatures& features, const LinearClassifier& clf) {
  if (episode.query.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& item : episode.query) {
    const Eigen::VectorXd z = features.pooled.row(static_cast<Eigen::Index>(item.image)).transpose();
    if (clf.predict(z) == item.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(episode.query.size());
}

EpisodeRun run_episode(const SplitFeatures& novel, const BasePool* pool, const EvalProtocol& protocol,
                       const PanConfig& pan, int index) {
  EpisodeRun run;
  const std::uint64_t seed = episode_seed(protocol.seed, static_cast<std::size_t>(index));
  run.episode = sample_episode(novel.by_class, protocol.way, protocol.shot, protocol.query_per_class, seed);
  if (protocol.untrained_head) {
    run.classifier = LinearClassifier::random(protocol.way, static_cast<int>(novel.pooled.cols()), pan.init_stddev, seed);
  } else {
    run.pan = augment_and_refine(gather(run.episode.support, novel), protocol.way, protocol.shot,
                                 pan.enabled ? pool : nullptr, pan, seed);
    run.classifier = run.pan.refined;
  }
  run.accuracy = episode_accuracy(run.episode, novel, run.classifier);
  return run;
}

EvalReport evaluate(const SplitFeatures& novel, const BasePool* pool, const EvalProtocol& protocol,
                    const PanConfig& pan) {
  if (pan.enabled && !protocol.untrained_head && pool == nullptr) {
    throw Error("part augmentation is enabled but no base-pool feature cache was provided");
  }
  if (protocol.episodes < 2) throw Error("evaluation needs at least two episodes");
  const auto t0 = std::chrono::steady_clock::now();
  EvalReport report;
  report.accuracies.reserve(static_cast<std::size_t>(protocol.episodes));
  for (int e = 0; e < protocol.episodes; ++e) {
    report.accuracies.push_back(run_episode(novel, pool, protocol, pan, e).accuracy);
  }
  const MeanCi stats = confidence_interval(report.accuracies);
  report.mean = stats.mean;
  report.ci95 = stats.ci95;
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report.provenance = {{"protocol", protocol.to_json()}, {"pan", to_json(pan)}};

  Fnv1a h;
  h.update(report.provenance.dump());
  h.update_values(std::span<const double>(report.accuracies));
  report.fingerprint = to_hex(h.digest());
  return report;
}

EvalReport evaluate(const EncoderParams& encoder, const DatasetHandle& dataset, const EvalProtocol& protocol,
                    const PanConfig& pan, const BasePool* pool) {
  const FeatureNormalizer normalizer = pool ? pool->normalizer : fit_base_normalizer(encoder, dataset);
  return evaluate(split_features(encoder, dataset, Split::novel, normalizer), pool, protocol, pan);
}

}  // namespace partshot
