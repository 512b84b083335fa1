#include "partshot/pan.hpp"

#include <cmath>

#include "partshot/errors.hpp"
#include "partshot/hash.hpp"

namespace partshot {

std::string to_string(CamMode mode) {
  switch (mode) {
    case CamMode::c2am: return "c2am";
    case CamMode::plain: return "plain";
    case CamMode::off: return "off";
  }
  return "c2am";
}

CamMode cam_mode_from_string(const std::string& name) {
  if (name == "c2am") return CamMode::c2am;
  if (name == "plain") return CamMode::plain;
  if (name == "off") return CamMode::off;
  throw Error("unknown cam mode '" + name + "'");
}

FeatureNormalizer FeatureNormalizer::fit(const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0) throw Error("cannot fit a feature normalizer on zero rows");
  FeatureNormalizer n;
  n.mean = rows.colwise().mean().transpose();
  const double rms = std::sqrt((rows.rowwise() - n.mean.transpose()).squaredNorm() / static_cast<double>(rows.size()));
  n.scale = rms > 1e-12 ? rms : 1.0;
  return n;
}

void FeatureNormalizer::apply(Eigen::MatrixXd& rows) const {
  if (identity()) return;
  if (rows.cols() != mean.size()) throw ShapeError("feature normalizer dimension mismatch");
  rows = (rows.rowwise() - mean.transpose()) / scale;
}

void FeatureNormalizer::apply(FeatureMap& map) const {
  if (identity()) return;
  if (map.depth != mean.size()) throw ShapeError("feature normalizer dimension mismatch");
  for (std::size_t p = 0; p < map.positions(); ++p) {
    float* cell = map.data.data() + p * static_cast<std::size_t>(map.depth);
    for (int d = 0; d < map.depth; ++d) cell[d] = static_cast<float>((cell[d] - mean[d]) / scale);
  }
}

BasePool BasePool::normalized(std::vector<FeatureMap> maps, std::vector<std::string> ids) {
  BasePool pool = from_maps(std::move(maps), std::move(ids));
  pool.normalizer = FeatureNormalizer::fit(pool.pooled);
  for (auto& m : pool.maps) pool.normalizer.apply(m);
  pool.normalizer.apply(pool.pooled);
  return pool;
}

BasePool BasePool::from_maps(std::vector<FeatureMap> maps, std::vector<std::string> ids) {
  BasePool pool;
  if (!ids.empty() && ids.size() != maps.size()) throw ShapeError("base pool id count mismatch");
  const int depth = maps.empty() ? 0 : maps.front().depth;
  pool.pooled.resize(static_cast<Eigen::Index>(maps.size()), depth);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].depth != depth) throw ShapeError("base pool maps differ in depth");
    pool.pooled.row(static_cast<Eigen::Index>(i)) = global_average_pool(maps[i]).cast<double>().transpose();
  }
  if (ids.empty()) {
    for (std::size_t i = 0; i < maps.size(); ++i) ids.push_back(std::to_string(i));
  }
  pool.maps = std::move(maps);
  pool.ids = std::move(ids);
  return pool;
}

Eigen::VectorXd augmented_feature(const FeatureMap& map, const LinearClassifier& clf, int k, CamMode mode) {
  switch (mode) {
    case CamMode::c2am:
      return pooled_part_feature(map, competitive_attention(class_attention_map(map, clf)).col(k));
    case CamMode::plain:
      return pooled_part_feature(map, plain_attention(class_attention_map(map, clf)).col(k));
    case CamMode::off:
      return global_average_pool(map).cast<double>();
  }
  throw Error("unknown cam mode");
}

PanResult augment_and_refine(const LabeledFeatures& support, int way, int shot, const BasePool* pool,
                             const PanConfig& config, std::uint64_t seed) {
  PanResult result;
  ClassifierTrainConfig init_cfg{config.initial_steps, config.learning_rate, config.weight_decay,
                                 config.init_stddev, seed};
  result.initial = train_initial_classifier(support, way, init_cfg);
  result.augmented.features.resize(0, result.initial.dim());

  const double epsilon = config.epsilon_for(shot);
  if (config.enabled && pool && pool->size() > 0 && config.n_a > 0) {
    const std::vector<PseudoLabel> labels = classify_features(pool->pooled, result.initial);
    std::vector<Eigen::VectorXd> rows;
    for (int k = 0; k < way; ++k) {
      for (const RetrievedImage& hit : retrieve_top(labels, k, config.n_a)) {
        Eigen::VectorXd z = augmented_feature(pool->maps[hit.image], result.initial, k, config.cam_mode);
        const Eigen::VectorXf zf = z.cast<float>();
        result.trace.push_back({hit.image, pool->ids[hit.image], k, hit.probability,
                                to_hex(fnv1a(std::as_bytes(std::span(zf.data(), static_cast<std::size_t>(zf.size())))))});
        rows.push_back(std::move(z));
        result.augmented.labels.push_back(k);
        result.augmented.sources.push_back(hit.image);
        result.augmented.probabilities.push_back(hit.probability);
      }
    }
    result.augmented.features.resize(static_cast<Eigen::Index>(rows.size()), result.initial.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) result.augmented.features.row(static_cast<Eigen::Index>(i)) = rows[i];
  }

  RefineConfig refine_cfg{config.refine_steps, config.learning_rate, config.weight_decay, config.kl_direction};
  result.refined = refine_classifier(result.initial, support, result.augmented, config.lambda, epsilon, refine_cfg);
  return result;
}

}  // namespace partshot
