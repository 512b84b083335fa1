#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "partshot/evaluate.hpp"
#include "partshot/pan.hpp"
#include "partshot/pretrain.hpp"

namespace partshot {

/// A pretraining configuration that one or more grid rows evaluate.
struct EncoderVariant {
  std::string name;
  PdnConfig pdn;
};

/// One row of a comparison table: an encoder plus a PAN setting.
struct AblationVariant {
  std::string name;
  std::string encoder;
  PanConfig pan;
};

struct AblationGrid {
  std::string name;
  std::vector<EncoderVariant> encoders;
  std::vector<AblationVariant> variants;
  /// (from, to) pairs expected to be non-decreasing in accuracy.
  std::vector<std::pair<std::string, std::string>> expected_order;
};

/// Rows mirroring the component ablation: baseline (two global views),
/// all parts without selection, selected part, each with and without part
/// augmentation, plus plain-CAM augmentation.
AblationGrid component_grid(const PdnConfig& pdn, const PanConfig& pan);

/// One encoder per number of cropped parts, each evaluated with `pan`.
AblationGrid crops_grid(const PdnConfig& pdn, const PanConfig& pan, const std::vector<int>& counts = {2, 4, 6, 8});

/// One encoder, sweeping the number of augmented features per class.
AblationGrid augmented_grid(const PdnConfig& pdn, const PanConfig& pan,
                            const std::vector<int>& n_a = {0, 64, 256, 1024});

AblationGrid grid_by_name(const std::string& name, const PdnConfig& pdn, const PanConfig& pan);

/// Frozen-encoder inputs for evaluation.
struct EncoderAssets {
  SplitFeatures novel;
  BasePool pool;
};

struct AblationComparison {
  std::string from;
  std::string to;
  double delta = 0.0;  // mean(to) - mean(from)
  bool direction_ok = false;
  bool ci_overlap = false;

  /// Reversed with non-overlapping confidence intervals.
  bool failed() const { return !direction_ok && !ci_overlap; }
};

struct AblationTable {
  std::string grid;
  std::vector<std::pair<std::string, EvalReport>> rows;
  std::vector<AblationComparison> comparisons;

  const EvalReport& row(const std::string& name) const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

AblationComparison compare(const std::string& from, const EvalReport& a, const std::string& to, const EvalReport& b);

/// Evaluates every grid row; throws when an encoder's assets are missing.
AblationTable run_ablation(const AblationGrid& grid, const std::map<std::string, EncoderAssets>& assets,
                           const EvalProtocol& protocol);

}  // namespace partshot
