#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "partshot/encoder.hpp"
#include "partshot/evaluate.hpp"
#include "partshot/pan.hpp"
#include "partshot/pretrain.hpp"
#include "partshot/views.hpp"

namespace partshot {

struct DataConfig {
  std::string root;
  int load_side = 64;
  std::array<int, 3> split{24, 6, 10};
  std::uint64_t split_seed = 0;
  bool skip_undecodable = true;
  ViewConfig views;
};

/// Every tunable of a run. Text form is INI/TOML-like:
///
///   global_seed = 0
///   [data]
///   image_side = 32
///   part_scale = [0.05, 0.14]
///   aug.blur = true
///   [pdn]
///   selection = "select_best"
///
/// Section names prefix keys ("data.image_side"); unknown keys are errors.
struct RunConfig {
  std::string preset = "desk";
  std::uint64_t global_seed = 0;
  DataConfig data;
  EncoderSpec encoder;
  PdnConfig pdn;
  PanConfig pan;
  EvalProtocol eval;

  /// desk, paper-mini or paper-tiered.
  static RunConfig from_preset(const std::string& name);

  /// Applies `key = value` overrides in order.
  void apply_text(const std::string& text);
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  /// Canonical text listing every key; stable across runs.
  std::string to_text() const;
  /// FNV-1a of to_text(), hex.
  std::string hash() const;
  /// Hash over global_seed and the data, encoder and pdn sections only: the
  /// keys that determine a checkpoint and its feature cache.
  std::string training_hash() const;

  static std::vector<std::string> keys();
};

/// Preset from the file's `preset` key when present (else `fallback_preset`),
/// then the file's other keys on top.
RunConfig load_config(const std::filesystem::path& path, const std::string& fallback_preset = "desk");

}  // namespace partshot
