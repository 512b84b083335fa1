#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "partshot/encoder.hpp"

namespace partshot {

/// Base-pool feature maps on disk. `<stem>.bin` holds float32 little-endian
/// values, image-major then row-major H x W x D; `<stem>.json` is the sidecar
/// with dims, image ids, the encoder checkpoint hash, the config hash and a
/// checksum of the array bytes.
struct FeatureCacheHeader {
  std::size_t count = 0;
  int height = 0;
  int width = 0;
  int depth = 0;
  std::vector<std::string> ids;
  std::string checkpoint_hash;
  std::string config_hash;
  std::string data_checksum;

  std::size_t values() const { return count * static_cast<std::size_t>(height) * width * depth; }
  nlohmann::json to_json() const;
  static FeatureCacheHeader from_json(const nlohmann::json& j);
};

struct FeatureCache {
  FeatureCacheHeader header;
  std::vector<FeatureMap> maps;
};

std::filesystem::path cache_data_path(const std::filesystem::path& stem);
std::filesystem::path cache_header_path(const std::filesystem::path& stem);

/// Both files go through write-temp-then-rename; the sidecar is renamed last.
FeatureCacheHeader write_feature_cache(const std::filesystem::path& stem, const std::vector<FeatureMap>& maps,
                                       const std::vector<std::string>& ids, const std::string& checkpoint_hash,
                                       const std::string& config_hash);

FeatureCacheHeader read_cache_header(const std::filesystem::path& stem);

/// Throws StoreError when the sidecar names a different checkpoint, when the
/// array length disagrees with the dims or when the checksum does not match.
FeatureCache read_feature_cache(const std::filesystem::path& stem, const std::string& expected_checkpoint_hash);

/// True when a complete cache for this checkpoint and id list already exists.
bool feature_cache_current(const std::filesystem::path& stem, const std::string& checkpoint_hash,
                           const std::vector<std::string>& ids);

}  // namespace partshot
