#include "partshot/feature_cache.hpp"

#include <bit>
#include <fstream>

#include "partshot/errors.hpp"
#include "partshot/hash.hpp"

namespace partshot {

static_assert(std::endian::native == std::endian::little, "feature cache I/O assumes a little-endian host");

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

void atomic_write(const std::filesystem::path& path, const char* data, std::size_t size) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot write " + tmp.string());
    out.write(data, static_cast<std::streamsize>(size));
    if (!out) throw StoreError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

nlohmann::json FeatureCacheHeader::to_json() const {
  return {{"format", 1},
          {"count", count},
          {"height", height},
          {"width", width},
          {"depth", depth},
          {"ids", ids},
          {"checkpoint_hash", checkpoint_hash},
          {"config_hash", config_hash},
          {"data_checksum", data_checksum}};
}

FeatureCacheHeader FeatureCacheHeader::from_json(const nlohmann::json& j) {
  FeatureCacheHeader h;
  try {
    h.count = j.at("count").get<std::size_t>();
    h.height = j.at("height").get<int>();
    h.width = j.at("width").get<int>();
    h.depth = j.at("depth").get<int>();
    h.ids = j.at("ids").get<std::vector<std::string>>();
    h.checkpoint_hash = j.at("checkpoint_hash").get<std::string>();
    h.config_hash = j.value("config_hash", std::string());
    h.data_checksum = j.at("data_checksum").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw StoreError(std::string("malformed feature cache header: ") + e.what());
  }
  if (h.ids.size() != h.count) throw StoreError("feature cache header lists a different number of ids than count");
  return h;
}

std::filesystem::path cache_data_path(const std::filesystem::path& stem) { return with_suffix(stem, ".bin"); }
std::filesystem::path cache_header_path(const std::filesystem::path& stem) { return with_suffix(stem, ".json"); }

FeatureCacheHeader write_feature_cache(const std::filesystem::path& stem, const std::vector<FeatureMap>& maps,
                                       const std::vector<std::string>& ids, const std::string& checkpoint_hash,
                                       const std::string& config_hash) {
  if (ids.size() != maps.size()) throw ShapeError("feature cache needs one id per map");
  FeatureCacheHeader h;
  h.count = maps.size();
  if (!maps.empty()) {
    h.height = maps.front().height;
    h.width = maps.front().width;
    h.depth = maps.front().depth;
  }
  h.ids = ids;
  h.checkpoint_hash = checkpoint_hash;
  h.config_hash = config_hash;

  std::vector<float> flat;
  flat.reserve(h.values());
  for (const auto& m : maps) {
    if (m.height != h.height || m.width != h.width || m.depth != h.depth) {
      throw ShapeError("feature maps in one cache must share dims");
    }
    flat.insert(flat.end(), m.data.begin(), m.data.end());
  }
  h.data_checksum = to_hex(fnv1a(std::as_bytes(std::span<const float>(flat))));

  atomic_write(cache_data_path(stem), reinterpret_cast<const char*>(flat.data()), flat.size() * sizeof(float));
  const std::string text = h.to_json().dump(1);
  atomic_write(cache_header_path(stem), text.data(), text.size());
  return h;
}

FeatureCacheHeader read_cache_header(const std::filesystem::path& stem) {
  std::ifstream in(cache_header_path(stem));
  if (!in) throw StoreError("missing feature cache header " + cache_header_path(stem).string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw StoreError("unreadable feature cache header " + cache_header_path(stem).string() + ": " + e.what());
  }
  return FeatureCacheHeader::from_json(j);
}

FeatureCache read_feature_cache(const std::filesystem::path& stem, const std::string& expected_checkpoint_hash) {
  FeatureCache cache;
  cache.header = read_cache_header(stem);
  const auto& h = cache.header;
  if (h.checkpoint_hash != expected_checkpoint_hash) {
    throw StoreError("feature cache " + stem.string() + " was built from checkpoint " + h.checkpoint_hash +
                     ", expected " + expected_checkpoint_hash);
  }
  const auto data_path = cache_data_path(stem);
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(data_path, ec);
  if (ec) throw StoreError("missing feature cache data " + data_path.string());
  if (bytes != h.values() * sizeof(float)) {
    throw StoreError("feature cache " + data_path.string() + " holds " + std::to_string(bytes) +
                     " bytes, header implies " + std::to_string(h.values() * sizeof(float)));
  }
  std::vector<float> flat(h.values());
  std::ifstream in(data_path, std::ios::binary);
  in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) throw StoreError("short read on " + data_path.string());
  if (to_hex(fnv1a(std::as_bytes(std::span<const float>(flat)))) != h.data_checksum) {
    throw StoreError("feature cache checksum mismatch for " + data_path.string());
  }
  const std::size_t per = static_cast<std::size_t>(h.height) * h.width * h.depth;
  cache.maps.reserve(h.count);
  for (std::size_t i = 0; i < h.count; ++i) {
    FeatureMap m{h.height, h.width, h.depth, {}};
    m.data.assign(flat.begin() + static_cast<std::ptrdiff_t>(i * per),
                  flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
    cache.maps.push_back(std::move(m));
  }
  return cache;
}

bool feature_cache_current(const std::filesystem::path& stem, const std::string& checkpoint_hash,
                           const std::vector<std::string>& ids) {
  if (!std::filesystem::exists(cache_header_path(stem)) || !std::filesystem::exists(cache_data_path(stem))) return false;
  try {
    const auto h = read_cache_header(stem);
    if (h.checkpoint_hash != checkpoint_hash || h.ids != ids) return false;
    return std::filesystem::file_size(cache_data_path(stem)) == h.values() * sizeof(float);
  } catch (const StoreError&) {
    return false;
  }
}

}  // namespace partshot
