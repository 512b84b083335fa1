#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "partshot/encoder.hpp"
#include "partshot/momentum.hpp"

namespace partshot {

/// On-disk layout (all integers little-endian):
///   8 bytes   magic "PSCKPT01"
///   8 bytes   header length L (uint64)
///   L bytes   JSON header: format, architecture spec, step, config hash,
///             tensor table, optional momentum coefficient, free-form extra
///   payload   float32 data of every online tensor in table order, then of
///             every momentum tensor when present
struct Checkpoint {
  EncoderParams online;
  std::optional<MomentumEncoder> momentum;
  std::int64_t step = 0;
  std::string config_hash;
  nlohmann::json extra = nlohmann::json::object();
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a of the checkpoint file bytes, hex encoded.
std::string checkpoint_hash(const std::filesystem::path& path);

}  // namespace partshot
