#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "partshot/pretrain.hpp"

namespace partshot {

nlohmann::json to_json(const TrainLogRecord& record);

/// Appends one compact JSON object per line, flushed after each record.
class JsonLinesWriter {
 public:
  explicit JsonLinesWriter(const std::filesystem::path& path);
  void write(const nlohmann::json& record);

 private:
  std::ofstream out_;
};

std::vector<nlohmann::json> read_json_lines(const std::filesystem::path& path);

void write_text_atomic(const std::filesystem::path& path, const std::string& text);
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& value);
nlohmann::json read_json(const std::filesystem::path& path);

/// Throws ConfigError naming the first input whose config hash differs from
/// the others. Entries are (artifact description, config hash).
void require_same_provenance(const std::vector<std::pair<std::string, std::string>>& inputs);

}  // namespace partshot
