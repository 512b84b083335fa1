#include "partshot/report.hpp"

#include <sstream>

#include "partshot/errors.hpp"

namespace partshot {

nlohmann::json to_json(const TrainLogRecord& r) {
  return {{"step", r.step},
          {"epoch", r.epoch},
          {"loss", r.loss},
          {"learning_rate", r.learning_rate},
          {"queue_fill", r.queue_fill},
          {"selected_histogram", r.selected_histogram}};
}

JsonLinesWriter::JsonLinesWriter(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::trunc);
  if (!out_) throw StoreError("cannot open log " + path.string());
}

void JsonLinesWriter::write(const nlohmann::json& record) {
  out_ << record.dump() << '\n';
  out_.flush();
}

std::vector<nlohmann::json> read_json_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw StoreError("cannot read " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot write " + tmp.string());
    out << text;
    if (!out) throw StoreError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& value) {
  write_text_atomic(path, value.dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw StoreError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw StoreError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void require_same_provenance(const std::vector<std::pair<std::string, std::string>>& inputs) {
  if (inputs.empty()) return;
  const auto& [first_name, first_hash] = inputs.front();
  for (const auto& [name, hash] : inputs) {
    if (hash != first_hash) {
      throw ConfigError("mixed provenance: " + name + " has config hash " + hash + " but " + first_name + " has " +
                        first_hash);
    }
  }
}

}  // namespace partshot
