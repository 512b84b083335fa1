#include "partshot/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "partshot/errors.hpp"
#include "partshot/rng.hpp"

namespace partshot {

std::string to_string(Split split) {
  switch (split) {
    case Split::base: return "base";
    case Split::val: return "val";
    case Split::novel: return "novel";
    case Split::unused: return "unused";
  }
  return "unused";
}

Split split_from_string(const std::string& name) {
  if (name == "base") return Split::base;
  if (name == "val") return Split::val;
  if (name == "novel") return Split::novel;
  if (name == "unused") return Split::unused;
  throw DataError("unknown split name '" + name + "'");
}

nlohmann::json SplitManifest::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  if (spec.counts) {
    j["spec"] = {{"base", (*spec.counts)[0]}, {"val", (*spec.counts)[1]}, {"novel", (*spec.counts)[2]}};
  } else {
    j["spec"] = {{"base", spec.base_classes}, {"val", spec.val_classes}, {"novel", spec.novel_classes}};
  }
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [name, split] : class_split) classes[name] = to_string(split);
  j["classes"] = classes;
  return j;
}

SplitManifest SplitManifest::from_json(const nlohmann::json& j) {
  SplitManifest m;
  m.seed = j.at("seed").get<std::uint64_t>();
  const auto& s = j.at("spec");
  if (s.at("base").is_number()) {
    m.spec.counts = std::array<int, 3>{s.at("base").get<int>(), s.at("val").get<int>(), s.at("novel").get<int>()};
  } else {
    m.spec.base_classes = s.at("base").get<std::vector<std::string>>();
    m.spec.val_classes = s.at("val").get<std::vector<std::string>>();
    m.spec.novel_classes = s.at("novel").get<std::vector<std::string>>();
  }
  for (const auto& [name, split] : j.at("classes").items()) {
    m.class_split[name] = split_from_string(split.get<std::string>());
  }
  return m;
}

bool SplitManifest::operator==(const SplitManifest& other) const {
  return to_json() == other.to_json();
}

SplitManifest assign_splits(std::vector<std::string> class_names, const SplitSpec& spec,
                            std::uint64_t seed) {
  std::sort(class_names.begin(), class_names.end());
  if (std::adjacent_find(class_names.begin(), class_names.end()) != class_names.end()) {
    throw DataError("duplicate class names");
  }
  SplitManifest m;
  m.seed = seed;
  m.spec = spec;
  for (const auto& name : class_names) m.class_split[name] = Split::unused;

  if (spec.counts) {
    const auto [nb, nv, nn] = *spec.counts;
    if (nb < 0 || nv < 0 || nn < 0) throw DataError("split counts must be non-negative");
    if (static_cast<std::size_t>(nb + nv + nn) > class_names.size()) {
      throw DataError("split counts (" + std::to_string(nb) + "," + std::to_string(nv) + "," +
                      std::to_string(nn) + ") exceed the " + std::to_string(class_names.size()) +
                      " available classes");
    }
    Rng rng = make_rng(derive_seed(seed, "splits"));
    for (std::size_t i = class_names.size(); i > 1; --i) {
      std::swap(class_names[i - 1], class_names[uniform_index(rng, i)]);
    }
    std::size_t pos = 0;
    for (int i = 0; i < nb; ++i) m.class_split[class_names[pos++]] = Split::base;
    for (int i = 0; i < nv; ++i) m.class_split[class_names[pos++]] = Split::val;
    for (int i = 0; i < nn; ++i) m.class_split[class_names[pos++]] = Split::novel;
    return m;
  }

  std::set<std::string> seen;
  auto place = [&](const std::vector<std::string>& names, Split split) {
    for (const auto& name : names) {
      if (!m.class_split.contains(name)) throw DataError("unknown class '" + name + "' in split list");
      if (!seen.insert(name).second) throw DataError("class '" + name + "' listed in two splits");
      m.class_split[name] = split;
    }
  };
  place(spec.base_classes, Split::base);
  place(spec.val_classes, Split::val);
  place(spec.novel_classes, Split::novel);
  return m;
}

LabelLock::LabelLock(std::shared_ptr<std::atomic<int>> counter) : counter_(std::move(counter)) {
  counter_->fetch_add(1);
}

LabelLock::LabelLock(LabelLock&& other) noexcept : counter_(std::move(other.counter_)) {}

LabelLock::~LabelLock() {
  if (counter_) counter_->fetch_sub(1);
}

DatasetHandle::DatasetHandle(std::vector<Image> images, std::vector<int> labels,
                             std::vector<std::string> class_names, SplitManifest manifest,
                             std::vector<std::string> sources)
    : images_(std::move(images)),
      labels_(std::move(labels)),
      class_names_(std::move(class_names)),
      sources_(std::move(sources)),
      manifest_(std::move(manifest)) {
  if (images_.size() != labels_.size()) throw DataError("image/label count mismatch");
  if (sources_.empty()) sources_.resize(images_.size());
  if (sources_.size() != images_.size()) throw DataError("image/source count mismatch");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || static_cast<std::size_t>(labels_[i]) >= class_names_.size()) {
      throw DataError("label out of range");
    }
    split_indices_[static_cast<std::size_t>(class_split(labels_[i]))].push_back(i);
  }
}

Split DatasetHandle::class_split(int id) const {
  auto it = manifest_.class_split.find(class_name(id));
  return it == manifest_.class_split.end() ? Split::unused : it->second;
}

const std::vector<std::size_t>& DatasetHandle::indices(Split split) const {
  return split_indices_[static_cast<std::size_t>(split)];
}

int DatasetHandle::label(std::size_t i) const {
  if (labels_locked()) {
    throw LabelAccessError("label read during unsupervised pretraining (image " + std::to_string(i) + ")");
  }
  return labels_.at(i);
}

std::vector<std::vector<std::size_t>> DatasetHandle::images_by_class(Split split) const {
  std::map<int, std::vector<std::size_t>> grouped;
  for (std::size_t i : indices(split)) grouped[label(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(grouped.size());
  for (auto& [_, v] : grouped) out.push_back(std::move(v));
  return out;
}

DatasetHandle load_dataset(const std::filesystem::path& root, const SplitSpec& spec,
                           const LoadOptions& options) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw DataError("dataset path '" + root.string() + "' is not a directory");

  std::vector<std::string> class_names;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_names.push_back(entry.path().filename().string());
  }
  std::sort(class_names.begin(), class_names.end());
  if (class_names.empty()) throw DataError("no class directories under '" + root.string() + "'");

  SplitManifest manifest = assign_splits(class_names, spec, options.split_seed);

  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<std::string> sources;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    if (manifest.class_split.at(class_names[c]) == Split::unused) continue;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root / class_names[c])) {
      if (!entry.is_regular_file()) continue;
      auto ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      Image img = read_image(file, options.image_side);
      if (img.empty()) {
        if (!options.skip_undecodable) throw DataError("cannot decode image " + file.string());
        spdlog::warn("skipping undecodable image {}", file.string());
        continue;
      }
      images.push_back(std::move(img));
      labels.push_back(static_cast<int>(c));
      sources.push_back(fs::relative(file, root).generic_string());
    }
  }

  const fs::path manifest_path = options.manifest_path.value_or(root / "split_manifest.json");
  if (!manifest_path.empty()) {
    std::ofstream out(manifest_path);
    if (!out) throw StoreError("cannot write split manifest " + manifest_path.string());
    out << manifest.to_json().dump(2) << "\n";
  }
  return DatasetHandle(std::move(images), std::move(labels), std::move(class_names), std::move(manifest),
                       std::move(sources));
}

}  // namespace partshot
