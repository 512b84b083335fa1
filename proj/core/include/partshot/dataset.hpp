#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "partshot/image.hpp"

namespace partshot {

enum class Split { base, val, novel, unused };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

/// Either class counts (base, val, novel) assigned by a seeded shuffle, or
/// explicit class-name lists.
struct SplitSpec {
  std::optional<std::array<int, 3>> counts;
  std::vector<std::string> base_classes;
  std::vector<std::string> val_classes;
  std::vector<std::string> novel_classes;

  static SplitSpec from_counts(int base, int val, int novel) {
    SplitSpec s;
    s.counts = std::array<int, 3>{base, val, novel};
    return s;
  }
};

struct SplitManifest {
  std::uint64_t seed = 0;
  SplitSpec spec;
  std::map<std::string, Split> class_split;

  nlohmann::json to_json() const;
  static SplitManifest from_json(const nlohmann::json& j);
  bool operator==(const SplitManifest& other) const;
};

/// Pure split assignment over a set of class names. Classes are sorted by
/// name, shuffled with `seed`, then dealt into base/val/novel in that order.
/// Classes left over are marked unused.
SplitManifest assign_splits(std::vector<std::string> class_names, const SplitSpec& spec,
                            std::uint64_t seed);

class DatasetHandle;

/// While alive, every label read on the dataset throws LabelAccessError.
class LabelLock {
 public:
  explicit LabelLock(std::shared_ptr<std::atomic<int>> counter);
  LabelLock(LabelLock&& other) noexcept;
  LabelLock& operator=(LabelLock&&) = delete;
  LabelLock(const LabelLock&) = delete;
  ~LabelLock();

 private:
  std::shared_ptr<std::atomic<int>> counter_;
};

class DatasetHandle {
 public:
  DatasetHandle(std::vector<Image> images, std::vector<int> labels,
                std::vector<std::string> class_names, SplitManifest manifest,
                std::vector<std::string> sources = {});

  std::size_t size() const { return images_.size(); }
  const Image& image(std::size_t i) const { return images_.at(i); }
  const std::string& source(std::size_t i) const { return sources_.at(i); }
  const SplitManifest& manifest() const { return manifest_; }

  std::size_t class_count() const { return class_names_.size(); }
  const std::string& class_name(int id) const { return class_names_.at(static_cast<std::size_t>(id)); }
  Split class_split(int id) const;

  /// Image indices whose class belongs to `split`; does not reveal labels.
  const std::vector<std::size_t>& indices(Split split) const;

  /// Class id of image i. Throws LabelAccessError while a LabelLock is held.
  int label(std::size_t i) const;

  /// Images grouped by class for one split (reads labels).
  std::vector<std::vector<std::size_t>> images_by_class(Split split) const;

  LabelLock lock_labels() const { return LabelLock(lock_); }
  bool labels_locked() const { return lock_->load() > 0; }

 private:
  std::vector<Image> images_;
  std::vector<int> labels_;
  std::vector<std::string> class_names_;
  std::vector<std::string> sources_;
  SplitManifest manifest_;
  std::array<std::vector<std::size_t>, 4> split_indices_;
  std::shared_ptr<std::atomic<int>> lock_ = std::make_shared<std::atomic<int>>(0);
};

struct LoadOptions {
  int image_side = 64;
  std::uint64_t split_seed = 0;
  bool skip_undecodable = true;
  /// Defaults to <root>/split_manifest.json; empty path disables writing.
  std::optional<std::filesystem::path> manifest_path;
};

/// Reads a directory-per-class image folder. Images of classes that end up
/// unused by the split are not decoded.
DatasetHandle load_dataset(const std::filesystem::path& root, const SplitSpec& spec,
                           const LoadOptions& options = {});

}  // namespace partshot
