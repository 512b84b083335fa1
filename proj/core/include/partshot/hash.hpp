#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace partshot {

/// 64-bit FNV-1a. Used for provenance tags (config, checkpoint, feature
/// checksums); not a cryptographic hash.
class Fnv1a {
 public:
  void update(std::span<const std::byte> bytes);
  void update(std::string_view text);
  template <class T>
  void update_values(std::span<const T> values) {
    update(std::as_bytes(values));
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t fnv1a(std::string_view text);
std::uint64_t fnv1a(std::span<const std::byte> bytes);
std::uint64_t fnv1a_file(const std::filesystem::path& path);

/// 16 lowercase hex digits.
std::string to_hex(std::uint64_t value);

}  // namespace partshot
