#include "partshot/episode.hpp"

#include "partshot/errors.hpp"
#include "partshot/rng.hpp"

namespace partshot {
namespace {

// First k entries of a seeded Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
  idx.resize(k);
  return idx;
}

}  // namespace

std::uint64_t episode_seed(std::uint64_t global_seed, std::size_t index) {
  return derive_seed(global_seed, "episode", {index});
}

Episode sample_episode(const std::vector<std::vector<std::size_t>>& images_by_class, int way, int shot,
                       int query_per_class, std::uint64_t seed) {
  if (way < 1 || shot < 1 || query_per_class < 0) throw Error("invalid episode protocol");
  if (images_by_class.size() < static_cast<std::size_t>(way)) {
    throw DataError("episode needs " + std::to_string(way) + " classes, only " +
                    std::to_string(images_by_class.size()) + " available");
  }
  const auto per_class = static_cast<std::size_t>(shot + query_per_class);
  Rng rng = make_rng(seed);
  Episode ep{way, shot, query_per_class, {}, {}, {}, seed};
  const auto classes = draw_without_replacement(images_by_class.size(), static_cast<std::size_t>(way), rng);
  for (int k = 0; k < way; ++k) {
    const auto& pool = images_by_class[classes[static_cast<std::size_t>(k)]];
    if (pool.size() < per_class) {
      throw DataError("class has " + std::to_string(pool.size()) + " images, episode needs " + std::to_string(per_class));
    }
    ep.classes.push_back(static_cast<int>(classes[static_cast<std::size_t>(k)]));
    const auto picks = draw_without_replacement(pool.size(), per_class, rng);
    for (std::size_t i = 0; i < per_class; ++i) {
      auto& dst = i < static_cast<std::size_t>(shot) ? ep.support : ep.query;
      dst.push_back({pool[picks[i]], k});
    }
  }
  return ep;
}

}  // namespace partshot
