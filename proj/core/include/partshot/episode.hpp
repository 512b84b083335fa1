#pragma once

#include <cstdint>
#include <vector>

namespace partshot {

struct EpisodeItem {
  std::size_t image = 0;  // index into the caller's image collection
  int label = 0;          // episode-local class id in [0, way)

  bool operator==(const EpisodeItem&) const = default;
};

struct Episode {
  int way = 0;
  int shot = 0;
  int query_per_class = 0;
  std::vector<int> classes;  // which entries of images_by_class were drawn
  std::vector<EpisodeItem> support;
  std::vector<EpisodeItem> query;
  std::uint64_t seed = 0;

  bool operator==(const Episode&) const = default;
};

/// Seed of episode `index`, so any episode can be re-run on its own.
std::uint64_t episode_seed(std::uint64_t global_seed, std::size_t index);

/// Draws `way` classes without replacement, then shot + query_per_class
/// images per class without replacement. Deterministic in `seed`.
Episode sample_episode(const std::vector<std::vector<std::size_t>>& images_by_class, int way, int shot,
                       int query_per_class, std::uint64_t seed);

}  // namespace partshot
