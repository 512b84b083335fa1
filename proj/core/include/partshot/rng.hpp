#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace partshot {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

/// Seed for a named substream, e.g. derive_seed(global, "views", {image, epoch}).
/// Every random draw in the library flows from a seed obtained this way.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stream,
                          std::initializer_list<std::uint64_t> indices = {});

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

/// Uniform double in [lo, hi) built from raw engine output so that results do
/// not depend on the standard library's distribution implementation.
double uniform(Rng& rng, double lo = 0.0, double hi = 1.0);

/// Standard normal via Box-Muller on uniform().
double normal(Rng& rng);

/// Uniform integer in [0, n).
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

}  // namespace partshot
