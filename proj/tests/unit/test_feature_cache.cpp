#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"
#include "partshot/errors.hpp"
#include "partshot/feature_cache.hpp"

using namespace partshot;

namespace {

std::vector<FeatureMap> some_maps(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::vector<FeatureMap> maps;
  for (std::size_t i = 0; i < n; ++i) maps.push_back(fixtures::random_map(4, 4, 8, rng));
  return maps;
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("img" + std::to_string(i));
  return out;
}

}  // namespace

TEST(FeatureCache, RoundTripIsExact) {
  fixtures::TempDir dir("cache");
  const auto stem = dir.path() / "base";
  const auto maps = some_maps(10, 1);
  const auto header = write_feature_cache(stem, maps, ids(10), "ckpt", "cfg");
  EXPECT_EQ(header.values(), 10u * 4 * 4 * 8);
  EXPECT_EQ(std::filesystem::file_size(cache_data_path(stem)), header.values() * sizeof(float));
  const auto back = read_feature_cache(stem, "ckpt");
  EXPECT_EQ(back.header.ids, ids(10));
  EXPECT_EQ(back.header.config_hash, "cfg");
  ASSERT_EQ(back.maps.size(), maps.size());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    EXPECT_EQ(back.maps[i].data, maps[i].data);
    EXPECT_EQ(back.maps[i].height, 4);
    EXPECT_EQ(back.maps[i].depth, 8);
  }
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "base.bin.tmp"));
}

TEST(FeatureCache, CurrentOnlyForSameCheckpointAndIds) {
  fixtures::TempDir dir("cache_current");
  const auto stem = dir.path() / "base";
  EXPECT_FALSE(feature_cache_current(stem, "ckpt", ids(3)));
  write_feature_cache(stem, some_maps(3, 2), ids(3), "ckpt", "cfg");
  EXPECT_TRUE(feature_cache_current(stem, "ckpt", ids(3)));
  EXPECT_FALSE(feature_cache_current(stem, "other", ids(3)));
  EXPECT_FALSE(feature_cache_current(stem, "ckpt", ids(4)));
}

TEST(FeatureCache, RejectsWrongCheckpoint) {
  fixtures::TempDir dir("cache_wrong");
  const auto stem = dir.path() / "base";
  write_feature_cache(stem, some_maps(2, 3), ids(2), "ckpt", "cfg");
  EXPECT_THROW(read_feature_cache(stem, "different"), StoreError);
}

TEST(FeatureCache, DetectsCorruptionAndTruncation) {
  fixtures::TempDir dir("cache_corrupt");
  const auto stem = dir.path() / "base";
  write_feature_cache(stem, some_maps(2, 4), ids(2), "ckpt", "cfg");
  {
    std::fstream f(cache_data_path(stem), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(17);
    f.put('\x7f');
  }
  EXPECT_THROW(read_feature_cache(stem, "ckpt"), StoreError);

  write_feature_cache(stem, some_maps(2, 4), ids(2), "ckpt", "cfg");
  std::filesystem::resize_file(cache_data_path(stem), 100);
  EXPECT_THROW(read_feature_cache(stem, "ckpt"), StoreError);

  write_feature_cache(stem, some_maps(2, 4), ids(2), "ckpt", "cfg");
  std::ofstream(cache_header_path(stem)) << "{ not json";
  EXPECT_THROW(read_cache_header(stem), StoreError);
}

TEST(FeatureCache, RejectsInconsistentInput) {
  fixtures::TempDir dir("cache_bad");
  auto maps = some_maps(2, 5);
  EXPECT_THROW(write_feature_cache(dir.path() / "a", maps, ids(3), "c", "h"), Error);
  maps[1].depth = 4;
  maps[1].data.resize(4 * 4 * 4);
  EXPECT_THROW(write_feature_cache(dir.path() / "b", maps, ids(2), "c", "h"), Error);
}
