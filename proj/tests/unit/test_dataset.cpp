#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "partshot/dataset.hpp"
#include "partshot/errors.hpp"
#include "partshot/synthetic.hpp"

using namespace partshot;

namespace {

std::vector<std::string> names(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("c" + std::to_string(1000 + i));
  return out;
}

std::map<Split, int> sizes(const SplitManifest& m) {
  std::map<Split, int> out;
  for (const auto& [_, s] : m.class_split) ++out[s];
  return out;
}

}  // namespace

TEST(Splits, HundredClassesStandardCounts) {
  const auto m = assign_splits(names(100), SplitSpec::from_counts(64, 16, 20), 0);
  auto s = sizes(m);
  EXPECT_EQ(s[Split::base], 64);
  EXPECT_EQ(s[Split::val], 16);
  EXPECT_EQ(s[Split::novel], 20);
  EXPECT_EQ(s[Split::unused], 0);
}

TEST(Splits, ThreeClassesOneEach) {
  const auto m = assign_splits({"a", "b", "c"}, SplitSpec::from_counts(1, 1, 1), 5);
  std::set<Split> used;
  for (const auto& [_, s] : m.class_split) used.insert(s);
  EXPECT_EQ(used, (std::set<Split>{Split::base, Split::val, Split::novel}));
}

TEST(Splits, DeterministicAndOrderIndependent) {
  auto n = names(30);
  const auto a = assign_splits(n, SplitSpec::from_counts(10, 5, 5), 9);
  std::reverse(n.begin(), n.end());
  const auto b = assign_splits(n, SplitSpec::from_counts(10, 5, 5), 9);
  EXPECT_EQ(a, b);
  const auto c = assign_splits(n, SplitSpec::from_counts(10, 5, 5), 10);
  EXPECT_FALSE(a == c);
}

TEST(Splits, DisjointForRandomSpecsProperty) {
  Rng rng = make_rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int total = 3 + static_cast<int>(uniform_index(rng, 60));
    const int nb = static_cast<int>(uniform_index(rng, total + 1));
    const int nv = static_cast<int>(uniform_index(rng, total - nb + 1));
    const int nn = static_cast<int>(uniform_index(rng, total - nb - nv + 1));
    const auto m = assign_splits(names(total), SplitSpec::from_counts(nb, nv, nn), rng());
    ASSERT_EQ(m.class_split.size(), static_cast<std::size_t>(total));  // each class exactly once
    auto s = sizes(m);
    EXPECT_EQ(s[Split::base], nb);
    EXPECT_EQ(s[Split::val], nv);
    EXPECT_EQ(s[Split::novel], nn);
    EXPECT_EQ(s[Split::unused], total - nb - nv - nn);
  }
}

TEST(Splits, CountsExceedingClassesRejected) {
  EXPECT_THROW(assign_splits(names(5), SplitSpec::from_counts(3, 2, 1), 0), DataError);
}

TEST(Splits, ExplicitListsValidated) {
  SplitSpec spec;
  spec.base_classes = {"a"};
  spec.novel_classes = {"b"};
  const auto m = assign_splits({"a", "b", "c"}, spec, 0);
  EXPECT_EQ(m.class_split.at("a"), Split::base);
  EXPECT_EQ(m.class_split.at("b"), Split::novel);
  EXPECT_EQ(m.class_split.at("c"), Split::unused);
  spec.novel_classes = {"a"};
  EXPECT_THROW(assign_splits({"a", "b"}, spec, 0), DataError);
  spec.novel_classes = {"zzz"};
  EXPECT_THROW(assign_splits({"a", "b"}, spec, 0), DataError);
}

TEST(Splits, ManifestJsonRoundTrip) {
  const auto m = assign_splits(names(12), SplitSpec::from_counts(4, 4, 4), 3);
  EXPECT_EQ(SplitManifest::from_json(m.to_json()), m);
}

TEST(Dataset, LabelLockForbidsReads) {
  std::vector<Image> images(4, Image(8, 8));
  const auto m = assign_splits({"a", "b"}, SplitSpec::from_counts(1, 0, 1), 0);
  DatasetHandle d(images, {0, 0, 1, 1}, {"a", "b"}, m);
  EXPECT_NO_THROW(d.label(0));
  {
    auto lock = d.lock_labels();
    EXPECT_TRUE(d.labels_locked());
    EXPECT_THROW(d.label(0), LabelAccessError);
    EXPECT_THROW(d.images_by_class(Split::base), LabelAccessError);
    EXPECT_EQ(d.indices(Split::base).size() + d.indices(Split::novel).size(), 4u);
  }
  EXPECT_FALSE(d.labels_locked());
  EXPECT_EQ(d.label(3), 1);
}

TEST(Dataset, LoadsFolderWritesManifestAndIsDeterministic) {
  fixtures::TempDir dir("dataset");
  SyntheticSpec spec;
  spec.classes = 5;
  spec.images_per_class = 3;
  spec.side = 24;
  write_synthetic_dataset(dir.path() / "data", spec);

  LoadOptions opts;
  opts.image_side = 16;
  opts.split_seed = 4;
  const auto a = load_dataset(dir.path() / "data", SplitSpec::from_counts(2, 1, 1), opts);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "data" / "split_manifest.json"));
  EXPECT_EQ(a.size(), 12u);  // the unused class is not decoded
  EXPECT_EQ(a.image(0).height, 16);
  const auto b = load_dataset(dir.path() / "data", SplitSpec::from_counts(2, 1, 1), opts);
  EXPECT_EQ(a.manifest(), b.manifest());
  EXPECT_EQ(a.indices(Split::base), b.indices(Split::base));
  EXPECT_EQ(a.images_by_class(Split::base).size(), 2u);
}

TEST(Dataset, UndecodableImagesSkippedOrFatal) {
  fixtures::TempDir dir("undecodable");
  SyntheticSpec spec;
  spec.classes = 2;
  spec.images_per_class = 2;
  spec.side = 16;
  write_synthetic_dataset(dir.path(), spec);
  std::ofstream(dir.path() / "class_000" / "broken.png") << "not a png";

  LoadOptions opts;
  opts.manifest_path = std::filesystem::path();
  const auto d = load_dataset(dir.path(), SplitSpec::from_counts(1, 0, 1), opts);
  EXPECT_EQ(d.size(), 4u);
  opts.skip_undecodable = false;
  EXPECT_THROW(load_dataset(dir.path(), SplitSpec::from_counts(1, 0, 1), opts), DataError);
}

TEST(Dataset, MissingPathRejected) {
  EXPECT_THROW(load_dataset("/nonexistent/partshot", SplitSpec::from_counts(1, 1, 1)), DataError);
}

TEST(Synthetic, RenderIsDeterministicAndClassesDiffer) {
  SyntheticSpec spec;
  spec.side = 32;
  EXPECT_EQ(render_synthetic(spec, 3, 1), render_synthetic(spec, 3, 1));
  EXPECT_FALSE(render_synthetic(spec, 3, 1) == render_synthetic(spec, 3, 2));
  EXPECT_FALSE(render_synthetic(spec, 3, 1) == render_synthetic(spec, 4, 1));
}
