#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "partshot/ablation.hpp"
#include "partshot/errors.hpp"

using namespace partshot;

namespace {

EvalReport report_with(double mean, double ci95) {
  EvalReport r;
  r.mean = mean;
  r.ci95 = ci95;
  return r;
}

EncoderAssets toy_assets(double noise, std::uint64_t seed) {
  EncoderAssets a;
  Rng rng = make_rng(seed);
  const int classes = 6, per_class = 20, dim = 6;
  a.novel.pooled = Eigen::MatrixXd::Zero(classes * per_class, dim);
  a.novel.by_class.resize(classes);
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      const int row = c * per_class + i;
      a.novel.pooled(row, c) = 2.0;
      for (int d = 0; d < dim; ++d) a.novel.pooled(row, d) += noise * normal(rng);
      a.novel.by_class[static_cast<std::size_t>(c)].push_back(static_cast<std::size_t>(row));
      a.novel.images.push_back(static_cast<std::size_t>(row));
    }
  }
  std::vector<FeatureMap> maps;
  for (int i = 0; i < 30; ++i) maps.push_back(fixtures::random_map(2, 2, dim, rng));
  a.pool = BasePool::from_maps(std::move(maps));
  return a;
}

}  // namespace

TEST(Compare, DirectionAndOverlapFlags) {
  const auto up = compare("a", report_with(0.40, 0.01), "b", report_with(0.45, 0.01));
  EXPECT_TRUE(up.direction_ok);
  EXPECT_FALSE(up.ci_overlap);
  EXPECT_FALSE(up.failed());
  EXPECT_NEAR(up.delta, 0.05, 1e-12);

  const auto noisy_down = compare("a", report_with(0.45, 0.02), "b", report_with(0.44, 0.02));
  EXPECT_FALSE(noisy_down.direction_ok);
  EXPECT_TRUE(noisy_down.ci_overlap);
  EXPECT_FALSE(noisy_down.failed());

  const auto clear_down = compare("a", report_with(0.50, 0.01), "b", report_with(0.40, 0.01));
  EXPECT_TRUE(clear_down.failed());

  EXPECT_TRUE(compare("a", report_with(0.3, 0.0), "b", report_with(0.3, 0.0)).direction_ok);
}

TEST(Grids, ComponentGridMirrorsAblationRows) {
  const auto g = component_grid(PdnConfig{}, PanConfig{});
  ASSERT_EQ(g.encoders.size(), 3u);
  EXPECT_EQ(g.encoders[0].pdn.selection, SelectionMode::global_pair);
  EXPECT_EQ(g.encoders[1].pdn.selection, SelectionMode::use_all_parts);
  EXPECT_EQ(g.encoders[2].pdn.selection, SelectionMode::select_best);
  std::vector<std::string> names;
  for (const auto& v : g.variants) names.push_back(v.name);
  EXPECT_EQ(names, (std::vector<std::string>{"baseline", "pdn_no_select", "pdn_no_select+pan", "pdn", "pdn+cam",
                                             "pdn+pan"}));
  for (const auto& v : g.variants) {
    if (v.name == "pdn+cam") EXPECT_EQ(v.pan.cam_mode, CamMode::plain);
    if (v.name == "pdn+pan") EXPECT_EQ(v.pan.cam_mode, CamMode::c2am);
    if (v.name == "baseline" || v.name == "pdn") EXPECT_FALSE(v.pan.enabled);
  }
  EXPECT_EQ(g.expected_order.front(), (std::pair<std::string, std::string>{"baseline", "pdn_no_select"}));
}

TEST(Grids, CropsAndAugmentedSweeps) {
  const auto crops = crops_grid(PdnConfig{}, PanConfig{});
  ASSERT_EQ(crops.encoders.size(), 4u);
  EXPECT_EQ(crops.encoders[0].pdn.n_parts, 2);
  EXPECT_EQ(crops.encoders[3].pdn.n_parts, 8);
  EXPECT_EQ(crops.expected_order.size(), 3u);

  const auto na = augmented_grid(PdnConfig{}, PanConfig{});
  ASSERT_EQ(na.variants.size(), 4u);
  EXPECT_EQ(na.variants.front().pan.n_a, 0);
  EXPECT_EQ(na.variants.back().pan.n_a, 1024);
  EXPECT_EQ(na.expected_order,
            (std::vector<std::pair<std::string, std::string>>{{"pan_na0", "pan_na1024"}}));

  EXPECT_EQ(grid_by_name("table2", PdnConfig{}, PanConfig{}).name, "components");
  EXPECT_THROW(grid_by_name("table9", PdnConfig{}, PanConfig{}), Error);
}

TEST(RunAblation, EvaluatesEveryRowAndComparison) {
  AblationGrid g;
  g.name = "toy";
  PanConfig off;
  off.enabled = false;
  PanConfig on;
  on.n_a = 4;
  on.initial_steps = on.refine_steps = 20;
  g.variants = {{"weak", "noisy", off}, {"strong", "clean", off}, {"strong+pan", "clean", on}};
  g.expected_order = {{"weak", "strong"}, {"strong", "strong+pan"}};
  std::map<std::string, EncoderAssets> assets;
  assets.emplace("noisy", toy_assets(3.0, 1));
  assets.emplace("clean", toy_assets(0.3, 2));
  const EvalProtocol protocol{5, 1, 5, 20, 4, false};
  const auto table = run_ablation(g, assets, protocol);
  ASSERT_EQ(table.rows.size(), 3u);
  ASSERT_EQ(table.comparisons.size(), 2u);
  EXPECT_TRUE(table.comparisons[0].direction_ok);
  EXPECT_EQ(table.row("strong").provenance.at("encoder"), "clean");
  EXPECT_THROW(table.row("missing"), Error);

  const auto j = table.to_json();
  EXPECT_EQ(j.at("rows").size(), 3u);
  EXPECT_EQ(j.at("comparisons")[0].at("from"), "weak");
  const std::string csv = table.to_csv();
  EXPECT_NE(csv.find("strong+pan"), std::string::npos);

  assets.erase("noisy");
  EXPECT_THROW(run_ablation(g, assets, protocol), Error);
}
