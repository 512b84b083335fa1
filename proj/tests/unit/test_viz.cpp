#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "partshot/errors.hpp"
#include "partshot/viz.hpp"

using namespace partshot;

namespace {

ViewSet coloured_views(int n_parts, int side) {
  ViewSet v;
  v.global_view = Image(side, side, 0.5f);
  for (int p = 0; p < n_parts; ++p) v.parts.emplace_back(side, side, 0.1f * static_cast<float>(p + 1));
  return v;
}

AttentionMap attention_with(const Eigen::MatrixXd& alpha_col, int h, int w) {
  AttentionMap a;
  a.height = h;
  a.width = w;
  a.alpha = Eigen::MatrixXd::Zero(h * w, 2);
  a.alpha.col(1) = alpha_col;
  a.alpha.col(0) = 1.0 - alpha_col.array();
  a.scores = a.alpha;
  return a;
}

}  // namespace

TEST(OrderByDistance, DescendingWithStableTies) {
  Eigen::VectorXd d(5);
  d << 0.1, 0.5, -0.2, 0.5, 0.3;
  EXPECT_EQ(order_by_distance(d), (std::vector<std::size_t>{1, 3, 4, 0, 2}));
}

TEST(CropPanel, TileCountAndSelectedFirst) {
  const int tile = 16, gap = 2;
  for (int n : {1, 6}) {
    const auto views = coloured_views(n, 8);
    Eigen::VectorXd d = Eigen::VectorXd::LinSpaced(n, 0.0, 1.0);
    const std::size_t selected = static_cast<std::size_t>(n - 1);
    const Image panel = crop_panel(views, d, selected, tile, gap);
    EXPECT_EQ(panel.height, tile);
    EXPECT_EQ(panel.width, (n + 1) * tile + n * gap);
    // Second tile is the highest-distance part, outlined in red.
    const int x0 = tile + gap;
    EXPECT_FLOAT_EQ(panel.at(0, 0, x0), 1.0f);
    EXPECT_FLOAT_EQ(panel.at(1, 0, x0), 0.0f);
    EXPECT_NEAR(panel.at(0, tile / 2, x0 + tile / 2), 0.1f * static_cast<float>(n), 1e-6f);
  }
}

TEST(CropPanel, RejectsMismatchedDistances) {
  const auto views = coloured_views(3, 8);
  EXPECT_THROW(crop_panel(views, Eigen::VectorXd::Zero(2), 0), Error);
}

TEST(AttentionOverlay, UniformIsFlatAndOneHotIsSingleCell) {
  const auto flat = attention_overlay_values(attention_with(Eigen::VectorXd::Constant(9, 0.5), 3, 3), 1);
  EXPECT_TRUE(flat.isZero());
  Eigen::VectorXd hot = Eigen::VectorXd::Zero(9);
  hot[5] = 1.0;
  const auto one = attention_overlay_values(attention_with(hot, 3, 3), 1);
  EXPECT_DOUBLE_EQ(one(1, 2), 1.0);
  EXPECT_DOUBLE_EQ(one.sum(), 1.0);
}

TEST(AttentionOverlay, MinMaxNormalisedAlpha) {
  Rng rng = make_rng(1);
  Eigen::VectorXd alpha(12);
  for (int i = 0; i < 12; ++i) alpha[i] = uniform(rng);
  const auto v = attention_overlay_values(attention_with(alpha, 3, 4), 1);
  ASSERT_EQ(v.rows(), 3);
  ASSERT_EQ(v.cols(), 4);
  const double lo = alpha.minCoeff(), hi = alpha.maxCoeff();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(v(i, j), (alpha[i * 4 + j] - lo) / (hi - lo), 1e-12);
}

TEST(HeatColor, ChannelMeanDecodesValue) {
  for (double v = 0.0; v <= 1.0; v += 0.01) {
    const auto c = heat_color(v);
    EXPECT_NEAR(heat_value(c[0], c[1], c[2]), v, 1e-6);
  }
  const auto black = heat_color(0.0), white = heat_color(1.0);
  EXPECT_EQ(black, (std::array<float, 3>{0.0f, 0.0f, 0.0f}));
  EXPECT_EQ(white, (std::array<float, 3>{1.0f, 1.0f, 1.0f}));
}

TEST(Heatmap, PngRoundTripWithinQuantisation) {
  fixtures::TempDir dir("viz");
  Rng rng = make_rng(2);
  Eigen::MatrixXd values(4, 4);
  for (Eigen::Index i = 0; i < values.size(); ++i) values.data()[i] = uniform(rng);
  const int cell = 6;
  const Image hm = heatmap(values, cell);
  EXPECT_EQ(hm.height, 4 * cell);
  write_png(dir.path() / "hm.png", hm);
  const Image back = read_image(dir.path() / "hm.png", hm.height);
  ASSERT_EQ(back.height, hm.height);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const int y = i * cell + cell / 2, x = j * cell + cell / 2;
      const double decoded = heat_value(back.at(0, y, x), back.at(1, y, x), back.at(2, y, x));
      EXPECT_NEAR(decoded, values(i, j), 1.0 / 255.0);
    }
  }
}

TEST(Overlay, BlendsAtOpacity) {
  const Image img(8, 8, 0.2f);
  const Image out = attention_overlay(img, Eigen::MatrixXd::Ones(2, 2), 0.5);
  EXPECT_EQ(out.height, 8);
  EXPECT_NEAR(out.at(0, 3, 3), 0.6f, 1e-6f);
  const Image same = attention_overlay(img, Eigen::MatrixXd::Ones(2, 2), 0.0);
  EXPECT_EQ(same, img);
}

TEST(Hstack, WidthsAndGaps) {
  const Image out = hstack({Image(5, 3, 0.0f), Image(5, 4, 0.0f)}, 2);
  EXPECT_EQ(out.width, 9);
  EXPECT_EQ(out.height, 5);
  EXPECT_FLOAT_EQ(out.at(0, 0, 3), 1.0f);
}
