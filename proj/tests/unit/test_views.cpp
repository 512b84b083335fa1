#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "partshot/errors.hpp"
#include "partshot/views.hpp"

using namespace partshot;

TEST(Views, SixPartsWithinScaleRanges) {
  const Image img = fixtures::random_image(64, 1);
  ViewConfig cfg;
  const ViewSet v = generate_views(img, cfg, 42);
  ASSERT_EQ(v.parts.size(), 6u);
  ASSERT_EQ(v.part_boxes.size(), 6u);
  for (const auto& b : v.part_boxes) {
    EXPECT_GE(b.area(), 0.05 - 1e-12);
    EXPECT_LE(b.area(), 0.14 + 1e-12);
  }
  EXPECT_GE(v.global_box.area(), 0.14 - 1e-12);
  EXPECT_LE(v.global_box.area(), 1.0 + 1e-12);
  EXPECT_EQ(v.global_view.height, 32);
  EXPECT_EQ(v.parts[0].width, 32);
}

TEST(Views, UnitScaleWithoutAugmentationIsResizedImage) {
  const Image img = fixtures::random_image(32, 2);
  ViewConfig cfg;
  cfg.n_parts = 1;
  cfg.part_scale = {1.0, 1.0};
  cfg.aug = AugmentConfig::none();
  const ViewSet v = generate_views(img, cfg, 0);
  ASSERT_EQ(v.parts.size(), 1u);
  EXPECT_EQ(v.part_boxes[0], CropBox{});
  EXPECT_EQ(v.parts[0], img);
}

TEST(Views, SameSeedSameViewsBitForBit) {
  const Image img = fixtures::random_image(48, 3);
  ViewConfig cfg;
  const ViewSet a = generate_views(img, cfg, 7);
  const ViewSet b = generate_views(img, cfg, 7);
  EXPECT_EQ(a.part_boxes, b.part_boxes);
  EXPECT_EQ(a.global_box, b.global_box);
  EXPECT_EQ(a.global_view, b.global_view);
  EXPECT_EQ(a.parts, b.parts);
  const ViewSet c = generate_views(img, cfg, 8);
  EXPECT_NE(a.part_boxes, c.part_boxes);
}

TEST(Views, ThousandCallsKeepPartAreaInRangeProperty) {
  const Image img = fixtures::random_image(64, 4);
  ViewConfig cfg;
  cfg.aug = AugmentConfig::none();
  cfg.output_side = 8;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const ViewSet v = generate_views(img, cfg, seed);
    for (const auto& b : v.part_boxes) {
      ASSERT_GE(b.area(), cfg.part_scale.lo - 1e-12);
      ASSERT_LE(b.area(), cfg.part_scale.hi + 1e-12);
      ASSERT_GE(b.x, 0.0);
      ASSERT_GE(b.y, 0.0);
      ASSERT_LE(b.x + b.w, 1.0 + 1e-12);
      ASSERT_LE(b.y + b.h, 1.0 + 1e-12);
      const double ratio = b.w / b.h;
      ASSERT_GE(ratio, 0.75 - 1e-9);
      ASSERT_LE(ratio, 4.0 / 3.0 + 1e-9);
    }
  }
}

TEST(Views, DegenerateCropFallsBackToCenterAtMinimumScale) {
  Rng rng = make_rng(5);
  // On a 4x4 source an area fraction of 1e-3 is below one pixel every time.
  const CropBox b = sample_crop({1e-3, 2e-3}, 4, 4, rng);
  EXPECT_NEAR(b.w, 0.25, 1e-12);
  EXPECT_NEAR(b.h, 0.25, 1e-12);
  EXPECT_NEAR(b.x, 0.375, 1e-12);
  EXPECT_NEAR(b.y, 0.375, 1e-12);
}

TEST(Views, InvalidScaleRejected) {
  Rng rng = make_rng(6);
  EXPECT_THROW(sample_crop({0.0, 0.5}, 32, 32, rng), Error);
  EXPECT_THROW(sample_crop({0.5, 1.5}, 32, 32, rng), Error);
  EXPECT_THROW(sample_crop({0.6, 0.5}, 32, 32, rng), Error);
  ViewConfig cfg;
  cfg.n_parts = 0;
  EXPECT_THROW(generate_views(fixtures::random_image(16, 1), cfg, 0), Error);
}

TEST(Views, CropResizeOfConstantImageIsConstant) {
  Image img(20, 30, 0.25f);
  const Image out = crop_resize(img, {0.1, 0.2, 0.5, 0.6}, 12);
  for (float v : out.data) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(Views, BlurPreservesConstantAndSmoothsNoise) {
  Image flat(16, 16, 0.5f);
  gaussian_blur(flat, 1.5);
  for (float v : flat.data) EXPECT_NEAR(v, 0.5f, 1e-6);
  Image noise = fixtures::random_image(16, 9);
  const Image before = noise;
  gaussian_blur(noise, 1.5);
  auto variance = [](const Image& im) {
    double m = 0.0, s = 0.0;
    for (float v : im.data) m += v;
    m /= static_cast<double>(im.data.size());
    for (float v : im.data) s += (v - m) * (v - m);
    return s / static_cast<double>(im.data.size());
  };
  EXPECT_LT(variance(noise), 0.5 * variance(before));
}

TEST(Views, AugmentKeepsValuesInUnitRange) {
  Image img = fixtures::random_image(16, 10);
  Rng rng = make_rng(11);
  for (int i = 0; i < 50; ++i) {
    Image copy = img;
    augment(copy, AugmentConfig{}, rng);
    for (float v : copy.data) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
  }
  Image same = img;
  augment(same, AugmentConfig::none(), rng);
  EXPECT_EQ(same, img);
}
