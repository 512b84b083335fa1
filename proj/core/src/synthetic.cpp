#include "partshot/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "partshot/rng.hpp"

namespace partshot {
namespace {

using Rgb = std::array<float, 3>;

constexpr std::array<Rgb, 8> kPalette{{
    {0.90f, 0.15f, 0.15f},
    {0.15f, 0.75f, 0.20f},
    {0.15f, 0.30f, 0.90f},
    {0.95f, 0.85f, 0.10f},
    {0.85f, 0.20f, 0.85f},
    {0.10f, 0.85f, 0.85f},
    {0.98f, 0.55f, 0.10f},
    {0.95f, 0.95f, 0.95f},
}};

constexpr int kShapes = 6;

// Signed membership test of a point (u, v) in [-1, 1]^2 for each shape.
bool inside(int shape, double u, double v) {
  const double r = std::hypot(u, v);
  switch (shape) {
    case 0: return r <= 1.0;                                              // disc
    case 1: return std::abs(u) <= 0.85 && std::abs(v) <= 0.85;            // square
    case 2: return v <= 0.9 && v >= -0.9 && std::abs(u) <= (v + 0.9) / 1.8;  // triangle
    case 3: return (std::abs(u) <= 0.3 && std::abs(v) <= 1.0) || (std::abs(v) <= 0.3 && std::abs(u) <= 1.0);
    case 4: return r <= 1.0 && r >= 0.55;                                 // ring
    default: return std::abs(u) + std::abs(v) <= 1.0;                     // diamond
  }
}

struct ClassStyle {
  int shape;
  int color_a;
  int color_b;
  int orientation;  // stripe angle index, multiples of 45 degrees
};

ClassStyle class_style(int class_id) {
  // (id mod 6, id mod 56) is injective for ids below lcm(6, 56) = 168, so
  // classes never collide while shapes and colors are shared between them.
  const int pair = class_id % 56;
  const int color_a = pair / 7;
  const int color_b = (color_a + 1 + pair % 7) % 8;
  return {class_id % kShapes, color_a, color_b, (class_id / 7) % 4};
}

}  // namespace

Image render_synthetic(const SyntheticSpec& spec, int class_id, int instance) {
  Rng rng = make_rng(derive_seed(spec.seed, "synthetic",
                                 {static_cast<std::uint64_t>(class_id), static_cast<std::uint64_t>(instance)}));
  const int side = spec.side;
  Image img(side, side);

  // Background: two greys blended by a smooth random field.
  Rgb bg0, bg1;
  bg0.fill(static_cast<float>(uniform(rng, 0.3, 0.5)));
  bg1.fill(static_cast<float>(uniform(rng, 0.3, 0.5)));
  std::array<double, 9> wave{};
  for (double& w : wave) w = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double u = static_cast<double>(x) / side, v = static_cast<double>(y) / side;
      double t = 0.5 + 0.25 * std::sin(6.0 * u + wave[0]) * std::cos(5.0 * v + wave[1]) +
                 0.15 * std::sin(11.0 * (u + v) + wave[2]) + 0.1 * std::cos(17.0 * u - 13.0 * v + wave[3]);
      t += 0.05 * (uniform(rng) - 0.5);
      t = std::clamp(t, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(bg0[c] * (1 - t) + bg1[c] * t);
    }
  }

  auto stamp = [&](int shape, double cx, double cy, double radius, double rotation, auto&& color_at) {
    const int x0 = std::max(0, static_cast<int>(cx - radius * 1.5));
    const int x1 = std::min(side - 1, static_cast<int>(cx + radius * 1.5));
    const int y0 = std::max(0, static_cast<int>(cy - radius * 1.5));
    const int y1 = std::min(side - 1, static_cast<int>(cy + radius * 1.5));
    const double cr = std::cos(rotation), sr = std::sin(rotation);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = (x + 0.5 - cx) / radius, dy = (y + 0.5 - cy) / radius;
        const double u = cr * dx + sr * dy, v = -sr * dx + cr * dy;
        if (!inside(shape, u, v)) continue;
        const Rgb col = color_at(x - cx, y - cy);
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = col[c];
      }
    }
  };

  for (int d = 0; d < spec.distractors; ++d) {
    const int shape = static_cast<int>(uniform_index(rng, kShapes));
    const Rgb col = kPalette[uniform_index(rng, kPalette.size())];
    const double radius = side * uniform(rng, 0.04, 0.08);
    const double cx = uniform(rng, radius, side - radius), cy = uniform(rng, radius, side - radius);
    const double rot = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    stamp(shape, cx, cy, radius, rot, [&](double, double) { return col; });
  }

  const ClassStyle style = class_style(class_id);
  const double radius = 0.5 * side * uniform(rng, spec.object_scale_lo, spec.object_scale_hi);
  const double cx = uniform(rng, radius * 1.1, side - radius * 1.1);
  const double cy = uniform(rng, radius * 1.1, side - radius * 1.1);
  const double angle = style.orientation * std::numbers::pi / 4.0 + uniform(rng, -0.15, 0.15);
  const double period = std::max(3.0, radius * 0.6);
  const double ca = std::cos(angle), sa = std::sin(angle);
  const Rgb a = kPalette[style.color_a], b = kPalette[style.color_b];
  const double rot = uniform(rng, -0.3, 0.3);
  stamp(style.shape, cx, cy, radius, rot, [&](double dx, double dy) {
    const double phase = (ca * dx + sa * dy) / period;
    return (static_cast<long>(std::floor(phase)) & 1) ? a : b;
  });
  return img;
}

void write_synthetic_dataset(const std::filesystem::path& root, const SyntheticSpec& spec) {
  namespace fs = std::filesystem;
  for (int c = 0; c < spec.classes; ++c) {
    char dir_name[32];
    std::snprintf(dir_name, sizeof dir_name, "class_%03d", c);
    const fs::path dir = root / dir_name;
    fs::create_directories(dir);
    for (int i = 0; i < spec.images_per_class; ++i) {
      char file_name[32];
      std::snprintf(file_name, sizeof file_name, "img_%04d.png", i);
      const fs::path file = dir / file_name;
      if (fs::exists(file)) continue;
      write_png(file, render_synthetic(spec, c, i));
    }
  }
}

}  // namespace partshot
