#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "partshot/encoder.hpp"
#include "partshot/rng.hpp"

namespace fixtures {

inline partshot::Image random_image(int side, std::uint64_t seed) {
  partshot::Rng rng = partshot::make_rng(seed);
  partshot::Image im(side, side);
  for (auto& v : im.data) v = static_cast<float>(partshot::uniform(rng));
  return im;
}

inline Eigen::VectorXf random_unit(int dim, partshot::Rng& rng) {
  Eigen::VectorXf v(dim);
  for (int i = 0; i < dim; ++i) v[i] = static_cast<float>(partshot::normal(rng));
  return v.normalized();
}

inline partshot::RowMatrix random_unit_rows(int rows, int dim, partshot::Rng& rng) {
  partshot::RowMatrix m(rows, dim);
  for (int r = 0; r < rows; ++r) m.row(r) = random_unit(dim, rng).transpose();
  return m;
}

inline partshot::FeatureMap random_map(int h, int w, int d, partshot::Rng& rng) {
  partshot::FeatureMap m{h, w, d, partshot::FloatBuffer(static_cast<std::size_t>(h) * w * d)};
  for (auto& v : m.data) v = static_cast<float>(partshot::uniform(rng, -1.0, 1.0));
  return m;
}

inline partshot::EncoderSpec tiny_spec() {
  partshot::EncoderSpec s;
  s.input_side = 16;
  s.channels = 8;
  s.groups = 2;
  s.pooled_blocks = 2;
  s.embed_dim = 16;
  return s;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("partshot_" + tag + "_" + std::to_string(partshot::mix64(reinterpret_cast<std::uintptr_t>(this))));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
