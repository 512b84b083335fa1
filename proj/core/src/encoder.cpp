#include "partshot/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "partshot/errors.hpp"
#include "partshot/rng.hpp"

namespace partshot {
namespace {

using Mat = Eigen::MatrixXf;
using ConstMap = Eigen::Map<const Mat>;
using GradMap = Eigen::Map<Mat>;

constexpr float kNormEps = 1e-5f;
constexpr int kInferenceChunk = 64;

// Tensor layout: block b owns [3b] conv weight (Cout x 9*Cin, column-major,
// column index = tap * Cin + channel), [3b+1] GroupNorm scale, [3b+2] shift.
// The head follows: fc1 weight, BatchNorm scale, shift, fc2 weight, fc2 bias,
// then the BatchNorm running mean and running variance.
std::size_t head_index(const EncoderSpec& spec, int k) { return static_cast<std::size_t>(3 * spec.blocks + k); }

ConstMap as_matrix(const Tensor& t) { return ConstMap(t.data.data(), t.shape[0], t.shape.size() > 1 ? t.shape[1] : 1); }

GradMap as_matrix(FloatBuffer& g, const Tensor& t) {
  return GradMap(g.data(), t.shape[0], t.shape.size() > 1 ? t.shape[1] : 1);
}

struct BlockCache {
  int height = 0;  // block input spatial dims
  int width = 0;
  Mat cols;
  Mat xhat;
  Eigen::VectorXf inv_std;
  Mat act;
  std::vector<int> pool_src;
};

Mat pack_input(std::span<const Image> views, int side) {
  const std::size_t hw = static_cast<std::size_t>(side) * side;
  Mat x(Image::kChannels, static_cast<Eigen::Index>(views.size() * hw));
  for (std::size_t b = 0; b < views.size(); ++b) {
    const Image& img = views[b];
    if (img.height != side || img.width != side) {
      throw ShapeError("encoder expects " + std::to_string(side) + "x" + std::to_string(side) + " views, got " +
                       std::to_string(img.height) + "x" + std::to_string(img.width));
    }
    for (int c = 0; c < Image::kChannels; ++c) {
      const float* plane = img.data.data() + c * hw;
      for (std::size_t p = 0; p < hw; ++p) x(c, static_cast<Eigen::Index>(b * hw + p)) = plane[p];
    }
  }
  return x;
}

Mat im2col(const Mat& x, int batch, int h, int w) {
  const int c = static_cast<int>(x.rows());
  Mat cols(9 * c, x.cols());
  for (int b = 0; b < batch; ++b) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        const Eigen::Index n = (static_cast<Eigen::Index>(b) * h + y) * w + xx;
        float* dst = cols.col(n).data();
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = xx + kx - 1;
            float* tap = dst + (ky * 3 + kx) * c;
            if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
              std::memset(tap, 0, sizeof(float) * c);
            } else {
              std::memcpy(tap, x.col((static_cast<Eigen::Index>(b) * h + sy) * w + sx).data(), sizeof(float) * c);
            }
          }
        }
      }
    }
  }
  return cols;
}

Mat col2im(const Mat& dcols, int channels, int batch, int h, int w) {
  Mat dx = Mat::Zero(channels, dcols.cols());
  for (int b = 0; b < batch; ++b) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        const Eigen::Index n = (static_cast<Eigen::Index>(b) * h + y) * w + xx;
        const float* src = dcols.col(n).data();
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = xx + kx - 1;
            if (sx < 0 || sx >= w) continue;
            dx.col((static_cast<Eigen::Index>(b) * h + sy) * w + sx) +=
                Eigen::Map<const Eigen::VectorXf>(src + (ky * 3 + kx) * channels, channels);
          }
        }
      }
    }
  }
  return dx;
}

class Network {
 public:
  explicit Network(const EncoderParams& params) : params_(params), spec_(params.spec) {}

  // Runs the backbone; fills caches when `caches` is non-null.
  Mat backbone(std::span<const Image> views, std::vector<BlockCache>* caches) const {
    const int batch = static_cast<int>(views.size());
    Mat x = pack_input(views, spec_.input_side);
    int h = spec_.input_side, w = spec_.input_side;
    if (caches) caches->assign(static_cast<std::size_t>(spec_.blocks), {});
    for (int blk = 0; blk < spec_.blocks; ++blk) {
      BlockCache local;
      BlockCache& cache = caches ? (*caches)[static_cast<std::size_t>(blk)] : local;
      cache.height = h;
      cache.width = w;
      cache.cols = im2col(x, batch, h, w);
      const Tensor& weight = params_.tensors[3 * blk];
      Mat z = as_matrix(weight) * cache.cols;
      if (!caches) cache.cols.resize(0, 0);
      group_norm(z, batch, h * w, cache);
      const auto gamma = as_matrix(params_.tensors[3 * blk + 1]);
      const auto beta = as_matrix(params_.tensors[3 * blk + 2]);
      cache.act = ((cache.xhat.array().colwise() * gamma.col(0).array()).colwise() + beta.col(0).array())
                      .cwiseMax(0.0f);
      if (!caches) cache.xhat.resize(0, 0);
      if (blk < spec_.pooled_blocks) {
        x = max_pool(cache.act, batch, h, w, cache.pool_src);
        h /= 2;
        w /= 2;
        if (!caches) {
          cache.act.resize(0, 0);
          cache.pool_src.clear();
        }
      } else {
        x = caches ? cache.act : std::move(cache.act);
      }
    }
    return x;
  }

  // dLoss/dbackbone-output -> parameter gradients.
  void backbone_backward(Mat grad, int batch, std::vector<BlockCache>& caches, Gradients& grads) const {
    for (int blk = spec_.blocks - 1; blk >= 0; --blk) {
      BlockCache& cache = caches[static_cast<std::size_t>(blk)];
      const int h = cache.height, w = cache.width;
      Mat da;
      if (blk < spec_.pooled_blocks) {
        da = Mat::Zero(cache.act.rows(), cache.act.cols());
        const Eigen::Index c = da.rows();
        for (Eigen::Index n = 0; n < grad.cols(); ++n) {
          for (Eigen::Index ch = 0; ch < c; ++ch) da(ch, cache.pool_src[static_cast<std::size_t>(n * c + ch)]) += grad(ch, n);
        }
      } else {
        da = std::move(grad);
      }
      da.array() *= (cache.act.array() > 0.0f).cast<float>();

      const Tensor& gamma_t = params_.tensors[3 * blk + 1];
      auto dgamma = as_matrix(grads.buffers[3 * blk + 1], gamma_t);
      auto dbeta = as_matrix(grads.buffers[3 * blk + 2], params_.tensors[3 * blk + 2]);
      dgamma.col(0) += (da.array() * cache.xhat.array()).rowwise().sum().matrix();
      dbeta.col(0) += da.rowwise().sum();
      Mat dxhat = da.array().colwise() * as_matrix(gamma_t).col(0).array();
      Mat dz = group_norm_backward(dxhat, cache, batch, h * w);

      const Tensor& weight = params_.tensors[3 * blk];
      as_matrix(grads.buffers[3 * blk], weight).noalias() += dz * cache.cols.transpose();
      if (blk > 0) {
        Mat dcols = as_matrix(weight).transpose() * dz;
        grad = col2im(dcols, static_cast<int>(cache.cols.rows() / 9), batch, h, w);
      }
    }
  }

 private:
  void group_norm(Mat& z, int batch, int hw, BlockCache& cache) const {
    const int c = static_cast<int>(z.rows());
    const int groups = spec_.groups;
    const int cg = c / groups;
    cache.inv_std.resize(static_cast<Eigen::Index>(batch) * groups);
    for (int b = 0; b < batch; ++b) {
      for (int g = 0; g < groups; ++g) {
        auto blk = z.block(g * cg, static_cast<Eigen::Index>(b) * hw, cg, hw);
        const double count = static_cast<double>(cg) * hw;
        const double mean = blk.cast<double>().sum() / count;
        const double var = (blk.cast<double>().array() - mean).square().sum() / count;
        const float inv = static_cast<float>(1.0 / std::sqrt(var + kNormEps));
        blk.array() = (blk.array() - static_cast<float>(mean)) * inv;
        cache.inv_std[b * groups + g] = inv;
      }
    }
    cache.xhat = std::move(z);
  }

  Mat group_norm_backward(const Mat& dxhat, const BlockCache& cache, int batch, int hw) const {
    const int c = static_cast<int>(dxhat.rows());
    const int groups = spec_.groups;
    const int cg = c / groups;
    Mat dz(dxhat.rows(), dxhat.cols());
    for (int b = 0; b < batch; ++b) {
      for (int g = 0; g < groups; ++g) {
        const auto d = dxhat.block(g * cg, static_cast<Eigen::Index>(b) * hw, cg, hw);
        const auto xh = cache.xhat.block(g * cg, static_cast<Eigen::Index>(b) * hw, cg, hw);
        const double count = static_cast<double>(cg) * hw;
        const float mean_d = static_cast<float>(d.cast<double>().sum() / count);
        const float mean_dx = static_cast<float>((d.cast<double>().array() * xh.cast<double>().array()).sum() / count);
        dz.block(g * cg, static_cast<Eigen::Index>(b) * hw, cg, hw).array() =
            cache.inv_std[b * groups + g] * (d.array() - mean_d - xh.array() * mean_dx);
      }
    }
    return dz;
  }

  static Mat max_pool(const Mat& a, int batch, int h, int w, std::vector<int>& src) {
    const int oh = h / 2, ow = w / 2;
    const Eigen::Index c = a.rows();
    Mat out(c, static_cast<Eigen::Index>(batch) * oh * ow);
    src.assign(static_cast<std::size_t>(out.size()), 0);
    for (int b = 0; b < batch; ++b) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          const Eigen::Index on = (static_cast<Eigen::Index>(b) * oh + y) * ow + x;
          const int base = (b * h + 2 * y) * w + 2 * x;
          const int cand[4] = {base, base + 1, base + w, base + w + 1};
          for (Eigen::Index ch = 0; ch < c; ++ch) {
            int best = cand[0];
            float best_v = a(ch, best);
            for (int k = 1; k < 4; ++k) {
              if (a(ch, cand[k]) > best_v) {
                best_v = a(ch, cand[k]);
                best = cand[k];
              }
            }
            out(ch, on) = best_v;
            src[static_cast<std::size_t>(on * c + ch)] = best;
          }
        }
      }
    }
    return out;
  }

  const EncoderParams& params_;
  const EncoderSpec& spec_;
};

Mat spatial_mean(const Mat& act, int batch, int hw) {
  Mat gap(act.rows(), batch);
  for (int b = 0; b < batch; ++b) {
    gap.col(b) = act.middleCols(static_cast<Eigen::Index>(b) * hw, hw).rowwise().sum() / static_cast<float>(hw);
  }
  return gap;
}

struct HeadCache {
  Mat gap, xhat, h1, a1, y;
  Eigen::VectorXf mean, var, inv_std, norms;
};

Mat head_forward(const EncoderParams& params, const Mat& gap, NormStats stats, HeadCache* cache) {
  const auto& spec = params.spec;
  const Mat z = as_matrix(params.tensors[head_index(spec, 0)]) * gap;
  Eigen::VectorXf mean, var;
  if (stats == NormStats::batch) {
    mean = z.rowwise().mean();
    var = (z.colwise() - mean).array().square().rowwise().mean();
  } else {
    mean = as_matrix(params.tensors[head_index(spec, 5)]).col(0);
    var = as_matrix(params.tensors[head_index(spec, 6)]).col(0);
  }
  const Eigen::VectorXf inv_std = (var.array() + kNormEps).rsqrt().matrix();
  Mat xhat = (z.colwise() - mean).array().colwise() * inv_std.array();
  Mat h1 = xhat.array().colwise() * as_matrix(params.tensors[head_index(spec, 1)]).col(0).array();
  h1.colwise() += as_matrix(params.tensors[head_index(spec, 2)]).col(0);
  Mat a1 = h1.cwiseMax(0.0f);
  Mat e = as_matrix(params.tensors[head_index(spec, 3)]) * a1;
  e.colwise() += as_matrix(params.tensors[head_index(spec, 4)]).col(0);
  Eigen::VectorXf norms = e.colwise().norm().transpose();
  Mat y = e;
  for (Eigen::Index b = 0; b < y.cols(); ++b) y.col(b) /= std::max(norms[b], 1e-12f);
  if (cache) {
    cache->gap = gap;
    cache->xhat = std::move(xhat);
    cache->mean = std::move(mean);
    cache->var = std::move(var);
    cache->inv_std = inv_std;
    cache->h1 = std::move(h1);
    cache->a1 = std::move(a1);
    cache->y = y;
    cache->norms = std::move(norms);
  }
  return y;
}

RowMatrix to_rows(const Mat& y) { return RowMatrix(y.transpose()); }

}  // namespace

int EncoderSpec::map_side() const { return input_side >> pooled_blocks; }

void EncoderSpec::validate() const {
  if (blocks < 1 || pooled_blocks < 0 || pooled_blocks > blocks) throw ShapeError("invalid block configuration");
  if (channels < 1 || groups < 1 || channels % groups != 0) throw ShapeError("channels must be divisible by groups");
  if (input_side % (1 << pooled_blocks) != 0 || map_side() < 1) {
    throw ShapeError("input side must be divisible by 2^pooled_blocks");
  }
  if (embed_dim < 1) throw ShapeError("embed_dim must be positive");
}

nlohmann::json EncoderSpec::to_json() const {
  return {{"arch", arch},         {"input_side", input_side}, {"channels", channels},
          {"blocks", blocks},     {"pooled_blocks", pooled_blocks}, {"groups", groups},
          {"head_hidden", head_hidden}, {"embed_dim", embed_dim}};
}

EncoderSpec EncoderSpec::from_json(const nlohmann::json& j) {
  EncoderSpec s;
  s.arch = j.at("arch").get<std::string>();
  s.input_side = j.at("input_side").get<int>();
  s.channels = j.at("channels").get<int>();
  s.blocks = j.at("blocks").get<int>();
  s.pooled_blocks = j.at("pooled_blocks").get<int>();
  s.groups = j.at("groups").get<int>();
  s.head_hidden = j.at("head_hidden").get<int>();
  s.embed_dim = j.at("embed_dim").get<int>();
  return s;
}

EncoderParams EncoderParams::initialize(const EncoderSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (spec.arch != "conv4") throw ShapeError("unsupported architecture '" + spec.arch + "'");
  EncoderParams p;
  p.spec = spec;
  Rng rng = make_rng(derive_seed(seed, "encoder-init"));
  auto he = [&](std::string name, int rows, int cols, int fan_in) {
    Tensor t{std::move(name), {rows, cols}, FloatBuffer(static_cast<std::size_t>(rows) * cols)};
    const double std_dev = std::sqrt(2.0 / fan_in);
    for (float& v : t.data) v = static_cast<float>(std_dev * normal(rng));
    p.tensors.push_back(std::move(t));
  };
  auto constant = [&](std::string name, int rows, float value) {
    p.tensors.push_back(Tensor{std::move(name), {rows}, FloatBuffer(static_cast<std::size_t>(rows), value)});
  };
  int in = Image::kChannels;
  for (int b = 0; b < spec.blocks; ++b) {
    const std::string prefix = "backbone.block" + std::to_string(b);
    he(prefix + ".conv.weight", spec.channels, 9 * in, 9 * in);
    constant(prefix + ".norm.scale", spec.channels, 1.0f);
    constant(prefix + ".norm.shift", spec.channels, 0.0f);
    in = spec.channels;
  }
  he("head.fc1.weight", spec.hidden_dim(), spec.channels, spec.channels);
  constant("head.bn.scale", spec.hidden_dim(), 1.0f);
  constant("head.bn.shift", spec.hidden_dim(), 0.0f);
  he("head.fc2.weight", spec.embed_dim, spec.hidden_dim(), spec.hidden_dim());
  constant("head.fc2.bias", spec.embed_dim, 0.0f);
  constant("head.bn.running_mean", spec.hidden_dim(), 0.0f);
  constant("head.bn.running_var", spec.hidden_dim(), 1.0f);
  p.tensors[p.tensors.size() - 2].trainable = false;
  p.tensors.back().trainable = false;
  return p;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.data.size();
  return n;
}

bool EncoderParams::same_layout(const EncoderParams& other) const {
  if (!(spec == other.spec) || tensors.size() != other.tensors.size()) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name != other.tensors[i].name || tensors[i].shape != other.tensors[i].shape ||
        tensors[i].trainable != other.tensors[i].trainable ||
        tensors[i].data.size() != other.tensors[i].data.size()) {
      return false;
    }
  }
  return true;
}

Gradients Gradients::zeros_like(const EncoderParams& params) {
  Gradients g;
  for (const auto& t : params.tensors) g.buffers.emplace_back(t.data.size(), 0.0f);
  return g;
}

void Gradients::set_zero() {
  for (auto& b : buffers) std::fill(b.begin(), b.end(), 0.0f);
}

Eigen::VectorXf global_average_pool(const FeatureMap& map) {
  Eigen::VectorXf out = Eigen::VectorXf::Zero(map.depth);
  for (std::size_t p = 0; p < map.positions(); ++p) {
    out += Eigen::Map<const Eigen::VectorXf>(map.at(p).data(), map.depth);
  }
  return out / static_cast<float>(map.positions());
}

RowMatrix encode(const EncoderParams& params, std::span<const Image> views, NormStats stats) {
  Network net(params);
  const int hw = params.spec.map_side() * params.spec.map_side();
  Mat gap(params.spec.channels, static_cast<Eigen::Index>(views.size()));
  for (std::size_t start = 0; start < views.size(); start += kInferenceChunk) {
    const auto chunk = views.subspan(start, std::min<std::size_t>(kInferenceChunk, views.size() - start));
    const int batch = static_cast<int>(chunk.size());
    gap.middleCols(static_cast<Eigen::Index>(start), batch) = spatial_mean(net.backbone(chunk, nullptr), batch, hw);
  }
  return to_rows(head_forward(params, gap, stats, nullptr));
}

std::vector<FeatureMap> extract_feature_maps(const EncoderParams& params, std::span<const Image> images) {
  std::vector<FeatureMap> maps;
  maps.reserve(images.size());
  Network net(params);
  const int side = params.spec.map_side();
  const std::size_t per_image = static_cast<std::size_t>(side) * side * params.spec.channels;
  for (std::size_t start = 0; start < images.size(); start += kInferenceChunk) {
    const auto chunk = images.subspan(start, std::min<std::size_t>(kInferenceChunk, images.size() - start));
    Mat act = net.backbone(chunk, nullptr);
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      FeatureMap m{side, side, params.spec.channels, {}};
      m.data.assign(act.data() + b * per_image, act.data() + (b + 1) * per_image);
      maps.push_back(std::move(m));
    }
  }
  return maps;
}

FeatureMap extract_feature_map(const EncoderParams& params, const Image& image) {
  return std::move(extract_feature_maps(params, std::span(&image, 1)).front());
}

struct EncoderTape::State {
  const EncoderParams* params = nullptr;
  int batch = 0;
  std::vector<BlockCache> blocks;
  HeadCache head;
};

EncoderTape::EncoderTape() : state_(std::make_unique<State>()) {}
EncoderTape::~EncoderTape() = default;
EncoderTape::EncoderTape(EncoderTape&&) noexcept = default;
EncoderTape& EncoderTape::operator=(EncoderTape&&) noexcept = default;

RowMatrix EncoderTape::forward(const EncoderParams& params, std::span<const Image> views) {
  state_->params = &params;
  state_->batch = static_cast<int>(views.size());
  Network net(params);
  Mat act = net.backbone(views, &state_->blocks);
  const int hw = params.spec.map_side() * params.spec.map_side();
  return to_rows(head_forward(params, spatial_mean(act, state_->batch, hw), NormStats::batch, &state_->head));
}

void EncoderTape::backward(const RowMatrix& grad_embeddings, Gradients& grads) {
  if (!state_->params) throw Error("EncoderTape::backward called before forward");
  const EncoderParams& params = *state_->params;
  const auto& spec = params.spec;
  const HeadCache& hc = state_->head;
  const int batch = state_->batch;
  if (grad_embeddings.rows() != batch || grad_embeddings.cols() != spec.embed_dim) {
    throw ShapeError("embedding gradient shape mismatch");
  }
  if (grads.buffers.size() != params.tensors.size()) throw ShapeError("gradient buffer count mismatch");

  const Mat dy = grad_embeddings.transpose();
  Mat de(dy.rows(), dy.cols());
  for (int b = 0; b < batch; ++b) {
    const float proj = hc.y.col(b).dot(dy.col(b));
    de.col(b) = (dy.col(b) - hc.y.col(b) * proj) / std::max(hc.norms[b], 1e-12f);
  }
  const Tensor& w1 = params.tensors[head_index(spec, 0)];
  const Tensor& scale = params.tensors[head_index(spec, 1)];
  const Tensor& w2 = params.tensors[head_index(spec, 3)];
  as_matrix(grads.buffers[head_index(spec, 3)], w2).noalias() += de * hc.a1.transpose();
  as_matrix(grads.buffers[head_index(spec, 4)], params.tensors[head_index(spec, 4)]).col(0) += de.rowwise().sum();
  Mat dh1 = as_matrix(w2).transpose() * de;
  dh1.array() *= (hc.h1.array() > 0.0f).cast<float>();
  as_matrix(grads.buffers[head_index(spec, 1)], scale).col(0) += (dh1.array() * hc.xhat.array()).rowwise().sum().matrix();
  as_matrix(grads.buffers[head_index(spec, 2)], params.tensors[head_index(spec, 2)]).col(0) += dh1.rowwise().sum();
  const Mat dxhat = dh1.array().colwise() * as_matrix(scale).col(0).array();
  const Eigen::VectorXf sum_d = dxhat.rowwise().sum();
  const Eigen::VectorXf sum_dx = (dxhat.array() * hc.xhat.array()).rowwise().sum();
  const float n = static_cast<float>(batch);
  Mat dz = (n * dxhat).colwise() - sum_d;
  dz -= (hc.xhat.array().colwise() * sum_dx.array()).matrix();
  dz = dz.array().colwise() * (hc.inv_std.array() / n);
  as_matrix(grads.buffers[head_index(spec, 0)], w1).noalias() += dz * hc.gap.transpose();
  const Mat dgap = as_matrix(w1).transpose() * dz;

  const int hw = spec.map_side() * spec.map_side();
  Mat dact(dgap.rows(), static_cast<Eigen::Index>(batch) * hw);
  for (int b = 0; b < batch; ++b) {
    dact.middleCols(static_cast<Eigen::Index>(b) * hw, hw).colwise() = dgap.col(b) / static_cast<float>(hw);
  }
  Network(params).backbone_backward(std::move(dact), batch, state_->blocks, grads);
}

void EncoderTape::update_running_statistics(EncoderParams& params, float rate) const {
  if (!state_->params) throw Error("EncoderTape::update_running_statistics called before forward");
  if (!params.same_layout(*state_->params)) throw ShapeError("running statistics layout mismatch");
  const HeadCache& hc = state_->head;
  const float n = static_cast<float>(state_->batch);
  const Eigen::VectorXf unbiased = n > 1.0f ? Eigen::VectorXf(hc.var * (n / (n - 1.0f))) : hc.var;
  auto running_mean = as_matrix(params.tensors[head_index(params.spec, 5)].data, params.tensors[head_index(params.spec, 5)]);
  auto running_var = as_matrix(params.tensors[head_index(params.spec, 6)].data, params.tensors[head_index(params.spec, 6)]);
  running_mean.col(0) = (1.0f - rate) * running_mean.col(0) + rate * hc.mean;
  running_var.col(0) = (1.0f - rate) * running_var.col(0) + rate * unbiased;
}

}  // namespace partshot
