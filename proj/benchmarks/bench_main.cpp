#include <benchmark/benchmark.h>

#include "partshot/attention.hpp"
#include "partshot/contrastive.hpp"
#include "partshot/encoder.hpp"
#include "partshot/rng.hpp"

using namespace partshot;

namespace {

std::vector<Image> random_views(int count, int side, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::vector<Image> views;
  for (int i = 0; i < count; ++i) {
    Image im(side, side);
    for (auto& v : im.data) v = static_cast<float>(uniform(rng, 0.0, 1.0));
    views.push_back(std::move(im));
  }
  return views;
}

EncoderSpec spec_with_channels(int channels) {
  EncoderSpec s;
  s.channels = channels;
  return s;
}

void BM_EncoderForward(benchmark::State& state) {
  const auto params = EncoderParams::initialize(spec_with_channels(static_cast<int>(state.range(1))), 1);
  const auto views = random_views(static_cast<int>(state.range(0)), 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(encode(params, views));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncoderForward)->Args({64, 32})->Args({64, 64})->Unit(benchmark::kMillisecond);

void BM_EncoderForwardBackward(benchmark::State& state) {
  const auto params = EncoderParams::initialize(spec_with_channels(static_cast<int>(state.range(1))), 1);
  const auto views = random_views(static_cast<int>(state.range(0)), 32, 2);
  auto grads = Gradients::zeros_like(params);
  EncoderTape tape;
  for (auto _ : state) {
    const RowMatrix out = tape.forward(params, views);
    tape.backward(RowMatrix::Constant(out.rows(), out.cols(), 1e-3f), grads);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncoderForwardBackward)->Args({64, 32})->Args({64, 64})->Unit(benchmark::kMillisecond);

void BM_ContrastiveLoss(benchmark::State& state) {
  const int dim = 128;
  const auto negatives = RowMat<double>::Random(state.range(0), dim).rowwise().normalized().eval();
  const Vec<double> q = Vec<double>::Random(dim).normalized();
  const Vec<double> k = Vec<double>::Random(dim).normalized();
  for (auto _ : state) benchmark::DoNotOptimize(contrastive_loss<double>(q, k, negatives, 0.2));
}
BENCHMARK(BM_ContrastiveLoss)->Arg(1024)->Arg(10240);

void BM_CompetitiveAttention(benchmark::State& state) {
  FeatureMap map{4, 4, 64, FloatBuffer(4 * 4 * 64)};
  Rng rng = make_rng(3);
  for (auto& v : map.data) v = static_cast<float>(uniform(rng, 0.0, 1.0));
  const auto clf = LinearClassifier::random(5, 64, 0.1, 4);
  for (auto _ : state) benchmark::DoNotOptimize(compute_attention(map, clf));
}
BENCHMARK(BM_CompetitiveAttention);

}  // namespace
BENCHMARK_MAIN();
