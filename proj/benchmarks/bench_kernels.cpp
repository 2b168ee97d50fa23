#include <benchmark/benchmark.h>

#include "dfeia/blocks.hpp"
#include "dfeia/kernels.hpp"
#include "dfeia/random.hpp"
#include "dfeia/wavelet.hpp"

using namespace dfeia;

static void BM_Conv3x3Depthwise(benchmark::State& state) {
  const int64_t c = state.range(0);
  Rng rng(1);
  Tensor<float> x = rng.uniform_tensor<float>({1, c, 56, 56}, -1.0, 1.0);
  Tensor<float> w = rng.uniform_tensor<float>({c, 1, 3, 3}, -1.0, 1.0);
  Tensor<float> b = rng.uniform_tensor<float>({c}, -1.0, 1.0);
  kernels::Conv2dGeom g;
  g.groups = c;
  g.pad_h = g.pad_w = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::conv2d(x, w, b, g));
  }
  state.SetItemsProcessed(state.iterations() * 56 * 56 * c * 9);
}
BENCHMARK(BM_Conv3x3Depthwise)->Arg(48)->Arg(160);

static void BM_Conv1x1(benchmark::State& state) {
  const int64_t c = state.range(0);
  Rng rng(2);
  Tensor<float> x = rng.uniform_tensor<float>({1, c, 28, 28}, -1.0, 1.0);
  Tensor<float> w = rng.uniform_tensor<float>({4 * c, c, 1, 1}, -1.0, 1.0);
  Tensor<float> b = rng.uniform_tensor<float>({4 * c}, -1.0, 1.0);
  kernels::Conv2dGeom g;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::conv2d(x, w, b, g));
  }
  state.SetItemsProcessed(state.iterations() * 28 * 28 * 4 * c * c);
}
BENCHMARK(BM_Conv1x1)->Arg(80)->Arg(160);

static void BM_Dwt2(benchmark::State& state) {
  Rng rng(3);
  Tensor<float> x = rng.uniform_tensor<float>({1, 48, 56, 56}, -1.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(wavelet::dwt2_stacked(x));
  }
}
BENCHMARK(BM_Dwt2);

static void BM_AfgForward(benchmark::State& state) {
  const int64_t c = state.range(0);
  Rng rng(4);
  AfgLayer<float> afg("afg", c, c / 32, AttentionVariant::interaction);
  std::vector<Parameter<float>*> params;
  afg.collect(params);
  for (auto* p : params) {
    float* v = p->value.mut();
    for (int64_t i = 0; i < p->value.numel(); ++i) v[i] = static_cast<float>(rng.uniform(-0.1, 0.1));
  }
  Tensor<float> x = rng.uniform_tensor<float>({1, c, 14, 14}, -1.0, 1.0);
  for (auto _ : state) {
    Tape<float> t(false);
    benchmark::DoNotOptimize(afg(t, t.constant(x)).value());
  }
}
BENCHMARK(BM_AfgForward)->Arg(160)->Arg(288);

static void BM_MsfdBlock(benchmark::State& state) {
  Rng rng(5);
  MsfdBlock<float> block("b", 48, 9, MbmsVariant::dilated);
  std::vector<Parameter<float>*> params;
  block.collect(params);
  for (auto* p : params) {
    float* v = p->value.mut();
    for (int64_t i = 0; i < p->value.numel(); ++i) v[i] = static_cast<float>(rng.uniform(-0.1, 0.1));
  }
  Tensor<float> x = rng.uniform_tensor<float>({1, 48, 56, 56}, -1.0, 1.0);
  for (auto _ : state) {
    Tape<float> t(false);
    benchmark::DoNotOptimize(block(t, t.constant(x)).value());
  }
}
BENCHMARK(BM_MsfdBlock);
