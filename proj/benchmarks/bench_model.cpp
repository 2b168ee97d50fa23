#include <benchmark/benchmark.h>

#include "dfeia/network.hpp"
#include "dfeia/ops.hpp"
#include "dfeia/random.hpp"

using namespace dfeia;

static NetworkConfig reduced_config() {
  NetworkConfig cfg;
  cfg.stage_depths = {1, 1, 1, 1};
  cfg.stage_channels = {8, 16, 32, 32};
  cfg.input_size = 64;
  return cfg;
}

static void BM_ForwardReduced(benchmark::State& state) {
  Model<float> m = build<float>(reduced_config(), 1);
  Rng rng(1);
  Tensor<float> x = rng.uniform_tensor<float>({1, 3, 64, 64}, -1.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(m.forward(x));
  }
}
BENCHMARK(BM_ForwardReduced);

static void BM_ForwardDefault224(benchmark::State& state) {
  Model<float> m = build<float>(NetworkConfig{}, 1);
  Rng rng(2);
  Tensor<float> x = rng.uniform_tensor<float>({1, 3, 224, 224}, -1.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(m.forward(x));
  }
}
BENCHMARK(BM_ForwardDefault224)->Unit(benchmark::kMillisecond)->MinTime(2.0);

static void BM_TrainStepReduced(benchmark::State& state) {
  Model<float> m = build<float>(reduced_config(), 1);
  Rng rng(3);
  Tensor<float> x = rng.uniform_tensor<float>({4, 3, 64, 64}, -1.0, 1.0);
  std::vector<int> labels = {0, 1, 2, 3};
  for (auto _ : state) {
    Tape<float> tape;
    Var<float> logits = m.forward(tape, tape.constant(x));
    Var<float> loss = ops::cross_entropy(tape, logits, labels);
    m.zero_grad();
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.value().data()[0]);
  }
}
BENCHMARK(BM_TrainStepReduced)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
