#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mgruip/cells.hpp"
#include "mgruip/config.hpp"
#include "mgruip/streaming.hpp"
#include "mgruip/tasks.hpp"
#include "mgruip/training.hpp"

namespace {

using namespace mgruip;

Tensor<float> noise(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  Tensor<float> t(rows, cols);
  for (float& v : t.values()) v = n(rng);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor<float> a = noise(n, n, 1), b = noise(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

// Single-frame step at n_i = n_c = 1024; mgruip uses n_p = 512.
void BM_MgruStep(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto p = MgruParams<float>::init(1024, 1024, rng);
  const Tensor<float> x = noise(1, 1024, 4), h = noise(1, 1024, 5);
  for (auto _ : state) benchmark::DoNotOptimize(mgru_step(p, x, h, BnMode::infer));
}
BENCHMARK(BM_MgruStep);

void BM_MgruipStep(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto p = MgruipParams<float>::init(1024, 1024, 512, rng);
  const Tensor<float> x = noise(1, 1024, 4), h = noise(1, 1024, 5);
  for (auto _ : state) benchmark::DoNotOptimize(mgruip_step<float>(p, x, h, nullptr, BnMode::infer));
}
BENCHMARK(BM_MgruipStep);

// Per-frame streaming cost of the 170 ms reference stack.
void BM_StreamReferenceFrame(benchmark::State& state) {
  const NetworkTopology top = load_config(MGRUIP_SOURCE_DIR "/configs/reference/mgruip-b-ctx-conv.yaml").topology;
  const auto params = NetworkParams<float>::init(top, 6);
  const Tensor<float> x = noise(300, top.input_dim, 7);
  for (auto _ : state) {
    StreamState<float> s(top, params);
    for (std::size_t f = 0; f < x.rows(); ++f)
      benchmark::DoNotOptimize(s.push({x.values().data() + f * x.cols(), x.cols()}));
    benchmark::DoNotOptimize(s.flush());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.rows()));
}
BENCHMARK(BM_StreamReferenceFrame)->Unit(benchmark::kMillisecond);

void BM_TrainBatchParityConv(benchmark::State& state) {
  const ExperimentConfig c = load_config(MGRUIP_SOURCE_DIR "/configs/toy/parity-conv.yaml");
  const Dataset data = generate_task(c.toy_task(8), 16);
  std::vector<Tensor<float>> frames;
  std::vector<std::vector<int>> labels;
  for (const Sequence& s : data) {
    frames.push_back(s.frames);
    labels.push_back(s.labels);
  }
  const auto params = NetworkParams<float>::init(c.topology, 9);
  for (auto _ : state)
    benchmark::DoNotOptimize(compute_gradients<float>(c.topology, params, frames, labels, BnMode::train));
}
BENCHMARK(BM_TrainBatchParityConv)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
