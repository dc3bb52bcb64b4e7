#include <benchmark/benchmark.h>

#include "vsret/numerics.hpp"
#include "vsret/rng.hpp"
#include "vsret/training.hpp"

namespace {

using namespace vsret;

Tensor random_frames(std::size_t t, std::size_t d, Rng& rng) {
  Tensor x({t, d});
  for (auto& v : x.values()) v = static_cast<float>(rng.normal());
  return x;
}

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = random_frames(n, n, rng);
  const Tensor b = random_frames(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Gemm)->Arg(64)->Arg(256);

// One forward/backward pass of the full objective at the synthetic benchmark size.
void BM_TotalLossStep(benchmark::State& state) {
  const TrainConfig config = synthetic_benchmark_config();
  const std::size_t k = 40, d = 64, w = 32;
  Model<float> model = init_model<float>({d, k, w}, config, 1);
  Rng rng(2);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<float> z(model.embed_dim());
    for (auto& v : z) v = static_cast<float>(rng.normal());
    model.bank.update(static_cast<int>(c), z);
  }
  model.semantic_rows = Tensor({k, w});
  for (auto& v : model.semantic_rows.values()) v = static_cast<float>(rng.normal());
  VideoBatch<float> batch;
  for (std::size_t i = 0; i < config.batch_size; ++i) {
    batch.frames.append(random_frames(config.max_frames, d, rng));
    batch.labels.push_back(static_cast<int>(i % k));
  }
  for (auto _ : state) {
    for (auto* p : model.parameters()) p->zero_grad();
    benchmark::DoNotOptimize(total_loss(batch, model, config, true).total);
  }
}
BENCHMARK(BM_TotalLossStep);

}  // namespace
