#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "vsret/evaluation.hpp"
#include "vsret/retrieval.hpp"
#include "vsret/rng.hpp"

namespace {

using namespace vsret;

GalleryIndex random_index(std::size_t n, std::size_t c, Rng& rng) {
  Tensor rows({n, c});
  for (auto& v : rows.values()) v = static_cast<float>(rng.normal());
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("g" + std::to_string(i));
  return build_index(std::move(ids), rows, IndexKind::Video);
}

void BM_SearchFullRanking(benchmark::State& state) {
  Rng rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const GalleryIndex index = random_index(n, 512, rng);
  std::vector<float> q(512);
  for (auto& v : q) v = static_cast<float>(rng.normal());
  for (auto _ : state) benchmark::DoNotOptimize(search(index, q, kAllItems, "q"));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_SearchFullRanking)->Arg(1000)->Arg(10000);

void BM_SearchTop10(benchmark::State& state) {
  Rng rng(2);
  const GalleryIndex index = random_index(10000, 512, rng);
  std::vector<float> q(512);
  for (auto& v : q) v = static_cast<float>(rng.normal());
  for (auto _ : state) benchmark::DoNotOptimize(search(index, q, 10, "q"));
}
BENCHMARK(BM_SearchTop10);

void BM_AveragePrecision(benchmark::State& state) {
  Rng rng(3);
  std::vector<std::uint8_t> rel(static_cast<std::size_t>(state.range(0)));
  for (auto& r : rel) r = rng.below(10) == 0 ? 1 : 0;
  std::size_t total = 0;
  for (auto r : rel) total += r;
  for (auto _ : state) benchmark::DoNotOptimize(average_precision(rel, total + 1));
}
BENCHMARK(BM_AveragePrecision)->Arg(5000);

void BM_GenerateProposals(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(generate_proposals(static_cast<std::size_t>(state.range(0)), 26));
}
BENCHMARK(BM_GenerateProposals)->Arg(50)->Arg(200);

}  // namespace
