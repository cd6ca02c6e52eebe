// Serial vs OpenMP similarity scoring. items_per_second counts similarity
// evaluations (one query against one bank pattern).

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "lst/kernels.hpp"
#include "lst/pattern_bank.hpp"

namespace {

std::vector<double> normalized_rows(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> raw(dim), out(rows * dim);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto& v : raw) v = nd(rng);
    lst::normalize_into(raw, std::span<double>(out.data() + r * dim, dim));
  }
  return out;
}

template <void (*Kernel)(std::span<const double>, std::span<const double>, std::size_t, std::span<double>)>
void BM_BatchSimilarity(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const std::size_t queries = 1024, bank = 256;
  const auto q = normalized_rows(queries, dim, 1);
  const auto b = normalized_rows(bank, dim, 2);
  std::vector<double> out(queries * bank);
  for (auto _ : state) {
    Kernel(q, b, dim, out);
    benchmark::DoNotOptimize(out.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * queries * bank));
}

void BM_KMeansAssign(benchmark::State& state) {
  const std::size_t dim = 360, n = 4096, k = 100;
  const auto pts = normalized_rows(n, dim, 3);
  const auto cen = normalized_rows(k, dim, 4);
  std::vector<std::size_t> assign(n);
  std::vector<double> dist(n);
  for (auto _ : state) {
    if (state.range(0) == 0)
      lst::kernels::assign_nearest_serial(pts, cen, dim, assign, dist);
    else
      lst::kernels::assign_nearest_parallel(pts, cen, dim, assign, dist);
    benchmark::DoNotOptimize(dist.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * k));
}

}  // namespace

BENCHMARK(BM_BatchSimilarity<lst::kernels::batch_similarity_serial>)->Arg(180)->Arg(360)->Arg(720);
BENCHMARK(BM_BatchSimilarity<lst::kernels::batch_similarity_parallel>)->Arg(180)->Arg(360)->Arg(720)->UseRealTime();
BENCHMARK(BM_KMeansAssign)->Arg(0)->Arg(1)->UseRealTime();

BENCHMARK_MAIN();
