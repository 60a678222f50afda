#include <memory>

#include <benchmark/benchmark.h>

#include "fixpose/pose_distribution.hpp"
#include "fixpose/pose_search.hpp"
#include "fixpose/simulation.hpp"

using namespace fixpose;

namespace {

std::shared_ptr<const SearchContext> membrane_context(std::size_t budget) {
  SimulationSpec spec;
  spec.seed = 3;
  const SimulationTrial trial = run_trial(spec);
  SearchConfig config;
  config.cell_budget = budget;
  config.table_cache = FIXPOSE_BENCH_TABLE_CACHE;
  return std::make_shared<const SearchContext>(trial.mesh, trial.measurements, config);
}

// Cost of one rejection test at a mid-depth level where most cells are rejected.
void BM_RejectCell(benchmark::State& state) {
  const auto ctx = membrane_context(10'000'000);
  const int level = 3;
  const std::uint32_t side = 1u << level;
  std::uint64_t n = 0;
  for (auto _ : state) {
    CellKey key;
    key.pos = {std::uint32_t(n % side), std::uint32_t((n / side) % side), std::uint32_t((n / side / side) % side)};
    key.pixel = (n * 2654435761u) % (12ull << (2 * level));
    key.tilt = std::uint32_t(n % tilt_bins(level));
    benchmark::DoNotOptimize(ctx->reject_cell(key, level, level));
    ++n;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}

void BM_Search(benchmark::State& state) {
  const auto ctx = membrane_context(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    const PoseSuperset s = compute_superset(ctx);
    benchmark::DoNotOptimize(s.size());
  }
}

void BM_Distribution(benchmark::State& state) {
  const auto ctx = membrane_context(200'000);
  const PoseSuperset s = compute_superset(ctx);
  DistributionConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_distribution(s, config).samples.size());
  state.counters["cells"] = static_cast<double>(s.size());
}

}  // namespace

BENCHMARK(BM_RejectCell);
BENCHMARK(BM_Search)->Arg(100'000)->Arg(1'000'000)->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK(BM_Distribution)->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK_MAIN();
