#include <benchmark/benchmark.h>

#include <cstring>
#include <random>

#include "percoll/autotune.hpp"
#include "percoll/bytecode.hpp"
#include "percoll/costmodel.hpp"
#include "percoll/planner.hpp"
#include "percoll/rank_order.hpp"
#include "percoll/transport.hpp"

using namespace percoll;

namespace {

CollectiveSpec skewed_spec(int p, int c) {
  std::mt19937_64 rng(42);
  std::vector<std::size_t> counts(static_cast<std::size_t>(p * c));
  for (auto& x : counts) x = 8 * (1 + rng() % 64);
  return allgatherv_spec(Topology(p, c), counts, DType::Int64);
}

void BM_PlanAllgatherv(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const auto spec = skewed_spec(p, 4);
  const auto fp = uniform_factor_plan(p, 2, 4);
  for (auto _ : state) benchmark::DoNotOptimize(plan_allgatherv(spec, fp, true));
}
BENCHMARK(BM_PlanAllgatherv)->RangeMultiplier(4)->Range(4, 256);

void BM_Compile(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const auto plan = plan_allgatherv(skewed_spec(p, 4), uniform_factor_plan(p, 2, 4), true);
  for (auto _ : state) benchmark::DoNotOptimize(compile(plan));
}
BENCHMARK(BM_Compile)->RangeMultiplier(4)->Range(4, 256);

void BM_Validate(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const auto prog = compile(plan_allgatherv(skewed_spec(p, 4), uniform_factor_plan(p, 2, 4), true));
  for (auto _ : state) benchmark::DoNotOptimize(validate(prog));
}
BENCHMARK(BM_Validate)->RangeMultiplier(4)->Range(4, 64);

void BM_ReorderRanks(benchmark::State& state) {
  std::mt19937_64 rng(7);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(state.range(0)));
  for (auto& s : sizes) s = rng() % 100000;
  for (auto _ : state) benchmark::DoNotOptimize(reorder_ranks(sizes));
}
BENCHMARK(BM_ReorderRanks)->RangeMultiplier(4)->Range(16, 4096);

void BM_SimulateTimeline(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const auto plan = plan_allgatherv(skewed_spec(p, 1), uniform_factor_plan(p, 2, 1), true);
  const ModelParams m{1e-6, 1e-9, 0, 0};
  for (auto _ : state) benchmark::DoNotOptimize(simulate_timeline(plan, m));
}
BENCHMARK(BM_SimulateTimeline)->RangeMultiplier(4)->Range(4, 256);

void BM_ExecuteAllreduce(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const std::size_t bytes = static_cast<std::size_t>(state.range(1));
  const auto spec = allreduce_spec(Topology(p, 2), bytes, DType::Float64, ReduceOp::Sum);
  const auto prog = compile(plan_allreduce(spec, uniform_factor_plan(p, 2, 2)));
  std::vector<Buffer> inputs(static_cast<std::size_t>(p * 2), Buffer(bytes));
  for (auto& b : inputs) {
    for (std::size_t i = 0; i < bytes; i += 8) {
      const double v = 1.0 + static_cast<double>(i);
      std::memcpy(b.data() + i, &v, 8);
    }
  }
  Cluster cluster(spec.topology);
  for (auto _ : state) benchmark::DoNotOptimize(cluster.run(prog, inputs));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes) * p * 2);
}
BENCHMARK(BM_ExecuteAllreduce)
    ->Args({4, 64})
    ->Args({4, 1 << 16})
    ->Args({8, 64})
    ->Args({8, 1 << 16})
    ->Unit(benchmark::kMicrosecond);

void BM_Autotune(benchmark::State& state) {
  std::vector<int> ports;
  for (int k = 1; k <= 15; ++k) ports.push_back(k);
  const auto table = synthesize_table({1e-6, 1e-10, 0, 0}, ports, geometric_sizes(1, 1 << 24, 4));
  for (auto _ : state) {
    benchmark::DoNotOptimize(autotune(16, 4096, table, 16, Collective::Allgatherv));
  }
}
BENCHMARK(BM_Autotune)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
