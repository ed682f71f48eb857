// Serial reference against the OpenMP runner on the same trial workloads.
// Both produce bit-identical tallies; only wall time differs.

#include <benchmark/benchmark.h>

#include <vector>

#include "slelab/mc.hpp"

namespace {

using sle::RunOptions;

sle::TrialFn point_trial(const RunOptions& opt) {
  return [opt](std::uint64_t run, std::span<double> out) {
    out[0] = sle::run_C_eps_trial(6.0, 1.0, 0.5, opt.seed, run, opt.engine) ? 1.0 : 0.0;
  };
}

sle::TrialFn frostman_trial(const RunOptions& opt) {
  return [opt](std::uint64_t run, std::span<double> out) {
    const auto m = sle::FrostmanMeasure::sample(6.0, 1.0 / 64, opt.seed, run, opt.engine);
    out[0] = m.mass();
  };
}

template <bool Parallel>
void run(benchmark::State& state, sle::TrialFn (*make)(const RunOptions&)) {
  RunOptions opt;
  opt.seed = 1;
  opt.threads = static_cast<int>(state.range(1));
  const auto trial = make(opt);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto acc = Parallel ? sle::run_trials(n, 1, trial, opt) : sle::run_trials_serial(n, 1, trial, opt);
    benchmark::DoNotOptimize(acc[0].sum());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_point_serial(benchmark::State& s) { run<false>(s, point_trial); }
void BM_point_openmp(benchmark::State& s) { run<true>(s, point_trial); }
void BM_frostman_serial(benchmark::State& s) { run<false>(s, frostman_trial); }
void BM_frostman_openmp(benchmark::State& s) { run<true>(s, frostman_trial); }

}  // namespace

BENCHMARK(BM_point_serial)->Args({2000, 1})->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_point_openmp)->Args({2000, 0})->Args({2000, 2})->Args({2000, 4})->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_frostman_serial)->Args({50, 1})->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_frostman_openmp)->Args({50, 0})->Args({50, 2})->Args({50, 4})->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
