// Afterpulse histogram kernels against the serial reference.

#include "geigerlab/histogram.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <map>
#include <random>
#include <vector>

using namespace geigerlab;

namespace {

constexpr double kQ = 156.25e-12;

std::vector<std::uint64_t> poisson_ticks(double rate_hz, double duration_s) {
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> gap(rate_hz);
  std::vector<std::uint64_t> out;
  for (double t = gap(rng); t < duration_s; t += gap(rng))
    out.push_back(static_cast<std::uint64_t>(t / kQ));
  return out;
}

// args: rate in Hz, duration in ms
const std::vector<std::uint64_t> &ticks_for(const benchmark::State &state) {
  static std::map<std::pair<long, long>, std::vector<std::uint64_t>> cache;
  const auto key = std::make_pair(static_cast<long>(state.range(0)), static_cast<long>(state.range(1)));
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, poisson_ticks(static_cast<double>(key.first), key.second * 1e-3)).first;
  return it->second;
}

void run(benchmark::State &state, HistogramKernel kernel) {
  const auto &t = ticks_for(state);
  for (auto _ : state)
    benchmark::DoNotOptimize(afterpulse_histogram(t, kQ, {}, kernel).counts.data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(t.size()));
}

void BM_Reference(benchmark::State &state) {
  const auto &t = ticks_for(state);
  for (auto _ : state)
    benchmark::DoNotOptimize(afterpulse_histogram_reference(t, kQ, {}).counts.data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(t.size()));
}
void BM_SuccessorWalk(benchmark::State &state) { run(state, HistogramKernel::SuccessorWalk); }
void BM_EdgePointers(benchmark::State &state) { run(state, HistogramKernel::EdgePointers); }
void BM_Auto(benchmark::State &state) { run(state, HistogramKernel::Auto); }

// 200 Hz dark run and the 48.8 kHz illuminated run
void rates(benchmark::internal::Benchmark *b) {
  b->Args({200, 500'000})->Args({48'800, 2'000})->Unit(benchmark::kMillisecond);
}

} // namespace

BENCHMARK(BM_Reference)->Apply(rates);
BENCHMARK(BM_SuccessorWalk)->Apply(rates);
BENCHMARK(BM_EdgePointers)->Apply(rates);
BENCHMARK(BM_Auto)->Apply(rates);

BENCHMARK_MAIN();
