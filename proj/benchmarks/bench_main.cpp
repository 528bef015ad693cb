#include "driftkit/activation_cache.hpp"
#include "driftkit/eval_stats.hpp"
#include "driftkit/features.hpp"
#include "driftkit/probes.hpp"
#include "driftkit/rng.hpp"
#include "driftkit/synthetic.hpp"

#include <benchmark/benchmark.h>

#include <filesystem>

using namespace driftkit;

static void BM_Auroc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto set = gaussian_scored_set(n / 2, n - n / 2, 1.0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(auroc(set));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Auroc)->Arg(200)->Arg(2000)->Arg(20000);

static void BM_Bootstrap(benchmark::State& state) {
  const auto set = gaussian_scored_set(250, 250, 1.0, 2);
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_ci(set.scores, set.labels, 1000, 3));
}
BENCHMARK(BM_Bootstrap)->Unit(benchmark::kMillisecond);

static void BM_LogisticFit(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const auto d = static_cast<Eigen::Index>(state.range(1));
  Rng rng(4);
  Matrix x(n, d);
  Labels y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 2);
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rng.normal() + (j < 3 ? 0.5 * y[i] : 0.0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit_logistic(x, y, 0.1));
}
BENCHMARK(BM_LogisticFit)->Args({800, 108})->Args({800, 1000})->Unit(benchmark::kMillisecond);

static void BM_DriftFeatures(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  Rng rng(5);
  MatrixF pooled(4, d);
  for (Eigen::Index i = 0; i < pooled.size(); ++i) pooled.data()[i] = static_cast<float>(rng.normal());
  for (auto _ : state) benchmark::DoNotOptimize(drift_features(pooled));
}
BENCHMARK(BM_DriftFeatures)->Arg(512)->Arg(8192);

static void BM_CacheRead(benchmark::State& state) {
  SyntheticSpec spec;
  spec.n = static_cast<std::size_t>(state.range(0));
  spec.hidden_dim = 256;
  const auto data = make_synthetic(spec);
  const auto path = std::filesystem::temp_directory_path() / "driftkit_bench.cache";
  write_cache(data.records, data.header, path);
  for (auto _ : state) benchmark::DoNotOptimize(read_cache(path));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(std::filesystem::file_size(path)));
  std::filesystem::remove(path);
}
BENCHMARK(BM_CacheRead)->Arg(500)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
