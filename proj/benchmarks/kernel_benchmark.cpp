// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "pulsecol/attention.hpp"
#include "pulsecol/colsparse_kernel.hpp"
#include "pulsecol/pattern_estimator.hpp"

namespace {

using namespace pulsecol;

constexpr std::size_t kHeadDim = 64;

AttentionInputs make_inputs(std::size_t n) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> dist;
  AttentionInputs in{Matrix(n, kHeadDim), Matrix(n, kHeadDim), Matrix(n, kHeadDim)};
  for (Matrix* m : {&in.q, &in.k, &in.v}) {
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& x : m->row(i)) x = dist(rng);
    }
  }
  return in;
}

SparseIndexTensor strided_columns(std::size_t n, std::size_t block_m, std::size_t n_s) {
  SparseIndexTensor t((n + block_m - 1) / block_m, n_s);
  for (std::size_t b = 0; b < t.num_blocks(); ++b) {
    auto r = t.row(b);
    for (std::size_t c = 0; c < n_s; ++c) {
      r[c] = static_cast<SparseIndexTensor::Index>((c * n) / n_s);
    }
  }
  return t;
}

void BM_DenseReference(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto in = make_inputs(n);
  for (auto _ : state) benchmark::DoNotOptimize(dense_attention(in));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n));
}
BENCHMARK(BM_DenseReference)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

// Args: n, sparsity in percent, B_M, B_N.
void BM_ColumnSparse(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const double rho = static_cast<double>(state.range(1)) / 100.0;
  const KernelConfig cfg{static_cast<std::size_t>(state.range(2)),
                         static_cast<std::size_t>(state.range(3))};
  const auto in = make_inputs(n);
  const auto sparse = strided_columns(n, cfg.block_m, budget_to_k(rho, n));
  KernelStats stats;
  for (auto _ : state) benchmark::DoNotOptimize(column_sparse_forward(in, sparse, cfg, &stats));
  state.counters["score_evals"] = static_cast<double>(stats.score_evals) /
                                  static_cast<double>(state.iterations());
  state.SetItemsProcessed(static_cast<int64_t>(stats.score_evals));
}
BENCHMARK(BM_ColumnSparse)
    ->ArgsProduct({{1024, 4096}, {0, 50, 90}, {32, 128}, {64}})
    ->Unit(benchmark::kMillisecond);

void BM_ColumnSparseFloat32(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const KernelConfig cfg{128, 64, Precision::kFloat32};
  const auto in = make_inputs(n);
  const auto sparse = strided_columns(n, cfg.block_m, budget_to_k(0.9, n));
  for (auto _ : state) benchmark::DoNotOptimize(column_sparse_forward(in, sparse, cfg));
}
BENCHMARK(BM_ColumnSparseFloat32)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_PatternEstimate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto in = make_inputs(n);
  for (auto _ : state) {
    const auto scores = collect_group_scores(in, 32);
    benchmark::DoNotOptimize(
        build_index_tensor(estimate_column_sets(scores.group_scores, 32, budget_to_k(0.9, n)), 32));
  }
}
BENCHMARK(BM_PatternEstimate)->Arg(1024)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
