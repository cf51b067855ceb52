// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "pulsecol/dllm_sim.hpp"
#include "pulsecol/refresh_schedule.hpp"

namespace pulsecol::cli {

// Largest context the kernel benchmark accepts; the dense reference keeps
// three n x d_h inputs and an n x d_h output resident.
inline constexpr std::size_t kMaxBenchContext = std::size_t{1} << 17;

struct KernelBenchOptions {
  std::vector<std::size_t> context_lens{1024, 4096};
  std::vector<double> rhos{0.0, 0.5, 0.9};
  std::size_t block_m = 128;
  std::size_t block_n = 64;
  std::size_t head_dim = 64;
  std::size_t reps = 5;
  std::size_t warmup = 1;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
};

/// One row of the kernel benchmark. Times are medians in seconds.
struct BenchResult {
  std::size_t context_len = 0;
  double rho = 0.0;
  std::size_t block_m = 0;
  std::size_t block_n = 0;
  std::size_t cols_per_block = 0;  // n_s
  std::size_t num_blocks = 0;      // n_q
  std::size_t reps = 0;
  double dense_s = 0.0;
  double sparse_s = 0.0;
  double speedup = 0.0;
  std::uint64_t score_evals = 0;  // per sparse forward
};

/// Times dense_attention against column_sparse_forward on seeded inputs
/// with n_s = budget_to_k(rho, n) random columns per query block.
BenchResult bench_kernel_case(std::size_t context_len, double rho, const KernelBenchOptions& opts);
/// Same, with n_s given directly.
BenchResult bench_kernel_columns(std::size_t context_len, std::size_t cols_per_block,
                                 const KernelBenchOptions& opts, bool time_dense = true);

std::vector<BenchResult> run_kernel_bench(const KernelBenchOptions& opts);

/// Header: context_len,rho,bm,bn,dense_s,sparse_s,speedup,score_evals
void write_bench_csv(std::ostream& os, const std::vector<BenchResult>& rows);

struct SimOptions {
  RunConfig run;
  ToyModelConfig model;
  ScheduleKind schedule_kind = ScheduleKind::kUniform;
  double eta = 0.3;
  std::size_t refreshes = 16;
};

/// Builds the schedule and model from `opts` and runs the denoising loop.
RunResult run_sim(SimOptions& opts);

/// Run metrics document: config, metadata, per-step metrics and final tokens.
nlohmann::json run_to_json(const SimOptions& opts, const RunResult& result);

struct RecallOptions {
  std::size_t seq_len = 512;
  std::size_t group_size = 32;
  std::size_t block_size = 32;
  std::size_t hot_columns = 8;
  std::size_t topk = 8;
  std::size_t maps = 4;
  std::vector<double> rhos{0.0, 0.5, 0.7, 0.8, 0.9};
  std::string source = "synthetic";  // or "model"
  std::uint64_t seed = 0;
};

struct RecallRow {
  std::string pattern;  // "column" or "block"
  double rho = 0.0;
  double recall = 0.0;  // mean over all score maps
};

/// Column vs block recall over a sparsity grid on shared score maps.
std::vector<RecallRow> run_recall_sweep(const RecallOptions& opts);

/// Header: pattern,rho,recall
void write_recall_csv(std::ostream& os, const std::vector<RecallRow>& rows);

/// {T, eta, R, kind, steps}, plus seed for random schedules.
nlohmann::json schedule_to_json(const RefreshSchedule& schedule);

}  // namespace pulsecol::cli
