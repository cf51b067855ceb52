// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include "pulsecol/attention.hpp"
#include "pulsecol/baselines.hpp"
#include "pulsecol/colsparse_kernel.hpp"
#include "pulsecol/error.hpp"
#include "pulsecol/pattern_estimator.hpp"
#include "pulsecol/recall.hpp"

namespace pulsecol::cli {
namespace {

AttentionInputs random_inputs(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  AttentionInputs in{Matrix(n, d), Matrix(n, d), Matrix(n, d)};
  for (Matrix* m : {&in.q, &in.k, &in.v}) {
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& x : m->row(i)) x = dist(rng);
    }
  }
  return in;
}

SparseIndexTensor random_columns(std::size_t n, std::size_t block_m, std::size_t n_s,
                                 std::uint64_t seed) {
  if (n_s == n) return SparseIndexTensor::full(n, block_m);
  const std::size_t blocks = (n + block_m - 1) / block_m;
  SparseIndexTensor t(blocks, n_s);
  std::mt19937_64 rng(seed);
  std::vector<SparseIndexTensor::Index> pool(n);
  for (std::size_t b = 0; b < blocks; ++b) {
    std::iota(pool.begin(), pool.end(), SparseIndexTensor::Index{0});
    for (std::size_t c = 0; c < n_s; ++c) {
      std::uniform_int_distribution<std::size_t> pick(c, n - 1);
      std::swap(pool[c], pool[pick(rng)]);
    }
    std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_s));
    std::copy_n(pool.begin(), n_s, t.row(b).begin());
  }
  return t;
}

double median(std::vector<double> times) {
  std::sort(times.begin(), times.end());
  const std::size_t mid = times.size() / 2;
  return times.size() % 2 == 1 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
}

template <typename Fn>
double seconds(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_bench_options(std::size_t n, const KernelBenchOptions& opts) {
  if (n == 0) throw InvalidInput("context length must be positive");
  if (n > kMaxBenchContext) {
    throw InvalidInput("context length " + std::to_string(n) + " exceeds the benchmark limit of " +
                       std::to_string(kMaxBenchContext) + " tokens");
  }
  if (opts.reps < 3) throw InvalidInput("benchmarks need at least 3 repetitions");
  if (opts.head_dim == 0) throw InvalidInput("head dimension must be positive");
}

}  // namespace

BenchResult bench_kernel_columns(std::size_t context_len, std::size_t cols_per_block,
                                 const KernelBenchOptions& opts, bool time_dense) {
  check_bench_options(context_len, opts);
  const KernelConfig cfg{opts.block_m, opts.block_n, Precision::kFloat64, opts.threads};
  cfg.validate();
  const AttentionInputs in = random_inputs(context_len, opts.head_dim, opts.seed);
  const SparseIndexTensor sparse =
      random_columns(context_len, opts.block_m, cols_per_block, opts.seed + 1);

  BenchResult r;
  r.context_len = context_len;
  r.rho = 1.0 - static_cast<double>(cols_per_block) / static_cast<double>(context_len);
  r.block_m = opts.block_m;
  r.block_n = opts.block_n;
  r.cols_per_block = cols_per_block;
  r.num_blocks = sparse.num_blocks();
  r.reps = opts.reps;

  KernelStats stats;
  column_sparse_forward(in, sparse, cfg, &stats);
  r.score_evals = stats.score_evals;

  // Dense and sparse repetitions alternate so both see the same machine load.
  const auto sparse_run = [&] { return column_sparse_forward(in, sparse, cfg); };
  const auto dense_run = [&] { return dense_attention(in); };
  for (std::size_t i = 0; i < opts.warmup; ++i) {
    sparse_run();
    if (time_dense) dense_run();
  }
  std::vector<double> sparse_times, dense_times;
  for (std::size_t i = 0; i < opts.reps; ++i) {
    sparse_times.push_back(seconds(sparse_run));
    if (time_dense) dense_times.push_back(seconds(dense_run));
  }
  r.sparse_s = median(sparse_times);
  if (time_dense) {
    r.dense_s = median(dense_times);
    r.speedup = r.dense_s / r.sparse_s;
  }
  return r;
}

BenchResult bench_kernel_case(std::size_t context_len, double rho,
                              const KernelBenchOptions& opts) {
  check_bench_options(context_len, opts);
  BenchResult r = bench_kernel_columns(context_len, budget_to_k(rho, context_len), opts);
  r.rho = rho;
  return r;
}

std::vector<BenchResult> run_kernel_bench(const KernelBenchOptions& opts) {
  for (const auto n : opts.context_lens) check_bench_options(n, opts);
  std::vector<BenchResult> rows;
  for (const auto n : opts.context_lens) {
    for (const double rho : opts.rhos) rows.push_back(bench_kernel_case(n, rho, opts));
  }
  return rows;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchResult>& rows) {
  os << "context_len,rho,bm,bn,dense_s,sparse_s,speedup,score_evals\n";
  for (const auto& r : rows) {
    os << r.context_len << ',' << r.rho << ',' << r.block_m << ',' << r.block_n << ','
       << r.dense_s << ',' << r.sparse_s << ',' << r.speedup << ',' << r.score_evals << '\n';
  }
}

RunResult run_sim(SimOptions& opts) {
  if (opts.run.pattern == PatternKind::kColumn) {
    opts.run.schedule = make_schedule(opts.schedule_kind, opts.run.total_steps, opts.eta,
                                      opts.refreshes, opts.run.seed);
  }
  opts.model.max_len = std::max(opts.model.max_len, opts.run.prompt_len + opts.run.gen_len);
  const ToyModel model(opts.model);
  return run_denoising(model, opts.run);
}

nlohmann::json run_to_json(const SimOptions& opts, const RunResult& result) {
  using nlohmann::json;
  const auto& run = opts.run;
  json doc;
  doc["config"] = {
      {"T", run.total_steps},
      {"prompt_len", run.prompt_len},
      {"gen_len", run.gen_len},
      {"rho", run.rho},
      {"pattern", std::string(to_string(run.pattern))},
      {"group_size", run.group_size},
      {"bn", run.block_n},
      {"block_size", run.block_size},
      {"window", run.window},
      {"sink_frac", run.sink_frac},
      {"skip_frac", run.skip_frac},
      {"recall_k", run.recall_k},
      {"seed", run.seed},
      {"schedule", schedule_to_json(run.schedule)},
      {"model",
       {{"seed", opts.model.seed},
        {"layers", opts.model.layers},
        {"heads", opts.model.heads},
        {"head_dim", opts.model.head_dim},
        {"vocab", opts.model.vocab}}},
  };
  doc["metadata"] = {
      {"recall_definition", "per-row oracle top-k set overlap"},
      {"recall_averaging", "mean over query rows, then layers, heads and measured steps"},
      {"block_pattern", "mean-pooled block top-k approximation of SparseD"},
  };
  json steps = json::array();
  for (const auto& s : result.metrics.steps) {
    json j = {{"step", s.step},
              {"stage", s.stage},
              {"mode", s.mode},
              {"realized_sparsity", s.realized_sparsity},
              {"score_eval_count", s.score_evals},
              {"unmasked", s.unmasked}};
    j["recall"] = s.recall ? json(*s.recall) : json(nullptr);
    steps.push_back(std::move(j));
  }
  doc["steps"] = std::move(steps);
  doc["full_attention_steps"] = result.metrics.full_attention_steps;
  doc["mean_recall"] =
      result.metrics.mean_recall ? json(*result.metrics.mean_recall) : json(nullptr);
  doc["final_tokens"] = result.tokens;
  return doc;
}

namespace {

std::vector<ScoreMap> recall_score_maps(const RecallOptions& opts) {
  std::vector<ScoreMap> maps;
  if (opts.source == "synthetic") {
    for (std::size_t m = 0; m < opts.maps; ++m) {
      maps.push_back(synthetic_column_scores(
          {opts.seq_len, opts.group_size, opts.hot_columns, 0.9, opts.seed + m}));
    }
    return maps;
  }
  if (opts.source == "model") {
    ToyModelConfig mc;
    mc.seed = opts.seed;
    mc.max_len = opts.seq_len;
    const ToyModel model(mc);
    std::mt19937_64 rng(opts.seed + 1);
    std::uniform_int_distribution<TokenId> token(0, model.mask_id() - 1);
    std::vector<TokenId> prompt(opts.seq_len / 4);
    for (auto& t : prompt) t = token(rng);
    const auto state = init_state(std::move(prompt), opts.seq_len - opts.seq_len / 4, model.mask_id());
    model_forward(model, state, [&](std::size_t, std::size_t, const AttentionInputs& in) {
      ScoreCollection c = collect_scores(in);
      maps.push_back(std::move(c.scores));
      return std::move(c.output);
    });
    return maps;
  }
  throw InvalidInput("unknown recall source '" + opts.source + "' (expected synthetic or model)");
}

}  // namespace

std::vector<RecallRow> run_recall_sweep(const RecallOptions& opts) {
  if (opts.seq_len == 0 || opts.maps == 0) throw InvalidInput("empty recall sweep");
  if (opts.topk == 0 || opts.topk > opts.seq_len) throw InvalidBudget("recall k must lie in [1, n]");
  const auto maps = recall_score_maps(opts);
  const std::size_t n = opts.seq_len;
  std::vector<RecallRow> rows;
  for (const double rho : opts.rhos) {
    const std::size_t k = budget_to_k(rho, n);
    double column = 0.0;
    double block = 0.0;
    for (const auto& p : maps) {
      const auto sets = estimate_column_sets(p, opts.group_size, k);
      const auto col_mask =
          expand_to_dense_mask(build_index_tensor(sets, opts.group_size), n, opts.group_size);
      column += topk_recall(p, col_mask, opts.topk);
      const auto blk_mask = block_mask(block_topk_from_scores(p, opts.block_size, rho), n);
      block += topk_recall(p, blk_mask, opts.topk);
    }
    const auto count = static_cast<double>(maps.size());
    rows.push_back({"column", rho, column / count});
    rows.push_back({"block", rho, block / count});
  }
  return rows;
}

void write_recall_csv(std::ostream& os, const std::vector<RecallRow>& rows) {
  os << "pattern,rho,recall\n";
  for (const auto& r : rows) os << r.pattern << ',' << r.rho << ',' << r.recall << '\n';
}

nlohmann::json schedule_to_json(const RefreshSchedule& schedule) {
  nlohmann::json j = {{"T", schedule.total_steps},
                      {"eta", schedule.eta},
                      {"R", schedule.budget},
                      {"kind", std::string(to_string(schedule.kind))},
                      {"steps", schedule.steps}};
  if (schedule.kind == ScheduleKind::kRandom) j["seed"] = schedule.seed;
  return j;
}

}  // namespace pulsecol::cli
