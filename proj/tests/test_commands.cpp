// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "pulsecol/error.hpp"
#include "pulsecol/pattern_estimator.hpp"

namespace pulsecol::cli {
namespace {

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

TEST(BenchCsv, HeaderAndRows) {
  KernelBenchOptions opts;
  opts.context_lens = {64};
  opts.rhos = {0.5};
  opts.block_m = 16;
  opts.block_n = 8;
  opts.head_dim = 8;
  opts.reps = 3;
  opts.warmup = 0;
  const auto rows = run_kernel_bench(opts);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].cols_per_block, 32u);
  EXPECT_EQ(rows[0].num_blocks, 4u);
  EXPECT_EQ(rows[0].score_evals, 4u * 16u * 32u);
  EXPECT_GT(rows[0].dense_s, 0.0);
  EXPECT_GT(rows[0].sparse_s, 0.0);
  std::ostringstream os;
  write_bench_csv(os, rows);
  const std::string csv = os.str();
  EXPECT_EQ(first_line(csv), "context_len,rho,bm,bn,dense_s,sparse_s,speedup,score_evals");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST(BenchCsv, ScoreEvalsMatchIdentityForPartialLastBlock) {
  KernelBenchOptions opts;
  opts.block_m = 16;
  opts.block_n = 8;
  opts.head_dim = 8;
  opts.reps = 3;
  opts.warmup = 0;
  const auto r = bench_kernel_columns(40, 10, opts, false);
  EXPECT_EQ(r.num_blocks, 3u);
  EXPECT_EQ(r.score_evals, 40u * 10u);  // real query rows times n_s
}

TEST(BenchCsv, RejectsBadContext) {
  KernelBenchOptions opts;
  EXPECT_THROW(bench_kernel_case(0, 0.5, opts), InvalidInput);
  EXPECT_THROW(bench_kernel_case(kMaxBenchContext + 1, 0.5, opts), InvalidInput);
  EXPECT_THROW(bench_kernel_case(64, 1.0, opts), InvalidBudget);
}

TEST(RecallSweep, ColumnDominatesBlockAndDecays) {
  RecallOptions opts;
  opts.seq_len = 256;
  opts.maps = 2;
  const auto rows = run_recall_sweep(opts);
  ASSERT_EQ(rows.size(), 2 * opts.rhos.size());
  double prev_column = 1.0, prev_block = 1.0;
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    const auto& column = rows[i];
    const auto& block = rows[i + 1];
    EXPECT_EQ(column.pattern, "column");
    EXPECT_EQ(block.pattern, "block");
    if (column.rho == 0.0) {
      EXPECT_EQ(column.recall, 1.0);
      EXPECT_EQ(block.recall, 1.0);
    }
    EXPECT_GE(column.recall, block.recall);
    EXPECT_LE(column.recall, prev_column + 1e-12);
    EXPECT_LE(block.recall, prev_block + 1e-12);
    prev_column = column.recall;
    prev_block = block.recall;
  }
  std::ostringstream os;
  write_recall_csv(os, rows);
  EXPECT_EQ(first_line(os.str()), "pattern,rho,recall");
}

TEST(RecallSweep, ModelSourceAndErrors) {
  RecallOptions opts;
  opts.seq_len = 64;
  opts.group_size = 16;
  opts.block_size = 16;
  opts.source = "model";
  const auto rows = run_recall_sweep(opts);
  for (const auto& r : rows) {
    EXPECT_GE(r.recall, 0.0);
    EXPECT_LE(r.recall, 1.0);
  }
  opts.source = "nope";
  EXPECT_THROW(run_recall_sweep(opts), InvalidInput);
  opts.source = "synthetic";
  opts.topk = 65;
  EXPECT_THROW(run_recall_sweep(opts), InvalidBudget);
}

TEST(Sim, ColumnRunJsonSchema) {
  SimOptions opts;
  opts.run.total_steps = 128;
  opts.run.prompt_len = 8;
  opts.run.gen_len = 128;
  opts.run.group_size = 16;
  opts.run.block_n = 8;
  opts.run.rho = 0.8;
  opts.eta = 0.3;
  opts.refreshes = 16;
  opts.model.layers = 1;
  opts.model.heads = 1;
  const auto result = run_sim(opts);
  const auto doc = run_to_json(opts, result);
  ASSERT_EQ(doc["steps"].size(), 128u);
  std::vector<std::size_t> refresh;
  for (const auto& s : doc["steps"]) {
    for (const char* key : {"step", "stage", "mode", "realized_sparsity", "score_eval_count",
                            "unmasked", "recall"}) {
      EXPECT_TRUE(s.contains(key)) << key;
    }
    if (s["stage"] == "refresh") refresh.push_back(s["step"].get<std::size_t>());
  }
  ASSERT_EQ(refresh.size(), 16u);
  EXPECT_EQ(refresh.front(), 1u);
  EXPECT_EQ(refresh.back(), 38u);
  EXPECT_EQ(doc["full_attention_steps"], 16);
  EXPECT_EQ(doc["config"]["schedule"]["steps"].size(), 16u);
  EXPECT_TRUE(doc["metadata"].contains("recall_definition"));
  EXPECT_TRUE(doc["metadata"].contains("recall_averaging"));
  EXPECT_TRUE(doc["mean_recall"].is_number());
  EXPECT_EQ(doc["final_tokens"].size(), 136u);
}

TEST(Sim, FullPatternIgnoresSchedule) {
  SimOptions opts;
  opts.run.total_steps = 4;
  opts.run.prompt_len = 4;
  opts.run.gen_len = 8;
  opts.run.pattern = PatternKind::kFull;
  opts.refreshes = 99;  // would be invalid for a column run
  const auto doc = run_to_json(opts, run_sim(opts));
  EXPECT_EQ(doc["full_attention_steps"], 4);
  EXPECT_TRUE(doc["mean_recall"].is_null());
}

TEST(ScheduleJson, Fields) {
  const auto u = schedule_to_json(uniform_schedule(128, 0.3, 16));
  EXPECT_EQ(u["T"], 128);
  EXPECT_EQ(u["R"], 16);
  EXPECT_EQ(u["kind"], "uniform");
  EXPECT_FALSE(u.contains("seed"));
  const auto r = schedule_to_json(random_schedule(128, 0.3, 4, 11));
  EXPECT_EQ(r["seed"], 11);
  EXPECT_EQ(r["steps"][0], 1);
}

}  // namespace
}  // namespace pulsecol::cli
