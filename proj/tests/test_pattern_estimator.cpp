// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <set>

#include "oracles.hpp"
#include "pulsecol/colsparse_kernel.hpp"
#include "pulsecol/error.hpp"
#include "pulsecol/pattern_estimator.hpp"
#include "pulsecol/recall.hpp"

namespace pulsecol {
namespace {

using testing::random_inputs;

TEST(CollectScores, SingleToken) {
  const auto c = collect_scores(random_inputs(1, 3, 1));
  EXPECT_EQ(c.scores.probs(0, 0), 1.0);
}

TEST(CollectScores, IdenticalKeysGiveUniformRows) {
  auto in = random_inputs(5, 3, 2);
  for (std::size_t j = 1; j < 5; ++j) {
    for (std::size_t c = 0; c < 3; ++c) in.k(j, c) = in.k(0, c);
  }
  const auto c = collect_scores(in);
  for (double p : c.scores.probs.values()) EXPECT_NEAR(p, 0.2, 1e-12);
}

TEST(CollectScores, MatchesUnfusedSoftmaxAndDenseOutput) {
  const auto in = random_inputs(8, 4, 3);
  const auto c = collect_scores(in);
  c.scores.validate();
  const auto ref = testing::renormalized_probs(in, [](std::size_t, std::size_t) { return true; });
  for (std::size_t i = 0; i < 8; ++i) {
    const auto row = c.scores.probs.row(i);
    EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-6);
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(row[j], ref[i][j], 1e-9);
  }
  EXPECT_EQ(c.output, dense_attention(in));
}

TEST(CollectScores, Float32PrecisionKnob) {
  const auto in = random_inputs(16, 8, 4);
  const auto wide = collect_scores(in);
  const auto narrow = collect_scores(in, Precision::kFloat32);
  narrow.scores.validate();
  EXPECT_LT(testing::max_abs_diff(wide.scores.probs, narrow.scores.probs), 1e-5);
  EXPECT_LT(testing::max_abs_diff(wide.output, narrow.output), 1e-4);
}

TEST(GroupKeyScores, HandCheckedAverage) {
  ScoreMap p{Matrix(3, 3)};
  const double rows[3][3] = {{0.5, 0.3, 0.2}, {0.1, 0.7, 0.2}, {0.2, 0.2, 0.6}};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) p.probs(i, j) = rows[i][j];
  }
  const Matrix s = group_key_scores(p, 2);
  ASSERT_EQ(s.rows(), 2u);
  EXPECT_NEAR(s(0, 0), 0.3, 1e-12);
  EXPECT_NEAR(s(0, 1), 0.5, 1e-12);
  EXPECT_NEAR(s(0, 2), 0.2, 1e-12);
  // the short last group is its single row
  EXPECT_EQ(s(1, 2), 0.6);
  const auto top = select_topk(s.row(0), 1);
  EXPECT_EQ(top, std::vector<ColumnIndex>{1});
}

TEST(GroupKeyScores, SingletonGroupsAndUniformInput) {
  const auto c = collect_scores(random_inputs(7, 3, 5));
  EXPECT_EQ(group_key_scores(c.scores, 1), c.scores.probs);
  ScoreMap uniform{Matrix(6, 6, 1.0 / 6.0)};
  const Matrix pooled = group_key_scores(uniform, 4);
  for (double x : pooled.values()) EXPECT_NEAR(x, 1.0 / 6.0, 1e-15);
  const Matrix s = group_key_scores(c.scores, 3);
  for (std::size_t u = 0; u < s.rows(); ++u) {
    const auto r = s.row(u);
    EXPECT_NEAR(std::accumulate(r.begin(), r.end(), 0.0), 1.0, 1e-5);
  }
}

TEST(GroupKeyScores, StreamingMatchesMaterialized) {
  const auto in = random_inputs(45, 6, 6);
  const auto full = collect_scores(in);
  const auto streamed = collect_group_scores(in, 8);
  EXPECT_LT(testing::max_abs_diff(group_key_scores(full.scores, 8), streamed.group_scores), 1e-12);
  EXPECT_EQ(streamed.output, full.output);
}

TEST(SelectTopK, FullSelectionAndErrors) {
  const std::vector<double> s{0.1, 0.4, 0.2, 0.3};
  EXPECT_EQ(select_topk(s, 4), (std::vector<ColumnIndex>{0, 1, 2, 3}));
  EXPECT_EQ(select_topk(s, 2), (std::vector<ColumnIndex>{1, 3}));
  EXPECT_THROW(select_topk(s, 5), InvalidBudget);
  EXPECT_THROW(select_topk(s, 0), InvalidBudget);
}

TEST(SelectTopK, TiesGoToLowerIndex) {
  const std::vector<double> s{0.2, 0.2, 0.1, 0.2, 0.3};
  EXPECT_EQ(select_topk(s, 2), (std::vector<ColumnIndex>{0, 4}));
  EXPECT_EQ(select_topk(s, 3), (std::vector<ColumnIndex>{0, 1, 4}));
}

TEST(SelectTopK, MatchesExhaustiveObjective) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> real(0.0, 1.0);
  for (std::size_t n = 1; n <= 10; ++n) {
    for (std::size_t k = 1; k <= std::min<std::size_t>(4, n); ++k) {
      for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> s(n);
        // half the trials use small integers so ties actually occur
        for (auto& x : s) x = trial % 2 == 0 ? real(rng) : static_cast<double>(rng() % 3);
        ASSERT_EQ(select_topk(s, k), testing::exhaustive_topk(s, k)) << "n=" << n << " k=" << k;
      }
    }
  }
}

TEST(SelectTopK, ScaleInvariant) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> real(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(30);
    for (auto& x : s) x = real(rng);
    auto scaled = s;
    const double c = 0.01 + 100.0 * real(rng);
    for (auto& x : scaled) x *= c;
    EXPECT_EQ(select_topk(s, 7), select_topk(scaled, 7));
  }
}

TEST(BudgetToK, Examples) {
  EXPECT_EQ(budget_to_k(0.8, 1000), 200u);
  EXPECT_EQ(budget_to_k(0.0, 7), 7u);
  EXPECT_EQ(budget_to_k(0.99, 50), 1u);
  EXPECT_EQ(budget_to_k(0.9, 4096), 409u);
  EXPECT_THROW(budget_to_k(1.0, 10), InvalidBudget);
  EXPECT_THROW(budget_to_k(-0.1, 10), InvalidBudget);
}

TEST(BuildIndexTensor, SortsAndChecksGroupSize) {
  GroupColumnSets sets;
  sets.seq_len = 3;
  sets.group_size = 3;
  sets.selected = {{2, 0}};
  const auto t = build_index_tensor(sets, 3);
  EXPECT_EQ(t.row(0)[0], 0u);
  EXPECT_EQ(t.row(0)[1], 2u);
  EXPECT_THROW(build_index_tensor(sets, 4), InvalidInput);
}

TEST(BuildIndexTensor, FullBudgetGivesIdentityRows) {
  const auto c = collect_scores(random_inputs(20, 4, 7));
  const auto t = build_index_tensor(estimate_column_sets(c.scores, 8, 20), 8);
  EXPECT_EQ(t, SparseIndexTensor::full(20, 8));
}

TEST(BuildIndexTensor, PipelineMatchesExhaustiveOracleChain) {
  const std::size_t n = 64, group = 16, k = 3;
  const auto in = random_inputs(n, 8, 8, 2.0);
  const auto c = collect_scores(in);
  const auto tensor = build_index_tensor(estimate_column_sets(c.scores, group, k), group);
  const DenseMask mask = expand_to_dense_mask(tensor, n, group);

  // oracle chain: probabilities from the long-double reference, group sums,
  // best k-subset by enumeration.
  const auto p = testing::renormalized_probs(in, [](std::size_t, std::size_t) { return true; });
  DenseMask expected(n);
  for (std::size_t g = 0; g < n; g += group) {
    std::vector<double> s(n, 0.0);
    for (std::size_t i = g; i < g + group; ++i) {
      for (std::size_t j = 0; j < n; ++j) s[j] += p[i][j] / group;
    }
    const auto best = testing::exhaustive_topk(s, k);
    for (std::size_t i = g; i < g + group; ++i) {
      for (auto j : best) expected.set(i, j);
    }
  }
  EXPECT_EQ(mask, expected);
}

TEST(EstimateColumnSets, RecoversConcentratedColumns) {
  // every group puts all of its mass on exactly k columns
  const std::size_t n = 48, group = 16, k = 4;
  std::mt19937_64 rng(1);
  ScoreMap p{Matrix(n, n)};
  std::vector<std::set<ColumnIndex>> truth;
  for (std::size_t g = 0; g < n; g += group) {
    std::set<ColumnIndex> cols;
    while (cols.size() < k) cols.insert(static_cast<ColumnIndex>(rng() % n));
    for (std::size_t i = g; i < g + group; ++i) {
      for (auto j : cols) p.probs(i, j) = 1.0 / k;
    }
    truth.push_back(cols);
  }
  const auto sets = estimate_column_sets(p, group, k);
  for (std::size_t u = 0; u < truth.size(); ++u) {
    EXPECT_EQ(std::set<ColumnIndex>(sets.selected[u].begin(), sets.selected[u].end()), truth[u]);
  }
  const auto mask = expand_to_dense_mask(build_index_tensor(sets, group), n, group);
  EXPECT_EQ(topk_recall(p, mask, k), 1.0);
}

TEST(BuildIndexTensor, BudgetComplianceAcrossRho) {
  for (std::size_t n : {17, 64, 100, 256}) {
    const auto c = collect_scores(random_inputs(n, 8, n));
    for (double rho : {0.0, 0.3, 0.5, 0.8, 0.95, 0.99}) {
      const auto tensor = build_index_tensor(estimate_column_sets(c.scores, 32, budget_to_k(rho, n)), 32);
      const double realized = measured_sparsity(expand_to_dense_mask(tensor, n, 32));
      EXPECT_GE(realized, rho - 1.0 / static_cast<double>(n)) << "n=" << n << " rho=" << rho;
    }
  }
}

}  // namespace
}  // namespace pulsecol
