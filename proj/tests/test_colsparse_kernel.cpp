// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "pulsecol/colsparse_kernel.hpp"
#include "pulsecol/error.hpp"
#include "pulsecol/pattern_estimator.hpp"

namespace pulsecol {
namespace {

using testing::max_abs_diff;
using testing::random_index_tensor;
using testing::random_inputs;

TEST(ColumnSparseForward, FullIndexSetMatchesDense) {
  const auto in = random_inputs(50, 8, 1);
  const KernelConfig cfg{16, 8};
  const Matrix out = column_sparse_forward(in, SparseIndexTensor::full(50, 16), cfg);
  EXPECT_LT(max_abs_diff(out, dense_attention(in)), 1e-6);
}

TEST(ColumnSparseForward, SingleColumnCopiesValueRow) {
  const auto in = random_inputs(9, 4, 2);
  SparseIndexTensor sparse(3, 1);
  sparse.row(0)[0] = 5;
  sparse.row(1)[0] = 0;
  sparse.row(2)[0] = 8;
  const Matrix out = column_sparse_forward(in, sparse, KernelConfig{4, 4});
  const std::size_t expected[] = {5, 0, 8};
  for (std::size_t i = 0; i < 9; ++i) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(out(i, c), in.v(expected[i / 4], c));
  }
}

TEST(ColumnSparseForward, MatchesGroupMaskOracle) {
  const auto in = random_inputs(256, 32, 3);
  const KernelConfig cfg{32, 16};
  const auto sparse = random_index_tensor(256, 32, 48, 4);
  const Matrix out = column_sparse_forward(in, sparse, cfg);
  const Matrix ref = masked_attention(in, expand_to_dense_mask(sparse, 256, 32));
  EXPECT_LT(max_abs_diff(out, ref), 1e-5);
  // and against the independent long-double oracle
  const DenseMask mask = expand_to_dense_mask(sparse, 256, 32);
  const Matrix slow =
      testing::oracle_attention(in, [&](std::size_t i, std::size_t j) { return mask.test(i, j); });
  EXPECT_LT(max_abs_diff(out, slow), 1e-5);
}

TEST(ColumnSparseForward, Float32AccumulationWithinRelativeTolerance) {
  const auto in = random_inputs(200, 16, 5);
  const auto sparse = random_index_tensor(200, 32, 40, 6);
  KernelConfig cfg{32, 16, Precision::kFloat32};
  const Matrix out = column_sparse_forward(in, sparse, cfg);
  const Matrix ref = masked_attention(in, expand_to_dense_mask(sparse, 200, 32));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double r = ref.data()[i];
    EXPECT_LE(std::abs(out.data()[i] - r), 1e-4 * std::max(1.0, std::abs(r)));
  }
}

TEST(ColumnSparseForward, RandomizedGridMatchesOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + rng() % 90;
    const std::size_t d = 1 + rng() % 12;
    const KernelConfig cfg{1 + rng() % 20, 1 + rng() % 20};
    const std::size_t n_s = 1 + rng() % n;
    const auto in = random_inputs(n, d, rng());
    const auto sparse = random_index_tensor(n, cfg.block_m, n_s, rng());
    const Matrix out = column_sparse_forward(in, sparse, cfg);
    const Matrix ref = masked_attention(in, expand_to_dense_mask(sparse, n, cfg.block_m));
    ASSERT_LT(max_abs_diff(out, ref), 1e-5)
        << "n=" << n << " d=" << d << " bm=" << cfg.block_m << " bn=" << cfg.block_n
        << " n_s=" << n_s;
  }
}

TEST(ColumnSparseForward, TileWidthDoesNotChangeResult) {
  const auto in = random_inputs(96, 16, 7);
  const auto sparse = random_index_tensor(96, 32, 37, 8);
  const Matrix base = column_sparse_forward(in, sparse, KernelConfig{32, 1});
  for (std::size_t bn : {2, 5, 16, 37, 64}) {
    EXPECT_LT(max_abs_diff(base, column_sparse_forward(in, sparse, KernelConfig{32, bn})), 1e-5);
  }
}

TEST(ColumnSparseForward, ThreadedRunIsBitIdentical) {
  const auto in = random_inputs(130, 8, 9);
  const auto sparse = random_index_tensor(130, 16, 20, 10);
  const Matrix one = column_sparse_forward(in, sparse, KernelConfig{16, 8, Precision::kFloat64, 1});
  const Matrix many = column_sparse_forward(in, sparse, KernelConfig{16, 8, Precision::kFloat64, 3});
  EXPECT_EQ(one, many);
}

TEST(ColumnSparseForward, ScoreEvaluationsScaleWithSelectedColumns) {
  const auto in = random_inputs(128, 8, 11);
  for (std::size_t n_s : {1, 7, 64, 128}) {
    KernelStats stats;
    column_sparse_forward(in, random_index_tensor(128, 32, n_s, n_s), KernelConfig{32, 16}, &stats);
    EXPECT_EQ(stats.score_evals, 4u * 32u * n_s);
    EXPECT_EQ(stats.bytes_gathered, 4u * 2u * n_s * 8u * sizeof(double));
  }
  // a partial final block evaluates only its real rows
  const auto odd = random_inputs(70, 8, 12);
  KernelStats stats;
  column_sparse_forward(odd, random_index_tensor(70, 32, 10, 1), KernelConfig{32, 16}, &stats);
  EXPECT_EQ(stats.score_evals, 70u * 10u);
}

TEST(ColumnSparseForward, RejectsMalformedIndices) {
  const auto in = random_inputs(8, 2, 1);
  const KernelConfig cfg{4, 2};
  SparseIndexTensor sparse(2, 2);
  sparse.row(0)[0] = 0;
  sparse.row(0)[1] = 8;  // out of range
  sparse.row(1)[0] = 1;
  sparse.row(1)[1] = 2;
  EXPECT_THROW(column_sparse_forward(in, sparse, cfg), InvalidIndex);
  sparse.row(0)[1] = 0;  // duplicate
  EXPECT_THROW(column_sparse_forward(in, sparse, cfg), InvalidIndex);
  sparse.row(0)[0] = 3;  // decreasing
  sparse.row(0)[1] = 2;
  EXPECT_THROW(column_sparse_forward(in, sparse, cfg), InvalidIndex);
  EXPECT_THROW(column_sparse_forward(in, SparseIndexTensor(3, 2), cfg), InvalidIndex);
  EXPECT_THROW(column_sparse_forward(in, SparseIndexTensor::full(8, 4), KernelConfig{4, 0}),
               InvalidInput);
}

TEST(OnlineSoftmaxState, MatchesUnfusedStatistics) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist(0.0, 4.0);
  const std::size_t rows = 3, dim = 2, total = 23, width = 5;
  std::vector<double> logits(rows * total), values(total * dim);
  for (auto& x : logits) x = dist(rng);
  for (auto& x : values) x = dist(rng);

  OnlineSoftmaxState<double> state(rows, dim);
  for (std::size_t r = 0; r < rows; ++r) EXPECT_EQ(state.max[r], -INFINITY);
  for (std::size_t t0 = 0; t0 < total; t0 += width) {
    const std::size_t w = std::min(width, total - t0);
    std::vector<double> tile(rows * w);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < w; ++c) tile[r * w + c] = logits[r * total + t0 + c];
    }
    state.absorb(tile, std::span<const double>(values.data() + t0 * dim, w * dim), w);
  }
  std::vector<double> out(rows * dim);
  state.finalize(out);

  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < total; ++j) mx = std::max(mx, logits[r * total + j]);
    double ell = 0.0;
    std::vector<double> acc(dim, 0.0);
    for (std::size_t j = 0; j < total; ++j) {
      const double e = std::exp(logits[r * total + j] - mx);
      ell += e;
      for (std::size_t c = 0; c < dim; ++c) acc[c] += e * values[j * dim + c];
    }
    EXPECT_EQ(state.max[r], mx);
    EXPECT_NEAR(state.denom[r] / ell, 1.0, 1e-6);
    for (std::size_t c = 0; c < dim; ++c) EXPECT_NEAR(out[r * dim + c], acc[c] / ell, 1e-9);
  }
}

TEST(ExpandToDenseMask, DirectExpansion) {
  SparseIndexTensor sparse(2, 1);
  sparse.row(0)[0] = 0;
  sparse.row(1)[0] = 3;
  const DenseMask mask = expand_to_dense_mask(sparse, 4, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(mask.test(i, j), j == (i < 2 ? 0u : 3u));
  }
  EXPECT_EQ(expand_to_dense_mask(SparseIndexTensor::full(6, 4), 6, 4), DenseMask::ones(6));
}

TEST(ExpandToDenseMask, SparsityOfUnevenBlocks) {
  const auto sparse = random_index_tensor(10, 4, 2, 3);
  EXPECT_NEAR(measured_sparsity(expand_to_dense_mask(sparse, 10, 4)), 0.8, 1e-12);
}

TEST(ExpandToDenseMask, RowsWithinABlockAreIdentical) {
  const auto sparse = random_index_tensor(40, 8, 5, 2);
  const DenseMask mask = expand_to_dense_mask(sparse, 40, 8);
  for (std::size_t i = 0; i < 40; ++i) {
    const auto first = mask.row((i / 8) * 8);
    const auto r = mask.row(i);
    EXPECT_TRUE(std::equal(r.begin(), r.end(), first.begin()));
  }
}

}  // namespace
}  // namespace pulsecol
