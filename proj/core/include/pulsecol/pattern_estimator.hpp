// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pulsecol/attention.hpp"
#include "pulsecol/colsparse_kernel.hpp"
#include "pulsecol/matrix.hpp"

namespace pulsecol {

using ColumnIndex = SparseIndexTensor::Index;

/// Row-stochastic n x n post-softmax attention probabilities.
struct ScoreMap {
  Matrix probs;

  std::size_t size() const noexcept { return probs.rows(); }

  /// Throws InvalidInput unless square with rows summing to 1 within 1e-5.
  void validate() const;
};

/// Full attention pass that keeps its probabilities for pattern estimation.
struct ScoreCollection {
  ScoreMap scores;
  Matrix output;  // P V, identical to dense_attention
};

/// Full attention that also returns P. `precision` selects the width of the
/// logits/softmax arithmetic used to form P; the output always comes from
/// the same pass.
ScoreCollection collect_scores(const AttentionInputs& inputs,
                               Precision precision = Precision::kFloat64);

/// Per-group mean of P rows: result(u, j) = mean_{i in group u} P(i, j).
/// Groups are contiguous runs of `group_size` queries; the last may be short.
Matrix group_key_scores(const ScoreMap& scores, std::size_t group_size);

/// Streaming variant: accumulates group scores row by row during the full
/// attention pass without materializing P. Memory is O(U n).
struct GroupScoreCollection {
  Matrix group_scores;  // U x n
  Matrix output;
};
GroupScoreCollection collect_group_scores(const AttentionInputs& inputs,
                                          std::size_t group_size);

/// Indices of the k largest scores, ties toward the lower index, returned
/// sorted ascending. Throws InvalidBudget unless 1 <= k <= scores.size().
std::vector<ColumnIndex> select_topk(std::span<const double> scores, std::size_t k);

/// Columns per group that keep a mask within sparsity `rho`:
/// max(1, floor((1 - rho) n)). Throws InvalidBudget unless 0 <= rho < 1.
std::size_t budget_to_k(double rho, std::size_t n);

/// Selected key sets C_u for each contiguous query group.
struct GroupColumnSets {
  std::size_t seq_len = 0;
  std::size_t group_size = 0;
  Matrix scores;  // U x n group key scores
  std::vector<std::vector<ColumnIndex>> selected;

  std::size_t num_groups() const noexcept { return selected.size(); }
};

/// group_key_scores followed by select_topk on every group.
GroupColumnSets estimate_column_sets(const Matrix& group_scores, std::size_t group_size,
                                     std::size_t k);
GroupColumnSets estimate_column_sets(const ScoreMap& scores, std::size_t group_size,
                                     std::size_t k);

/// One index-tensor row per group. `block_m` must equal the group size.
SparseIndexTensor build_index_tensor(const GroupColumnSets& sets, std::size_t block_m);

}  // namespace pulsecol
