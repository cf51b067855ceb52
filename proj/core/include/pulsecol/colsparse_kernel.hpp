// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pulsecol/attention.hpp"
#include "pulsecol/matrix.hpp"

namespace pulsecol {

/// Per-query-block lists of selected key/value columns.
///
/// Row i holds the n_s key positions visible to query block i. Rows are
/// strictly increasing and every entry lies in [0, seq_len).
class SparseIndexTensor {
 public:
  using Index = std::uint32_t;

  SparseIndexTensor() = default;
  SparseIndexTensor(std::size_t num_blocks, std::size_t cols_per_block)
      : num_blocks_(num_blocks), cols_per_block_(cols_per_block),
        indices_(num_blocks * cols_per_block, 0) {}

  /// Every block attends to [0, seq_len).
  static SparseIndexTensor full(std::size_t seq_len, std::size_t block_size);

  std::size_t num_blocks() const noexcept { return num_blocks_; }
  std::size_t cols_per_block() const noexcept { return cols_per_block_; }

  std::span<Index> row(std::size_t block) noexcept {
    return {indices_.data() + block * cols_per_block_, cols_per_block_};
  }
  std::span<const Index> row(std::size_t block) const noexcept {
    return {indices_.data() + block * cols_per_block_, cols_per_block_};
  }

  bool operator==(const SparseIndexTensor&) const = default;

  /// Throws InvalidIndex unless the tensor is well formed for `seq_len`
  /// tokens split into blocks of `block_size` queries.
  void validate(std::size_t seq_len, std::size_t block_size) const;

 private:
  std::size_t num_blocks_ = 0;
  std::size_t cols_per_block_ = 0;
  std::vector<Index> indices_;
};

struct KernelConfig {
  std::size_t block_m = 32;  // queries per block
  std::size_t block_n = 16;  // gathered keys per tile
  Precision accumulation = Precision::kFloat64;
  std::size_t threads = 1;   // query blocks are split across this many workers

  void validate() const;
};

/// Counters filled in by the kernel; summed over all query blocks.
struct KernelStats {
  std::uint64_t score_evals = 0;    // query-key dot products computed
  std::uint64_t bytes_gathered = 0;  // K and V bytes copied into tile scratch
  std::uint64_t tiles = 0;

  KernelStats& operator+=(const KernelStats& o) noexcept {
    score_evals += o.score_evals;
    bytes_gathered += o.bytes_gathered;
    tiles += o.tiles;
    return *this;
  }
};

/// Running softmax statistics for one query block.
///
/// `max` starts at -inf, `denom` and `acc` at zero. After absorbing any set
/// of score tiles they hold the exact softmax statistics of their union.
template <typename Acc>
struct OnlineSoftmaxState {
  std::size_t rows = 0;  // active rows of the current block
  std::size_t dim = 0;
  std::vector<Acc> max;
  std::vector<Acc> denom;
  std::vector<Acc> acc;  // rows x dim

  OnlineSoftmaxState(std::size_t capacity, std::size_t dim);

  /// Starts a new block with `active_rows` <= capacity query rows.
  void reset(std::size_t active_rows);

  /// Folds in one tile: `scores` is rows x width (already scaled), `values`
  /// is width x dim. `scores` is overwritten with the tile probabilities.
  void absorb(std::span<Acc> scores, std::span<const Acc> values, std::size_t width);

  /// Writes acc / denom for each row into `out` (rows x dim).
  void finalize(std::span<double> out) const;
};

extern template struct OnlineSoftmaxState<double>;
extern template struct OnlineSoftmaxState<float>;

/// Column-sparse attention forward pass.
///
/// Each query block walks its index row in tiles of block_n columns,
/// gathers the referenced K/V rows into scratch, and folds the tile into
/// an online softmax. The n x n score matrix is never formed, and work is
/// proportional to n_s rather than seq_len.
Matrix column_sparse_forward(const AttentionInputs& inputs, const SparseIndexTensor& sparse,
                             const KernelConfig& cfg, KernelStats* stats = nullptr);

/// Token-level mask equivalent to `sparse`: row i enables the columns in
/// block floor(i / block_m).
DenseMask expand_to_dense_mask(const SparseIndexTensor& sparse, std::size_t seq_len,
                               std::size_t block_m);

}  // namespace pulsecol
