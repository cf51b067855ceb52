// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "pulsecol/attention.hpp"
#include "pulsecol/pattern_estimator.hpp"

namespace pulsecol {

/// Sparsity pattern families selectable by name.
enum class PatternKind { kColumn, kBlock, kWindow, kStreaming, kFull };

std::string_view to_string(PatternKind kind) noexcept;
/// "column", "block", "window", "streaming" or "full"; throws InvalidInput otherwise.
PatternKind parse_pattern_kind(std::string_view name);

/// Block-level binary matrix; token (i, j) is enabled iff block pair
/// (i / block_size, j / block_size) is.
class BlockGrid {
 public:
  BlockGrid() = default;
  BlockGrid(std::size_t num_blocks, std::size_t block_size)
      : num_blocks_(num_blocks), block_size_(block_size), bits_(num_blocks * num_blocks, 0) {}

  std::size_t num_blocks() const noexcept { return num_blocks_; }
  std::size_t block_size() const noexcept { return block_size_; }
  std::size_t block_of(std::size_t token) const noexcept { return token / block_size_; }

  bool test(std::size_t a, std::size_t b) const noexcept { return bits_[a * num_blocks_ + b] != 0; }
  void set(std::size_t a, std::size_t b, bool on = true) noexcept {
    bits_[a * num_blocks_ + b] = on ? 1 : 0;
  }
  std::size_t count() const noexcept;

 private:
  std::size_t num_blocks_ = 0;
  std::size_t block_size_ = 1;
  std::vector<std::uint8_t> bits_;
};

/// Expands a block grid to an n x n token mask. Throws InvalidInput when the
/// grid does not cover n tokens and InvalidMask when a row ends up empty.
DenseMask block_mask(const BlockGrid& grid, std::size_t n);

/// Block top-k surrogate for SparseD: mean-pool P over block pairs, keep the
/// ceil((1 - rho) B) best block columns per block row (lower index on ties).
BlockGrid block_topk_from_scores(const ScoreMap& scores, std::size_t block_size, double rho);

/// Symmetric window: (i, j) enabled iff |i - j| <= floor(w / 2).
DenseMask sliding_window_mask(std::size_t n, std::size_t window);

/// Sliding window plus the first ceil(sink_frac * n) key columns for every query.
DenseMask streaming_mask(std::size_t n, std::size_t window, double sink_frac);

enum class StepMode { kFull, kSparse };

/// Per-step attention mode of the skip-then-sparse baseline, indexed by
/// t - 1: the first ceil(skip_frac * T) steps are full.
std::vector<StepMode> skip_then_sparse(std::size_t total_steps, double skip_frac);

}  // namespace pulsecol
