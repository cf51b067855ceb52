// SPDX-License-Identifier: Apache-2.0
#include "pulsecol/baselines.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include "detail.hpp"
#include "pulsecol/error.hpp"

namespace pulsecol {

std::string_view to_string(PatternKind kind) noexcept {
  switch (kind) {
    case PatternKind::kColumn: return "column";
    case PatternKind::kBlock: return "block";
    case PatternKind::kWindow: return "window";
    case PatternKind::kStreaming: return "streaming";
    case PatternKind::kFull: return "full";
  }
  return "unknown";
}

PatternKind parse_pattern_kind(std::string_view name) {
  if (name == "column") return PatternKind::kColumn;
  if (name == "block") return PatternKind::kBlock;
  if (name == "window") return PatternKind::kWindow;
  if (name == "streaming") return PatternKind::kStreaming;
  if (name == "full") return PatternKind::kFull;
  throw InvalidInput("unknown pattern '" + std::string(name) +
                     "' (expected column, block, window, streaming or full)");
}

std::size_t BlockGrid::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

DenseMask block_mask(const BlockGrid& grid, std::size_t n) {
  if (grid.block_size() == 0 || grid.block_size() * grid.num_blocks() < n) {
    throw InvalidInput("block grid covers fewer than " + std::to_string(n) + " tokens");
  }
  DenseMask mask(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bi = grid.block_of(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (grid.test(bi, grid.block_of(j))) mask.set(i, j);
    }
  }
  mask.validate(n);
  return mask;
}

BlockGrid block_topk_from_scores(const ScoreMap& scores, std::size_t block_size, double rho) {
  if (block_size == 0) throw InvalidInput("block size must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw InvalidBudget("sparsity must lie in [0, 1)");
  const std::size_t n = scores.size();
  const std::size_t blocks = (n + block_size - 1) / block_size;
  const std::size_t keep = std::clamp<std::size_t>(
      static_cast<std::size_t>(detail::tolerant_ceil((1.0 - rho) * static_cast<double>(blocks))),
      1, blocks);

  Matrix pooled(blocks, blocks);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = scores.probs.row(i);
    auto dst = pooled.row(i / block_size);
    for (std::size_t j = 0; j < n; ++j) dst[j / block_size] += p[j];
  }
  const auto extent = [&](std::size_t b) {
    return static_cast<double>(std::min(block_size, n - b * block_size));
  };
  BlockGrid grid(blocks, block_size);
  for (std::size_t a = 0; a < blocks; ++a) {
    auto row = pooled.row(a);
    for (std::size_t b = 0; b < blocks; ++b) row[b] /= extent(a) * extent(b);
    for (const auto b : select_topk(row, keep)) grid.set(a, b);
  }
  return grid;
}

DenseMask sliding_window_mask(std::size_t n, std::size_t window) {
  if (window == 0) throw InvalidInput("window must be at least 1");
  const std::size_t half = window / 2;
  DenseMask mask(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    for (std::size_t j = lo; j <= hi; ++j) mask.set(i, j);
  }
  return mask;
}

DenseMask streaming_mask(std::size_t n, std::size_t window, double sink_frac) {
  if (!(sink_frac >= 0.0 && sink_frac <= 1.0)) throw InvalidInput("sink fraction must lie in [0, 1]");
  DenseMask mask = sliding_window_mask(n, window);
  const std::size_t sinks = std::min(
      n, static_cast<std::size_t>(detail::tolerant_ceil(sink_frac * static_cast<double>(n))));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < sinks; ++j) mask.set(i, j);
  }
  return mask;
}

std::vector<StepMode> skip_then_sparse(std::size_t total_steps, double skip_frac) {
  if (!(skip_frac >= 0.0 && skip_frac < 1.0)) throw InvalidInput("skip fraction must lie in [0, 1)");
  const std::size_t full = std::min(
      total_steps,
      static_cast<std::size_t>(detail::tolerant_ceil(skip_frac * static_cast<double>(total_steps))));
  std::vector<StepMode> modes(total_steps, StepMode::kSparse);
  std::fill_n(modes.begin(), full, StepMode::kFull);
  return modes;
}

}  // namespace pulsecol
