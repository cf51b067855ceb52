// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

#include "pulsecol/attention.hpp"
#include "pulsecol/pattern_estimator.hpp"

namespace pulsecol {

/// Oracle per-token top-k recall: for every query row take the k keys with
/// the highest probability (lower index on ties) and measure the fraction
/// the mask keeps. Averaged uniformly over rows.
double topk_recall(const ScoreMap& scores, const DenseMask& mask, std::size_t k);

/// Parameters for a synthetic column-concentrated attention map.
struct SyntheticMapSpec {
  std::size_t seq_len = 512;
  std::size_t group_size = 32;
  std::size_t hot_columns = 8;   // high-mass key columns per query group
  double hot_mass = 0.9;         // share of each row's mass on the hot columns
  std::uint64_t seed = 0;
};

/// Every query group gets its own randomly placed hot columns; each row
/// spreads hot_mass over them with random weights and the rest as small
/// noise over all other keys. Rows sum to one.
ScoreMap synthetic_column_scores(const SyntheticMapSpec& spec);

}  // namespace pulsecol
