// SPDX-License-Identifier: Apache-2.0
#include "pulsecol/recall.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "pulsecol/error.hpp"

namespace pulsecol {

double topk_recall(const ScoreMap& scores, const DenseMask& mask, std::size_t k) {
  const std::size_t n = scores.size();
  if (mask.size() != n) throw InvalidMask("mask and score map sizes differ");
  if (k == 0 || k > n) throw InvalidBudget("recall k must lie in [1, n]");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto oracle = select_topk(scores.probs.row(i), k);
    const auto bits = mask.row(i);
    const auto hits = std::count_if(oracle.begin(), oracle.end(),
                                    [&](ColumnIndex j) { return bits[j] != 0; });
    total += static_cast<double>(hits) / static_cast<double>(k);
  }
  return total / static_cast<double>(n);
}

ScoreMap synthetic_column_scores(const SyntheticMapSpec& spec) {
  const std::size_t n = spec.seq_len;
  if (n == 0 || spec.group_size == 0) throw InvalidInput("empty synthetic map");
  if (spec.hot_columns == 0 || spec.hot_columns > n) {
    throw InvalidInput("hot column count must lie in [1, n]");
  }
  if (!(spec.hot_mass > 0.0 && spec.hot_mass <= 1.0)) {
    throw InvalidInput("hot mass must lie in (0, 1]");
  }
  const double hot_mass = spec.hot_columns == n ? 1.0 : spec.hot_mass;

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> hot_weight(0.5, 1.5);
  std::uniform_real_distribution<double> noise(0.0, 1.0);
  std::vector<std::size_t> pool(n);
  std::vector<std::uint8_t> is_hot(n);

  ScoreMap map{Matrix(n, n)};
  for (std::size_t g0 = 0; g0 < n; g0 += spec.group_size) {
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::fill(is_hot.begin(), is_hot.end(), std::uint8_t{0});
    for (std::size_t c = 0; c < spec.hot_columns; ++c) {
      std::uniform_int_distribution<std::size_t> pick(c, n - 1);
      std::swap(pool[c], pool[pick(rng)]);
      is_hot[pool[c]] = 1;
    }
    const std::size_t g1 = std::min(n, g0 + spec.group_size);
    for (std::size_t i = g0; i < g1; ++i) {
      auto row = map.probs.row(i);
      double hot_sum = 0.0;
      double cold_sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = is_hot[j] ? hot_weight(rng) : noise(rng);
        (is_hot[j] ? hot_sum : cold_sum) += row[j];
      }
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = is_hot[j] ? row[j] * hot_mass / hot_sum
                           : (cold_sum > 0.0 ? row[j] * (1.0 - hot_mass) / cold_sum : 0.0);
      }
    }
  }
  return map;
}

}  // namespace pulsecol
