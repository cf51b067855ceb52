// SPDX-License-Identifier: Apache-2.0
#include "pulsecol/pattern_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "detail.hpp"
#include "pulsecol/error.hpp"

namespace pulsecol {

void ScoreMap::validate() const {
  if (probs.rows() == 0 || probs.rows() != probs.cols()) {
    throw InvalidInput("score map must be a non-empty square matrix");
  }
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    double sum = 0.0;
    for (double p : probs.row(i)) {
      if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("score map entries must lie in [0, 1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-5) {
      throw InvalidInput("score map row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

namespace {

// Single-precision scoring path: logits and softmax in float, output from
// the float probabilities so that P and the output stay consistent.
void float_row_probabilities(const AttentionInputs& in, std::size_t i,
                             std::span<double> probs, std::vector<float>& scratch) {
  const std::size_t n = in.seq_len();
  const std::size_t d = in.head_dim();
  const float scale = static_cast<float>(detail::logit_scale(d));
  float row_max = -std::numeric_limits<float>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    float s = 0.0f;
    for (std::size_t c = 0; c < d; ++c) {
      s += static_cast<float>(in.q(i, c)) * static_cast<float>(in.k(j, c));
    }
    scratch[j] = s * scale;
    row_max = std::max(row_max, scratch[j]);
  }
  float sum = 0.0f;
  for (std::size_t j = 0; j < n; ++j) {
    scratch[j] = std::exp(scratch[j] - row_max);
    sum += scratch[j];
  }
  for (std::size_t j = 0; j < n; ++j) probs[j] = static_cast<double>(scratch[j] / sum);
}

}  // namespace

ScoreCollection collect_scores(const AttentionInputs& inputs, Precision precision) {
  inputs.validate();
  const std::size_t n = inputs.seq_len();
  ScoreCollection result{ScoreMap{Matrix(n, n)}, Matrix(n, inputs.head_dim())};
  std::vector<float> scratch(precision == Precision::kFloat32 ? n : 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto probs = result.scores.probs.row(i);
    if (precision == Precision::kFloat32) {
      float_row_probabilities(inputs, i, probs, scratch);
    } else {
      detail::row_probabilities(inputs, i, probs, detail::KeepAll{});
    }
    detail::weighted_values(inputs, probs, result.output.row(i), detail::KeepAll{});
  }
  return result;
}

Matrix group_key_scores(const ScoreMap& scores, std::size_t group_size) {
  if (group_size == 0) throw InvalidInput("group size must be positive");
  const std::size_t n = scores.size();
  const std::size_t groups = (n + group_size - 1) / group_size;
  Matrix out(groups, n);
  for (std::size_t u = 0; u < groups; ++u) {
    const std::size_t begin = u * group_size;
    const std::size_t end = std::min(n, begin + group_size);
    auto s = out.row(u);
    for (std::size_t i = begin; i < end; ++i) {
      const auto p = scores.probs.row(i);
      for (std::size_t j = 0; j < n; ++j) s[j] += p[j];
    }
    const double inv = 1.0 / static_cast<double>(end - begin);
    for (auto& x : s) x *= inv;
  }
  return out;
}

GroupScoreCollection collect_group_scores(const AttentionInputs& inputs,
                                          std::size_t group_size) {
  inputs.validate();
  if (group_size == 0) throw InvalidInput("group size must be positive");
  const std::size_t n = inputs.seq_len();
  const std::size_t groups = (n + group_size - 1) / group_size;
  GroupScoreCollection result{Matrix(groups, n), Matrix(n, inputs.head_dim())};
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    detail::row_probabilities(inputs, i, probs, detail::KeepAll{});
    detail::weighted_values(inputs, probs, result.output.row(i), detail::KeepAll{});
    auto s = result.group_scores.row(i / group_size);
    for (std::size_t j = 0; j < n; ++j) s[j] += probs[j];
  }
  for (std::size_t u = 0; u < groups; ++u) {
    const std::size_t size = std::min(group_size, n - u * group_size);
    const double inv = 1.0 / static_cast<double>(size);
    for (auto& x : result.group_scores.row(u)) x *= inv;
  }
  return result;
}

std::vector<ColumnIndex> select_topk(std::span<const double> scores, std::size_t k) {
  const std::size_t n = scores.size();
  if (k == 0 || k > n) {
    throw InvalidBudget("top-k needs 1 <= k <= n (k=" + std::to_string(k) +
                        ", n=" + std::to_string(n) + ")");
  }
  std::vector<ColumnIndex> order(n);
  std::iota(order.begin(), order.end(), ColumnIndex{0});
  const auto better = [&](ColumnIndex a, ColumnIndex b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  if (k < n) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     order.end(), better);
  }
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

std::size_t budget_to_k(double rho, std::size_t n) {
  if (!(rho >= 0.0 && rho < 1.0)) throw InvalidBudget("sparsity must lie in [0, 1)");
  const double keep = detail::tolerant_floor((1.0 - rho) * static_cast<double>(n));
  return std::max<std::size_t>(1, std::min(n, static_cast<std::size_t>(keep)));
}

GroupColumnSets estimate_column_sets(const Matrix& group_scores, std::size_t group_size,
                                     std::size_t k) {
  GroupColumnSets sets;
  sets.seq_len = group_scores.cols();
  sets.group_size = group_size;
  sets.scores = group_scores;
  sets.selected.reserve(group_scores.rows());
  for (std::size_t u = 0; u < group_scores.rows(); ++u) {
    sets.selected.push_back(select_topk(group_scores.row(u), k));
  }
  return sets;
}

GroupColumnSets estimate_column_sets(const ScoreMap& scores, std::size_t group_size,
                                     std::size_t k) {
  return estimate_column_sets(group_key_scores(scores, group_size), group_size, k);
}

SparseIndexTensor build_index_tensor(const GroupColumnSets& sets, std::size_t block_m) {
  if (sets.group_size != block_m) {
    throw InvalidInput("query group size " + std::to_string(sets.group_size) +
                       " must equal the kernel block size " + std::to_string(block_m));
  }
  if (sets.selected.empty()) throw InvalidInput("no column sets to convert");
  const std::size_t n_s = sets.selected.front().size();
  SparseIndexTensor tensor(sets.num_groups(), n_s);
  for (std::size_t u = 0; u < sets.num_groups(); ++u) {
    const auto& c = sets.selected[u];
    if (c.size() != n_s) throw InvalidInput("column sets must share one size k");
    auto row = tensor.row(u);
    std::copy(c.begin(), c.end(), row.begin());
    std::sort(row.begin(), row.end());
  }
  tensor.validate(sets.seq_len, block_m);
  return tensor;
}

}  // namespace pulsecol
