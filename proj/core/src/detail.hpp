// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <thread>
#include <vector>

#include "pulsecol/attention.hpp"

namespace pulsecol::detail {

template <typename T>
inline T dot(const T* a, const T* b, std::size_t d) noexcept {
  T s = 0;
  for (std::size_t i = 0; i < d; ++i) s += a[i] * b[i];
  return s;
}

inline double logit_scale(std::size_t head_dim) noexcept {
  return 1.0 / std::sqrt(static_cast<double>(head_dim));
}

// Fills `probs` with the softmax of query row `i` over the keys accepted by
// `keep`; rejected keys get probability 0. Every attention path that needs
// P goes through here so their results agree bit for bit.
template <typename Keep>
void row_probabilities(const AttentionInputs& in, std::size_t i, std::span<double> probs,
                       Keep keep) {
  const std::size_t n = in.seq_len();
  const std::size_t d = in.head_dim();
  const double scale = logit_scale(d);
  const double* q = in.q.row(i).data();
  double row_max = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (!keep(j)) {
      probs[j] = 0.0;
      continue;
    }
    const double z = dot(q, in.k.row(j).data(), d) * scale;
    probs[j] = z;
    if (z > row_max) row_max = z;
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!keep(j)) continue;
    probs[j] = std::exp(probs[j] - row_max);
    sum += probs[j];
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < n; ++j) {
    if (keep(j)) probs[j] *= inv;
  }
}

// out_row = sum_j probs[j] * V[j], skipping zero-probability keys that
// `keep` rejected.
template <typename Keep>
void weighted_values(const AttentionInputs& in, std::span<const double> probs,
                     std::span<double> out_row, Keep keep) {
  const std::size_t d = in.head_dim();
  for (auto& x : out_row) x = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (!keep(j)) continue;
    const double p = probs[j];
    const double* v = in.v.row(j).data();
    for (std::size_t c = 0; c < d; ++c) out_row[c] += p * v[c];
  }
}

struct KeepAll {
  bool operator()(std::size_t) const noexcept { return true; }
};

// Runs fn(begin, end) over [0, count) split into `threads` contiguous chunks.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    fn(std::size_t{0}, count);
    return;
  }
  threads = std::min(threads, count);
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  const std::size_t chunk = (count + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t b = t * chunk;
    const std::size_t e = std::min(count, b + chunk);
    if (b >= e) break;
    workers.emplace_back([&fn, b, e] { fn(b, e); });
  }
}

// floor/ceil that forgive binary representation error, so that
// (1 - 0.8) * 1000 floors to 200 and 0.3 * 10 to 3.
inline double tolerant_floor(double x) noexcept { return std::floor(x + 1e-9); }
inline double tolerant_ceil(double x) noexcept { return std::ceil(x - 1e-9); }

}  // namespace pulsecol::detail
