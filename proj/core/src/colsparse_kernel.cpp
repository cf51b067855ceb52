// SPDX-License-Identifier: Apache-2.0
#include "pulsecol/colsparse_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <string>
#include <vector>

#include "detail.hpp"
#include "pulsecol/error.hpp"

namespace pulsecol {

SparseIndexTensor SparseIndexTensor::full(std::size_t seq_len, std::size_t block_size) {
  if (seq_len == 0 || block_size == 0) throw InvalidIndex("empty sequence or block size");
  const std::size_t blocks = (seq_len + block_size - 1) / block_size;
  SparseIndexTensor t(blocks, seq_len);
  for (std::size_t b = 0; b < blocks; ++b) {
    auto r = t.row(b);
    for (std::size_t j = 0; j < seq_len; ++j) r[j] = static_cast<Index>(j);
  }
  return t;
}

void SparseIndexTensor::validate(std::size_t seq_len, std::size_t block_size) const {
  if (block_size == 0) throw InvalidIndex("block size must be positive");
  const std::size_t expected = (seq_len + block_size - 1) / block_size;
  if (num_blocks_ != expected) {
    throw InvalidIndex("index tensor has " + std::to_string(num_blocks_) +
                       " rows, expected ceil(n / B_M) = " + std::to_string(expected));
  }
  if (cols_per_block_ == 0 || cols_per_block_ > seq_len) {
    throw InvalidIndex("n_s must lie in [1, n]");
  }
  for (std::size_t b = 0; b < num_blocks_; ++b) {
    const auto r = row(b);
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (r[c] >= seq_len) {
        throw InvalidIndex("index " + std::to_string(r[c]) + " out of range in block " +
                           std::to_string(b));
      }
      if (c > 0 && r[c] <= r[c - 1]) {
        throw InvalidIndex("index row " + std::to_string(b) + " is not strictly increasing");
      }
    }
  }
}

void KernelConfig::validate() const {
  if (block_m == 0 || block_n == 0) throw InvalidInput("B_M and B_N must be positive");
}

template <typename Acc>
OnlineSoftmaxState<Acc>::OnlineSoftmaxState(std::size_t capacity, std::size_t d)
    : rows(capacity), dim(d), max(capacity), denom(capacity), acc(capacity * d) {
  reset(capacity);
}

template <typename Acc>
void OnlineSoftmaxState<Acc>::reset(std::size_t active_rows) {
  rows = active_rows;
  std::fill(max.begin(), max.end(), -std::numeric_limits<Acc>::infinity());
  std::fill(denom.begin(), denom.end(), Acc{0});
  std::fill(acc.begin(), acc.end(), Acc{0});
}

template <typename Acc>
void OnlineSoftmaxState<Acc>::absorb(std::span<Acc> scores, std::span<const Acc> values,
                                     std::size_t width) {
  for (std::size_t r = 0; r < rows; ++r) {
    Acc* s = scores.data() + r * width;
    Acc tile_max = -std::numeric_limits<Acc>::infinity();
    for (std::size_t c = 0; c < width; ++c) tile_max = std::max(tile_max, s[c]);
    Acc tile_sum = 0;
    for (std::size_t c = 0; c < width; ++c) {
      s[c] = std::exp(s[c] - tile_max);
      tile_sum += s[c];
    }
    const Acc new_max = std::max(max[r], tile_max);
    const Acc old_scale = std::exp(max[r] - new_max);
    const Acc tile_scale = std::exp(tile_max - new_max);
    denom[r] = old_scale * denom[r] + tile_scale * tile_sum;

    Acc* a = acc.data() + r * dim;
    for (std::size_t k = 0; k < dim; ++k) a[k] *= old_scale;
    for (std::size_t c = 0; c < width; ++c) {
      const Acc p = tile_scale * s[c];
      const Acc* v = values.data() + c * dim;
      for (std::size_t k = 0; k < dim; ++k) a[k] += p * v[k];
    }
    max[r] = new_max;
  }
}

template <typename Acc>
void OnlineSoftmaxState<Acc>::finalize(std::span<double> out) const {
  for (std::size_t r = 0; r < rows; ++r) {
    const Acc inv = Acc{1} / denom[r];
    const Acc* a = acc.data() + r * dim;
    for (std::size_t k = 0; k < dim; ++k) out[r * dim + k] = static_cast<double>(a[k] * inv);
  }
}

template struct OnlineSoftmaxState<double>;
template struct OnlineSoftmaxState<float>;

namespace {

template <typename Acc>
KernelStats run_blocks(const AttentionInputs& in, const SparseIndexTensor& sparse,
                       const KernelConfig& cfg, std::size_t first, std::size_t last,
                       Matrix& out) {
  const std::size_t n = in.seq_len();
  const std::size_t d = in.head_dim();
  const std::size_t n_s = sparse.cols_per_block();
  const Acc scale = static_cast<Acc>(detail::logit_scale(d));

  std::vector<Acc> q_block(cfg.block_m * d);
  std::vector<Acc> k_tile(cfg.block_n * d);
  std::vector<Acc> v_tile(cfg.block_n * d);
  std::vector<Acc> scores(cfg.block_m * cfg.block_n);
  OnlineSoftmaxState<Acc> state(cfg.block_m, d);
  KernelStats stats;

  for (std::size_t b = first; b < last; ++b) {
    const std::size_t row0 = b * cfg.block_m;
    const std::size_t rows = std::min(cfg.block_m, n - row0);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto src = in.q.row(row0 + r);
      std::copy(src.begin(), src.end(), q_block.begin() + r * d);
    }
    state.reset(rows);
    const auto idx = sparse.row(b);

    for (std::size_t t0 = 0; t0 < n_s; t0 += cfg.block_n) {
      const std::size_t width = std::min(cfg.block_n, n_s - t0);
      for (std::size_t c = 0; c < width; ++c) {
        const std::size_t key = idx[t0 + c];
        const auto ks = in.k.row(key);
        const auto vs = in.v.row(key);
        std::copy(ks.begin(), ks.end(), k_tile.begin() + c * d);
        std::copy(vs.begin(), vs.end(), v_tile.begin() + c * d);
      }
      for (std::size_t r = 0; r < rows; ++r) {
        const Acc* q = q_block.data() + r * d;
        Acc* s = scores.data() + r * width;
        for (std::size_t c = 0; c < width; ++c) {
          s[c] = detail::dot(q, k_tile.data() + c * d, d) * scale;
        }
      }
      state.absorb(std::span<Acc>(scores.data(), rows * width),
                   std::span<const Acc>(v_tile.data(), width * d), width);
      stats.score_evals += rows * width;
      stats.bytes_gathered += 2 * width * d * sizeof(Acc);
      ++stats.tiles;
    }
    state.finalize(std::span<double>(out.row(row0).data(), rows * d));
  }
  return stats;
}

}  // namespace

Matrix column_sparse_forward(const AttentionInputs& inputs, const SparseIndexTensor& sparse,
                             const KernelConfig& cfg, KernelStats* stats) {
  inputs.validate();
  cfg.validate();
  const std::size_t n = inputs.seq_len();
  sparse.validate(n, cfg.block_m);

  Matrix out(n, inputs.head_dim());
  KernelStats total;
  std::mutex merge;
  detail::parallel_for(sparse.num_blocks(), cfg.threads, [&](std::size_t b, std::size_t e) {
    const KernelStats local = cfg.accumulation == Precision::kFloat32
                                  ? run_blocks<float>(inputs, sparse, cfg, b, e, out)
                                  : run_blocks<double>(inputs, sparse, cfg, b, e, out);
    std::lock_guard lock(merge);
    total += local;
  });
  if (stats != nullptr) *stats += total;
  return out;
}

DenseMask expand_to_dense_mask(const SparseIndexTensor& sparse, std::size_t seq_len,
                               std::size_t block_m) {
  sparse.validate(seq_len, block_m);
  DenseMask mask(seq_len);
  for (std::size_t i = 0; i < seq_len; ++i) {
    for (const auto j : sparse.row(i / block_m)) mask.set(i, j);
  }
  return mask;
}

}  // namespace pulsecol
