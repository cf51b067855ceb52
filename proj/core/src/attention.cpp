// SPDX-License-Identifier: Apache-2.0
#include "pulsecol/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "detail.hpp"
#include "pulsecol/error.hpp"

namespace pulsecol {

void AttentionInputs::validate() const {
  if (q.rows() == 0 || q.cols() == 0) throw InvalidInput("attention inputs are empty");
  if (k.rows() != q.rows() || k.cols() != q.cols() || v.rows() != q.rows() ||
      v.cols() != q.cols()) {
    throw InvalidInput("Q, K and V must share the shape n x d_h");
  }
  for (const Matrix* m : {&q, &k, &v}) {
    for (double x : m->values()) {
      if (!std::isfinite(x)) throw InvalidInput("attention inputs contain non-finite values");
    }
  }
}

DenseMask DenseMask::ones(std::size_t n) {
  DenseMask m(n);
  std::fill(m.bits_.begin(), m.bits_.end(), std::uint8_t{1});
  return m;
}

std::size_t DenseMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::size_t DenseMask::row_count(std::size_t i) const noexcept {
  const auto r = row(i);
  return static_cast<std::size_t>(std::count(r.begin(), r.end(), std::uint8_t{1}));
}

DenseMask& DenseMask::operator|=(const DenseMask& other) {
  if (other.n_ != n_) throw InvalidMask("cannot combine masks of different sizes");
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= other.bits_[i];
  return *this;
}

void DenseMask::validate(std::size_t n) const {
  if (n_ != n) {
    throw InvalidMask("mask is " + std::to_string(n_) + "x" + std::to_string(n_) +
                      " but inputs have " + std::to_string(n) + " tokens");
  }
  for (std::size_t i = 0; i < n_; ++i) {
    if (row_count(i) == 0) throw InvalidMask("mask row " + std::to_string(i) + " is empty");
  }
}

Matrix attention_logits(const AttentionInputs& inputs) {
  inputs.validate();
  const std::size_t n = inputs.seq_len();
  const std::size_t d = inputs.head_dim();
  const double scale = detail::logit_scale(d);
  Matrix z(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* q = inputs.q.row(i).data();
    for (std::size_t j = 0; j < n; ++j) {
      z(i, j) = detail::dot(q, inputs.k.row(j).data(), d) * scale;
    }
  }
  return z;
}

void softmax_row(std::span<double> row) {
  if (row.empty()) return;
  const double row_max = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (auto& x : row) {
    x = std::exp(x - row_max);
    sum += x;
  }
  for (auto& x : row) x /= sum;
}

Matrix dense_attention(const AttentionInputs& inputs) {
  inputs.validate();
  const std::size_t n = inputs.seq_len();
  Matrix out(n, inputs.head_dim());
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    detail::row_probabilities(inputs, i, probs, detail::KeepAll{});
    detail::weighted_values(inputs, probs, out.row(i), detail::KeepAll{});
  }
  return out;
}

Matrix masked_attention(const AttentionInputs& inputs, const DenseMask& mask) {
  inputs.validate();
  const std::size_t n = inputs.seq_len();
  mask.validate(n);
  Matrix out(n, inputs.head_dim());
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto bits = mask.row(i);
    const auto keep = [bits](std::size_t j) { return bits[j] != 0; };
    detail::row_probabilities(inputs, i, probs, keep);
    detail::weighted_values(inputs, probs, out.row(i), keep);
  }
  return out;
}

double measured_sparsity(const DenseMask& mask) {
  const double n = static_cast<double>(mask.size());
  if (n == 0) return 0.0;
  return 1.0 - static_cast<double>(mask.count()) / (n * n);
}

}  // namespace pulsecol
