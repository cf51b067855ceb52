// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pulsecol/matrix.hpp"

namespace pulsecol {

/// Floating-point width used for score and softmax accumulation.
enum class Precision { kFloat64, kFloat32 };

/// Query/key/value matrices for one (layer, head) at one denoising step.
///
/// All three share the shape n x d_h. Validation is explicit so that
/// hot paths can skip it once a caller has checked.
struct AttentionInputs {
  Matrix q;
  Matrix k;
  Matrix v;

  std::size_t seq_len() const noexcept { return q.rows(); }
  std::size_t head_dim() const noexcept { return q.cols(); }

  /// Throws InvalidInput on mismatched shapes, empty inputs, or non-finite entries.
  void validate() const;
};

/// Binary n x n matrix; bit (i, j) set means query i may attend key j.
class DenseMask {
 public:
  DenseMask() = default;
  explicit DenseMask(std::size_t n) : n_(n), bits_(n * n, 0) {}

  static DenseMask ones(std::size_t n);

  std::size_t size() const noexcept { return n_; }

  bool test(std::size_t i, std::size_t j) const noexcept { return bits_[i * n_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool on = true) noexcept {
    bits_[i * n_ + j] = on ? 1 : 0;
  }
  std::span<const std::uint8_t> row(std::size_t i) const noexcept {
    return {bits_.data() + i * n_, n_};
  }

  std::size_t count() const noexcept;
  std::size_t row_count(std::size_t i) const noexcept;

  /// Entrywise OR with another mask of the same size.
  DenseMask& operator|=(const DenseMask& other);
  bool operator==(const DenseMask&) const = default;

  /// Throws InvalidMask if any row is empty or the size differs from `n`.
  void validate(std::size_t n) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Q K^T / sqrt(d_h).
Matrix attention_logits(const AttentionInputs& inputs);

/// Numerically stable in-place softmax of one row (max subtraction).
void softmax_row(std::span<double> row);

/// softmax(Q K^T / sqrt(d_h)) V computed row by row with O(n) scratch.
Matrix dense_attention(const AttentionInputs& inputs);

/// Same as dense_attention but keys outside the mask are dropped from each
/// row's softmax instead of being assigned -inf logits.
Matrix masked_attention(const AttentionInputs& inputs, const DenseMask& mask);

/// 1 - nnz(mask) / n^2.
double measured_sparsity(const DenseMask& mask);

}  // namespace pulsecol
