// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pulsecol/attention.hpp"
#include "pulsecol/baselines.hpp"
#include "pulsecol/colsparse_kernel.hpp"
#include "pulsecol/matrix.hpp"
#include "pulsecol/refresh_schedule.hpp"

namespace pulsecol {

using TokenId = std::int32_t;

/// Token sequence of a denoising run. Positions holding the mask id are the
/// masked set; prompt positions [0, prompt_len) never hold it.
struct DenoisingState {
  std::vector<TokenId> tokens;
  std::size_t prompt_len = 0;
  std::size_t step = 1;
  TokenId mask_id = 0;

  std::size_t size() const noexcept { return tokens.size(); }
  std::vector<std::size_t> masked_positions() const;
  std::size_t num_masked() const noexcept;
};

/// Prompt followed by gen_len mask tokens.
DenoisingState init_state(std::vector<TokenId> prompt, std::size_t gen_len, TokenId mask_id);

struct ToyModelConfig {
  std::uint64_t seed = 0;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t head_dim = 16;
  std::size_t vocab = 64;  // the last id is reserved for the mask token
  std::size_t max_len = 512;
  double qk_gain = 2.0;    // widens the logit spread so attention is peaked
};

/// Small seeded bidirectional transformer used to drive the pipeline.
/// Weights are fixed at construction; forward passes are deterministic.
class ToyModel {
 public:
  explicit ToyModel(const ToyModelConfig& config);

  const ToyModelConfig& config() const noexcept { return config_; }
  std::size_t model_dim() const noexcept { return config_.heads * config_.head_dim; }
  TokenId mask_id() const noexcept { return static_cast<TokenId>(config_.vocab - 1); }

  struct Layer {
    Matrix wq, wk, wv, wo;  // model_dim x model_dim
  };

  const Matrix& token_embedding() const noexcept { return token_embedding_; }
  const Matrix& position_embedding() const noexcept { return position_embedding_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

 private:
  ToyModelConfig config_;
  Matrix token_embedding_;     // vocab x model_dim
  Matrix position_embedding_;  // max_len x model_dim
  std::vector<Layer> layers_;
};

/// Computes the attention output of one (layer, head).
using HeadAttention =
    std::function<Matrix(std::size_t layer, std::size_t head, const AttentionInputs& inputs)>;

HeadAttention dense_head_attention();
/// `patterns` is indexed by layer * heads + head and must outlive the callback.
HeadAttention column_head_attention(const std::vector<SparseIndexTensor>& patterns,
                                    std::size_t heads, KernelConfig cfg);
HeadAttention mask_head_attention(const DenseMask& mask);

/// Per-position token distributions (n x vocab); the mask id gets zero mass.
Matrix model_forward(const ToyModel& model, const DenoisingState& state,
                     const HeadAttention& attention);

/// Commits the `count` most confident masked positions to their argmax
/// token. Confidence is the max probability; ties go to the lower position.
DenoisingState confidence_unmask(const Matrix& distributions, DenoisingState state,
                                 std::size_t count);

/// Tokens unmasked at each step: N / T each, remainder to the earliest steps.
std::vector<std::size_t> unmask_counts(std::size_t gen_len, std::size_t total_steps);

struct RunConfig {
  std::size_t total_steps = 16;  // T
  std::size_t prompt_len = 16;
  std::size_t gen_len = 32;
  double rho = 0.8;
  RefreshSchedule schedule = {};
  PatternKind pattern = PatternKind::kColumn;
  std::size_t group_size = 32;  // also the kernel query block
  std::size_t block_n = 16;
  std::size_t block_size = 32;  // block baseline
  std::size_t window = 256;
  double sink_frac = 0.1;
  double skip_frac = 0.2;
  std::size_t recall_k = 8;
  bool track_recall = false;  // also score stale patterns at reuse steps
  std::uint64_t seed = 0;     // prompt tokens

  void validate() const;
};

struct StepMetrics {
  std::size_t step = 0;
  std::string stage;
  std::string mode;
  double realized_sparsity = 0.0;  // mean over (layer, head)
  std::optional<double> recall;    // mean over (layer, head)
  std::uint64_t score_evals = 0;
  std::size_t unmasked = 0;
};

struct RunMetrics {
  std::vector<StepMetrics> steps;
  std::size_t full_attention_steps = 0;
  std::optional<double> mean_recall;  // over layers, heads and measured steps
};

struct RunResult {
  std::vector<TokenId> tokens;
  RunMetrics metrics;
};

RunResult run_denoising(const ToyModel& model, const RunConfig& config);

}  // namespace pulsecol
