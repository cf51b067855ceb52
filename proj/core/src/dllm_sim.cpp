// SPDX-License-Identifier: Apache-2.0
#include "pulsecol/dllm_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>

#include "pulsecol/error.hpp"
#include "pulsecol/pattern_estimator.hpp"
#include "pulsecol/recall.hpp"

namespace pulsecol {

std::vector<std::size_t> DenoisingState::masked_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == mask_id) out.push_back(i);
  }
  return out;
}

std::size_t DenoisingState::num_masked() const noexcept {
  return static_cast<std::size_t>(std::count(tokens.begin(), tokens.end(), mask_id));
}

DenoisingState init_state(std::vector<TokenId> prompt, std::size_t gen_len, TokenId mask_id) {
  if (gen_len == 0) throw InvalidInput("generation length must be at least 1");
  if (std::find(prompt.begin(), prompt.end(), mask_id) != prompt.end()) {
    throw InvalidInput("prompt may not contain the mask token");
  }
  DenoisingState s;
  s.prompt_len = prompt.size();
  s.tokens = std::move(prompt);
  s.tokens.resize(s.prompt_len + gen_len, mask_id);
  s.mask_id = mask_id;
  return s;
}

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (auto& x : m.row(i)) x = dist(rng);
  }
  return m;
}

// out = a * b for row-major a (n x p) and b (p x q).
Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double x = a(i, p);
      const auto br = b.row(p);
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += x * br[j];
    }
  }
  return out;
}

Matrix rms_normalize(const Matrix& x) {
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    double ss = 0.0;
    for (double v : r) ss += v * v;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(r.size()) + 1e-6);
    for (auto& v : r) v *= inv;
  }
  return out;
}

Matrix head_slice(const Matrix& m, std::size_t head, std::size_t head_dim) {
  Matrix out(m.rows(), head_dim);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto src = m.row(i).subspan(head * head_dim, head_dim);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

ToyModel::ToyModel(const ToyModelConfig& config) : config_(config) {
  if (config.layers == 0 || config.heads == 0 || config.head_dim == 0 || config.vocab < 2 ||
      config.max_len == 0) {
    throw InvalidInput("toy model dimensions must be positive and vocab >= 2");
  }
  const std::size_t d = model_dim();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  std::mt19937_64 rng(config.seed);
  token_embedding_ = random_matrix(rng, config.vocab, d, 1.0);
  position_embedding_ = random_matrix(rng, config.max_len, d, 0.5);
  layers_.reserve(config.layers);
  for (std::size_t l = 0; l < config.layers; ++l) {
    Layer layer;
    layer.wq = random_matrix(rng, d, d, config.qk_gain * inv_sqrt_d);
    layer.wk = random_matrix(rng, d, d, config.qk_gain * inv_sqrt_d);
    layer.wv = random_matrix(rng, d, d, inv_sqrt_d);
    layer.wo = random_matrix(rng, d, d, inv_sqrt_d);
    layers_.push_back(std::move(layer));
  }
}

HeadAttention dense_head_attention() {
  return [](std::size_t, std::size_t, const AttentionInputs& in) { return dense_attention(in); };
}

HeadAttention column_head_attention(const std::vector<SparseIndexTensor>& patterns,
                                    std::size_t heads, KernelConfig cfg) {
  return [&patterns, heads, cfg](std::size_t layer, std::size_t head,
                                 const AttentionInputs& in) {
    return column_sparse_forward(in, patterns.at(layer * heads + head), cfg);
  };
}

HeadAttention mask_head_attention(const DenseMask& mask) {
  return [&mask](std::size_t, std::size_t, const AttentionInputs& in) {
    return masked_attention(in, mask);
  };
}

Matrix model_forward(const ToyModel& model, const DenoisingState& state,
                     const HeadAttention& attention) {
  const auto& cfg = model.config();
  const std::size_t n = state.size();
  const std::size_t d = model.model_dim();
  if (n == 0 || n > cfg.max_len) {
    throw InvalidInput("sequence length " + std::to_string(n) + " outside [1, " +
                       std::to_string(cfg.max_len) + "]");
  }
  if (!attention) throw InvalidInput("no attention mode given");

  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const TokenId tok = state.tokens[i];
    if (tok < 0 || static_cast<std::size_t>(tok) >= cfg.vocab) {
      throw InvalidInput("token id out of vocabulary at position " + std::to_string(i));
    }
    const auto e = model.token_embedding().row(static_cast<std::size_t>(tok));
    const auto p = model.position_embedding().row(i);
    auto r = x.row(i);
    for (std::size_t c = 0; c < d; ++c) r[c] = e[c] + p[c];
  }

  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const auto& layer = model.layers()[l];
    const Matrix h = rms_normalize(x);
    const Matrix q = matmul(h, layer.wq);
    const Matrix k = matmul(h, layer.wk);
    const Matrix v = matmul(h, layer.wv);
    Matrix heads_out(n, d);
    for (std::size_t hd = 0; hd < cfg.heads; ++hd) {
      const AttentionInputs in{head_slice(q, hd, cfg.head_dim), head_slice(k, hd, cfg.head_dim),
                               head_slice(v, hd, cfg.head_dim)};
      const Matrix o = attention(l, hd, in);
      for (std::size_t i = 0; i < n; ++i) {
        const auto src = o.row(i);
        std::copy(src.begin(), src.end(), heads_out.row(i).begin() + hd * cfg.head_dim);
      }
    }
    const Matrix proj = matmul(heads_out, layer.wo);
    for (std::size_t i = 0; i < n; ++i) {
      auto r = x.row(i);
      const auto pr = proj.row(i);
      for (std::size_t c = 0; c < d; ++c) r[c] += pr[c];
    }
  }

  // Tied output head; the mask token is never predicted.
  const Matrix h = rms_normalize(x);
  const auto mask = static_cast<std::size_t>(model.mask_id());
  Matrix dists(n, cfg.vocab);
  for (std::size_t i = 0; i < n; ++i) {
    auto out = dists.row(i);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < cfg.vocab; ++t) {
      if (t == mask) continue;
      const auto e = model.token_embedding().row(t);
      double z = 0.0;
      for (std::size_t c = 0; c < d; ++c) z += h(i, c) * e[c];
      out[t] = z;
      best = std::max(best, z);
    }
    double sum = 0.0;
    for (std::size_t t = 0; t < cfg.vocab; ++t) {
      if (t == mask) continue;
      out[t] = std::exp(out[t] - best);
      sum += out[t];
    }
    for (auto& p : out) p /= sum;
    out[mask] = 0.0;
  }
  return dists;
}

DenoisingState confidence_unmask(const Matrix& distributions, DenoisingState state,
                                 std::size_t count) {
  auto masked = state.masked_positions();
  if (count > masked.size()) {
    throw InvalidBudget("cannot unmask " + std::to_string(count) + " of " +
                        std::to_string(masked.size()) + " masked positions");
  }
  if (distributions.rows() != state.size()) {
    throw InvalidInput("distribution rows must match the sequence length");
  }
  struct Candidate {
    std::size_t pos;
    double confidence;
    TokenId token;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(masked.size());
  for (const std::size_t i : masked) {
    const auto p = distributions.row(i);
    const auto best = std::max_element(p.begin(), p.end());  // first max wins ties
    candidates.push_back({i, *best, static_cast<TokenId>(best - p.begin())});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.confidence > b.confidence; });
  for (std::size_t c = 0; c < count; ++c) state.tokens[candidates[c].pos] = candidates[c].token;
  return state;
}

std::vector<std::size_t> unmask_counts(std::size_t gen_len, std::size_t total_steps) {
  if (total_steps == 0) throw InvalidInput("T must be at least 1");
  std::vector<std::size_t> counts(total_steps, gen_len / total_steps);
  for (std::size_t t = 0; t < gen_len % total_steps; ++t) ++counts[t];
  return counts;
}

void RunConfig::validate() const {
  if (total_steps == 0) throw InvalidInput("T must be at least 1");
  if (gen_len == 0) throw InvalidInput("generation length must be at least 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw InvalidBudget("sparsity must lie in [0, 1)");
  if (group_size == 0 || block_n == 0 || block_size == 0 || window == 0 || recall_k == 0) {
    throw InvalidInput("group size, tile size, block size, window and recall k must be positive");
  }
  if (!(sink_frac >= 0.0 && sink_frac <= 1.0)) throw InvalidInput("sink fraction must lie in [0, 1]");
  if (!(skip_frac >= 0.0 && skip_frac < 1.0)) throw InvalidInput("skip fraction must lie in [0, 1)");
  if (pattern == PatternKind::kColumn) {
    if (schedule.total_steps != total_steps) {
      throw InvalidInput("refresh schedule was built for a different step count");
    }
    schedule.validate();
  }
}

namespace {

// Per-step accumulation over all (layer, head) attention calls.
struct StepTally {
  double sparsity = 0.0;
  double recall = 0.0;
  std::size_t recall_samples = 0;
  std::size_t calls = 0;
  std::uint64_t score_evals = 0;

  void add_recall(const ScoreMap& scores, const DenseMask& mask, std::size_t k) {
    recall += topk_recall(scores, mask, std::min(k, scores.size()));
    ++recall_samples;
  }
};

}  // namespace

RunResult run_denoising(const ToyModel& model, const RunConfig& config) {
  config.validate();
  const auto& mcfg = model.config();
  const std::size_t n = config.prompt_len + config.gen_len;
  const std::size_t heads = mcfg.heads;
  const std::size_t slots = mcfg.layers * heads;
  const auto n2 = static_cast<std::uint64_t>(n) * n;

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<TokenId> token(0, model.mask_id() - 1);
  std::vector<TokenId> prompt(config.prompt_len);
  for (auto& t : prompt) t = token(rng);
  DenoisingState state = init_state(std::move(prompt), config.gen_len, model.mask_id());

  const auto counts = unmask_counts(config.gen_len, config.total_steps);
  const std::size_t k = budget_to_k(config.rho, n);
  const KernelConfig kcfg{config.group_size, config.block_n, Precision::kFloat64, 1};

  std::vector<SparseIndexTensor> column_patterns(slots);
  std::vector<DenseMask> block_masks(slots);
  bool block_built = false;
  const auto skip_modes = skip_then_sparse(config.total_steps, config.skip_frac);
  DenseMask static_mask;
  if (config.pattern == PatternKind::kWindow) {
    static_mask = sliding_window_mask(n, config.window);
  } else if (config.pattern == PatternKind::kStreaming) {
    static_mask = streaming_mask(n, config.window, config.sink_frac);
  }

  RunResult result;
  double recall_total = 0.0;
  std::size_t recall_samples = 0;

  for (std::size_t t = 1; t <= config.total_steps; ++t) {
    state.step = t;
    StepMetrics m;
    m.step = t;
    StepTally tally;
    HeadAttention attend;

    const auto dense_step = [&](std::size_t, std::size_t, const AttentionInputs& in) {
      ++tally.calls;
      tally.score_evals += n2;
      return dense_attention(in);
    };
    const auto masked_step = [&](const DenseMask& mask, const AttentionInputs& in) {
      ++tally.calls;
      tally.score_evals += mask.count();
      tally.sparsity += measured_sparsity(mask);
      if (config.track_recall) tally.add_recall(collect_scores(in).scores, mask, config.recall_k);
      return masked_attention(in, mask);
    };

    switch (config.pattern) {
      case PatternKind::kFull:
        m.stage = "full";
        m.mode = "dense";
        ++result.metrics.full_attention_steps;
        attend = dense_step;
        break;

      case PatternKind::kColumn: {
        const Stage stage = stage_of(t, config.schedule);
        m.stage = std::string(to_string(stage));
        if (stage == Stage::kRefresh) {
          // The refresh pass both rebuilds the pattern and produces the output.
          m.mode = "dense+estimate";
          ++result.metrics.full_attention_steps;
          attend = [&](std::size_t l, std::size_t h, const AttentionInputs& in) {
            ++tally.calls;
            tally.score_evals += n2;
            ScoreCollection scores = collect_scores(in);
            const auto sets = estimate_column_sets(scores.scores, config.group_size, k);
            auto& pattern = column_patterns[l * heads + h];
            pattern = build_index_tensor(sets, config.group_size);
            tally.add_recall(scores.scores, expand_to_dense_mask(pattern, n, config.group_size),
                             config.recall_k);
            return std::move(scores.output);
          };
        } else {
          m.mode = "column-sparse";
          attend = [&](std::size_t l, std::size_t h, const AttentionInputs& in) {
            const auto& pattern = column_patterns[l * heads + h];
            ++tally.calls;
            tally.sparsity += 1.0 - static_cast<double>(pattern.cols_per_block()) /
                                        static_cast<double>(n);
            if (config.track_recall) {
              tally.add_recall(collect_scores(in).scores,
                               expand_to_dense_mask(pattern, n, config.group_size),
                               config.recall_k);
            }
            KernelStats stats;
            Matrix out = column_sparse_forward(in, pattern, kcfg, &stats);
            tally.score_evals += stats.score_evals;
            return out;
          };
        }
        break;
      }

      case PatternKind::kBlock:
        if (skip_modes[t - 1] == StepMode::kFull) {
          m.stage = "skip";
          m.mode = "dense";
          ++result.metrics.full_attention_steps;
          attend = dense_step;
        } else if (!block_built) {
          m.stage = "block-build";
          m.mode = "dense+estimate";
          ++result.metrics.full_attention_steps;
          block_built = true;
          attend = [&](std::size_t l, std::size_t h, const AttentionInputs& in) {
            ++tally.calls;
            tally.score_evals += n2;
            ScoreCollection scores = collect_scores(in);
            auto& mask = block_masks[l * heads + h];
            mask = block_mask(block_topk_from_scores(scores.scores, config.block_size, config.rho), n);
            tally.add_recall(scores.scores, mask, config.recall_k);
            return std::move(scores.output);
          };
        } else {
          m.stage = "block-reuse";
          m.mode = "masked";
          attend = [&](std::size_t l, std::size_t h, const AttentionInputs& in) {
            return masked_step(block_masks[l * heads + h], in);
          };
        }
        break;

      case PatternKind::kWindow:
      case PatternKind::kStreaming:
        m.stage = "static";
        m.mode = "masked";
        attend = [&](std::size_t, std::size_t, const AttentionInputs& in) {
          return masked_step(static_mask, in);
        };
        break;
    }

    const Matrix dists = model_forward(model, state, attend);
    state = confidence_unmask(dists, std::move(state), counts[t - 1]);

    m.unmasked = counts[t - 1];
    m.score_evals = tally.score_evals;
    m.realized_sparsity = tally.calls > 0 ? tally.sparsity / static_cast<double>(tally.calls) : 0.0;
    if (tally.recall_samples > 0) {
      m.recall = tally.recall / static_cast<double>(tally.recall_samples);
      recall_total += tally.recall;
      recall_samples += tally.recall_samples;
    }
    result.metrics.steps.push_back(std::move(m));
  }

  if (recall_samples > 0) {
    result.metrics.mean_recall = recall_total / static_cast<double>(recall_samples);
  }
  result.tokens = std::move(state.tokens);
  return result;
}

}  // namespace pulsecol
