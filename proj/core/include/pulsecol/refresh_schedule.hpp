// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pulsecol {

enum class ScheduleKind { kUniform, kRandom, kPower };

std::string_view to_string(ScheduleKind kind) noexcept;
/// Accepts "uniform", "random", "power"; throws InvalidInput otherwise.
ScheduleKind parse_schedule_kind(std::string_view name);

/// Refresh steps within the first floor(eta * T) denoising steps. Steps are
/// 1-based and strictly increasing.
struct RefreshSchedule {
  std::size_t total_steps = 0;  // T
  double eta = 1.0;
  std::size_t budget = 1;       // R
  ScheduleKind kind = ScheduleKind::kUniform;
  std::uint64_t seed = 0;       // used by kRandom only
  std::vector<std::size_t> steps;

  std::size_t window() const noexcept;  // T_win
  bool is_refresh(std::size_t t) const noexcept;

  /// Throws InvalidBudget if any invariant of the schedule is broken.
  void validate() const;
};

/// floor(eta * T), tolerant of binary rounding in eta (0.3 * 10 is 3).
std::size_t refresh_window(std::size_t total_steps, double eta);

/// tau_r = 1 + floor((r - 1)(T_win - 1) / (R - 1)); [1] when R == 1.
RefreshSchedule uniform_schedule(std::size_t total_steps, double eta, std::size_t budget);

/// Step 1 plus R - 1 distinct steps drawn uniformly from [2, T_win].
RefreshSchedule random_schedule(std::size_t total_steps, double eta, std::size_t budget,
                                std::uint64_t seed);

/// 1 + round((i / (R - 1))^2 (T_win - 1)) for i = 0..R-1, with collisions
/// pushed forward to the next free step.
RefreshSchedule power_schedule(std::size_t total_steps, double eta, std::size_t budget);

RefreshSchedule make_schedule(ScheduleKind kind, std::size_t total_steps, double eta,
                              std::size_t budget, std::uint64_t seed = 0);

enum class Stage { kRefresh, kReuseEarly, kReusePersistent };

std::string_view to_string(Stage stage) noexcept;

/// Which pipeline stage step t (1-based) belongs to.
Stage stage_of(std::size_t t, const RefreshSchedule& schedule);

}  // namespace pulsecol
