// SPDX-License-Identifier: Apache-2.0
#include "pulsecol/refresh_schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "detail.hpp"
#include "pulsecol/error.hpp"

namespace pulsecol {

std::string_view to_string(ScheduleKind kind) noexcept {
  switch (kind) {
    case ScheduleKind::kUniform: return "uniform";
    case ScheduleKind::kRandom: return "random";
    case ScheduleKind::kPower: return "power";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "uniform") return ScheduleKind::kUniform;
  if (name == "random") return ScheduleKind::kRandom;
  if (name == "power") return ScheduleKind::kPower;
  throw InvalidInput("unknown schedule kind '" + std::string(name) +
                     "' (expected uniform, random or power)");
}

std::string_view to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::kRefresh: return "refresh";
    case Stage::kReuseEarly: return "reuse-early";
    case Stage::kReusePersistent: return "reuse-persistent";
  }
  return "unknown";
}

std::size_t refresh_window(std::size_t total_steps, double eta) {
  return static_cast<std::size_t>(detail::tolerant_floor(eta * static_cast<double>(total_steps)));
}

std::size_t RefreshSchedule::window() const noexcept { return refresh_window(total_steps, eta); }

bool RefreshSchedule::is_refresh(std::size_t t) const noexcept {
  return std::binary_search(steps.begin(), steps.end(), t);
}

namespace {

RefreshSchedule checked_header(ScheduleKind kind, std::size_t total_steps, double eta,
                               std::size_t budget) {
  if (total_steps == 0) throw InvalidBudget("T must be at least 1");
  if (!(eta > 0.0 && eta <= 1.0)) throw InvalidBudget("eta must lie in (0, 1]");
  const std::size_t window = refresh_window(total_steps, eta);
  if (budget == 0) throw InvalidBudget("refresh budget R must be at least 1");
  if (budget > window) {
    throw InvalidBudget("refresh budget R=" + std::to_string(budget) +
                        " exceeds the refresh window T_win=" + std::to_string(window));
  }
  RefreshSchedule s;
  s.total_steps = total_steps;
  s.eta = eta;
  s.budget = budget;
  s.kind = kind;
  s.steps.reserve(budget);
  return s;
}

// Unbiased draw from [0, bound) using raw engine output, so schedules are
// identical across standard library implementations.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

}  // namespace

void RefreshSchedule::validate() const {
  const std::size_t win = window();
  if (steps.size() != budget) throw InvalidBudget("schedule must contain exactly R steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] < 1 || steps[i] > win) throw InvalidBudget("refresh step outside [1, T_win]");
    if (i > 0 && steps[i] <= steps[i - 1]) {
      throw InvalidBudget("refresh steps must be strictly increasing");
    }
  }
  if (steps.empty() || steps.front() != 1) throw InvalidBudget("first refresh must be step 1");
  if (kind == ScheduleKind::kUniform && budget >= 2 && steps.back() != win) {
    throw InvalidBudget("uniform schedule must end at T_win");
  }
}

RefreshSchedule uniform_schedule(std::size_t total_steps, double eta, std::size_t budget) {
  RefreshSchedule s = checked_header(ScheduleKind::kUniform, total_steps, eta, budget);
  const std::size_t win = s.window();
  if (budget == 1) {
    s.steps.push_back(1);
    return s;
  }
  for (std::size_t r = 1; r <= budget; ++r) {
    s.steps.push_back(1 + (r - 1) * (win - 1) / (budget - 1));
  }
  return s;
}

RefreshSchedule random_schedule(std::size_t total_steps, double eta, std::size_t budget,
                                std::uint64_t seed) {
  RefreshSchedule s = checked_header(ScheduleKind::kRandom, total_steps, eta, budget);
  s.seed = seed;
  const std::size_t win = s.window();
  // Partial Fisher-Yates over [2, T_win]; step 1 is always a refresh.
  std::vector<std::size_t> pool(win - 1);
  std::iota(pool.begin(), pool.end(), std::size_t{2});
  std::mt19937_64 rng(seed);
  s.steps.push_back(1);
  for (std::size_t i = 0; i + 1 < budget; ++i) {
    const std::size_t j = i + uniform_below(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
    s.steps.push_back(pool[i]);
  }
  std::sort(s.steps.begin(), s.steps.end());
  return s;
}

RefreshSchedule power_schedule(std::size_t total_steps, double eta, std::size_t budget) {
  RefreshSchedule s = checked_header(ScheduleKind::kPower, total_steps, eta, budget);
  const std::size_t win = s.window();
  if (budget == 1) {
    s.steps.push_back(1);
    return s;
  }
  const double span = static_cast<double>(win - 1);
  for (std::size_t i = 0; i < budget; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(budget - 1);
    std::size_t step = 1 + static_cast<std::size_t>(std::llround(x * x * span));
    if (!s.steps.empty() && step <= s.steps.back()) step = s.steps.back() + 1;
    s.steps.push_back(step);
  }
  s.validate();
  return s;
}

RefreshSchedule make_schedule(ScheduleKind kind, std::size_t total_steps, double eta,
                              std::size_t budget, std::uint64_t seed) {
  switch (kind) {
    case ScheduleKind::kUniform: return uniform_schedule(total_steps, eta, budget);
    case ScheduleKind::kRandom: return random_schedule(total_steps, eta, budget, seed);
    case ScheduleKind::kPower: return power_schedule(total_steps, eta, budget);
  }
  throw InvalidInput("unknown schedule kind");
}

Stage stage_of(std::size_t t, const RefreshSchedule& schedule) {
  if (t < 1 || t > schedule.total_steps) {
    throw InvalidInput("step " + std::to_string(t) + " outside [1, " +
                       std::to_string(schedule.total_steps) + "]");
  }
  if (schedule.is_refresh(t)) return Stage::kRefresh;
  return t <= schedule.window() ? Stage::kReuseEarly : Stage::kReusePersistent;
}

}  // namespace pulsecol
