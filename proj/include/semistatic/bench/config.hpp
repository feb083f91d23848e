#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace semistatic::bench {

enum class ScenarioId { S1 = 1, S2, S3, S4, S5, S6, S7, S8, S9 };

inline constexpr ScenarioId kAllScenarios[] = {ScenarioId::S1, ScenarioId::S2, ScenarioId::S3,
                                               ScenarioId::S4, ScenarioId::S5, ScenarioId::S6,
                                               ScenarioId::S7, ScenarioId::S8, ScenarioId::S9};

/// "s1".."s9", case-insensitive.
std::optional<ScenarioId> parse_scenario(std::string_view text);
std::string to_string(ScenarioId id);
std::string_view describe(ScenarioId id);
/// Scenarios that count events by default use fewer iterations.
bool counter_level(ScenarioId id);

inline constexpr std::size_t kCycleIterations = 10'000'000;
inline constexpr std::size_t kCounterIterations = 1'000'000;
inline constexpr std::size_t kSweepIntervals[] = {1, 10, 100, 1000, 10000};

struct ScenarioConfig {
  ScenarioId scenario = ScenarioId::S3;
  std::size_t iterations = 0;  // 0: scenario default
  std::uint64_t seed = 42;
  bool warming = false;
  bool buffer = false;
  bool safe_mode = false;
  std::size_t switch_fanout = 5;
  std::size_t change_interval = 0;  // S8: 0 sweeps kSweepIntervals; S9: microseconds between flips
  std::optional<int> pin_core;
  std::string events_file;  // empty: bundled table
  std::string output;

  std::size_t warmup = 100'000;                  // leading samples discarded per arm
  std::size_t calibration_iterations = 10'000'000;
  std::size_t filler_macs = 32;                  // multiply-accumulates in the unmeasured filler
  std::size_t rank_subset = 100;                 // S1 rank-test subset per arm

  /// Iterations after applying the scenario default.
  std::size_t effective_iterations() const;
  /// Throws std::invalid_argument.
  void validate() const;
};

}  // namespace semistatic::bench
