#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "semistatic/bench/capabilities.hpp"
#include "semistatic/bench/config.hpp"
#include "semistatic/bench/csv.hpp"
#include "semistatic/measure.hpp"

namespace semistatic::bench {

struct ArmResult {
  std::string name;
  std::string counter = "cycles";
  /// Retained samples: overhead-corrected cycles, or event counts.
  std::vector<std::uint64_t> values;
  /// Condition per sample (direction index), empty when the arm has none.
  std::vector<std::uint8_t> directions;
  /// Cycles already subtracted from each value.
  std::uint64_t overhead = 0;
  /// Summaries drop samples whose raw value (value + overhead) exceeds 3x the
  /// raw median, unless this is false. The rule is skipped when it would drop
  /// more than kMaxTrimFraction of the samples: such a tail is a mode of the
  /// distribution, not noise.
  bool trim = true;
  measure::SummaryStats summary;
  std::size_t trimmed = 0;
  bool trim_skipped = false;
};

inline constexpr double kMaxTrimFraction = 0.01;

struct ScenarioResult {
  ScenarioConfig config;
  Availability availability = Availability::Runnable;
  double overhead = 0.0;
  std::vector<ArmResult> arms;
  std::map<std::string, double> metrics;
  std::vector<std::string> notes;

  const ArmResult& arm(std::string_view name) const;
  bool has_arm(std::string_view name) const;
  double metric(std::string_view name) const;
};

/// Runs one scenario. Throws CapabilityMissing when the host cannot run it at
/// all and std::invalid_argument on a bad config.
ScenarioResult run_scenario(const ScenarioConfig& config, const Capabilities& caps);

/// CSV rows in arm order; the variant is the arm name, suffixed with
/// ":<direction>" for arms that record one.
std::vector<CsvRow> to_rows(const ScenarioResult& result);
void write_csv(std::ostream& out, const ScenarioResult& result);
void print_summary(std::ostream& out, const ScenarioResult& result);

/// Fills summary/trimmed for one arm, or for every arm.
void summarize_arm(ArmResult& arm);
void summarize_arms(ScenarioResult& result);

/// Condition sequences, reproducible from the seed (std::mt19937_64). A bool
/// is the top bit of one draw, an index is one draw modulo the fanout.
std::vector<std::uint8_t> random_conditions(std::uint64_t seed, std::size_t n);
std::vector<std::uint8_t> random_indices(std::uint64_t seed, std::size_t n, std::size_t fanout);
/// Direction 0 for the first `interval` iterations, then alternating.
std::vector<std::uint8_t> interval_conditions(std::size_t n, std::size_t interval);

}  // namespace semistatic::bench
