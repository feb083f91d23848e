#include "semistatic/bench/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>

#include "scenario_internal.hpp"
#include "semistatic/bench/bodies.hpp"

namespace semistatic::bench {

std::optional<ScenarioId> parse_scenario(std::string_view text) {
  if (text.size() != 2 || std::tolower(static_cast<unsigned char>(text[0])) != 's' ||
      text[1] < '1' || text[1] > '9') {
    return std::nullopt;
  }
  return static_cast<ScenarioId>(text[1] - '0');
}

std::string to_string(ScenarioId id) { return "s" + std::to_string(static_cast<int>(id)); }

std::string_view describe(ScenarioId id) {
  switch (id) {
    case ScenarioId::S1: return "patch vs data store";
    case ScenarioId::S2: return "SMC machine clears";
    case ScenarioId::S3: return "take vs direct call";
    case ScenarioId::S4: return "BAC re-steers";
    case ScenarioId::S5: return "BPU warming";
    case ScenarioId::S6: return "hot path, random conditions";
    case ScenarioId::S7: return "switch vs N-way branch";
    case ScenarioId::S8: return "condition-change frequency sweep";
    case ScenarioId::S9: return "multithreaded direction changes";
  }
  return "unknown";
}

bool counter_level(ScenarioId id) {
  return id == ScenarioId::S2 || id == ScenarioId::S4 || id == ScenarioId::S8;
}

std::size_t ScenarioConfig::effective_iterations() const {
  if (iterations != 0) {
    return iterations;
  }
  return counter_level(scenario) || scenario == ScenarioId::S9 ? kCounterIterations
                                                               : kCycleIterations;
}

void ScenarioConfig::validate() const {
  if (effective_iterations() < 1) {
    throw std::invalid_argument("iterations must be at least 1");
  }
  if (switch_fanout < 2 || switch_fanout > kMaxFanout) {
    throw std::invalid_argument("fanout must be between 2 and " + std::to_string(kMaxFanout));
  }
  if (scenario == ScenarioId::S1 && rank_subset < 1) {
    throw std::invalid_argument("rank subset must be at least 1");
  }
}

const ArmResult& ScenarioResult::arm(std::string_view name) const {
  for (const auto& a : arms) {
    if (a.name == name) {
      return a;
    }
  }
  throw std::out_of_range("no arm named " + std::string(name));
}

bool ScenarioResult::has_arm(std::string_view name) const {
  return std::any_of(arms.begin(), arms.end(), [&](const ArmResult& a) { return a.name == name; });
}

double ScenarioResult::metric(std::string_view name) const {
  const auto it = metrics.find(std::string(name));
  if (it == metrics.end()) {
    throw std::out_of_range("no metric named " + std::string(name));
  }
  return it->second;
}

std::vector<std::uint8_t> random_conditions(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> out(n);
  for (auto& c : out) {
    c = static_cast<std::uint8_t>(rng() >> 63);
  }
  return out;
}

std::vector<std::uint8_t> random_indices(std::uint64_t seed, std::size_t n, std::size_t fanout) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> out(n);
  for (auto& c : out) {
    c = static_cast<std::uint8_t>(rng() % fanout);
  }
  return out;
}

std::vector<std::uint8_t> interval_conditions(std::size_t n, std::size_t interval) {
  std::vector<std::uint8_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<std::uint8_t>((i / interval) % 2);
  }
  return out;
}

void summarize_arm(ArmResult& arm) {
  arm.summary = {};
  arm.trimmed = 0;
  arm.trim_skipped = false;
  if (arm.values.empty()) {
    return;
  }
  if (!arm.trim) {
    arm.summary = measure::summarize_values(arm.values);
    return;
  }
  // The outlier rule works on raw samples; values here are corrected.
  std::vector<std::uint64_t> raw(arm.values);
  for (auto& v : raw) {
    v += arm.overhead;
  }
  const std::size_t dropped = measure::drop_outliers(raw);
  if (static_cast<double>(dropped) > kMaxTrimFraction * static_cast<double>(arm.values.size())) {
    arm.trim_skipped = true;
    arm.summary = measure::summarize_values(arm.values);
    return;
  }
  arm.trimmed = dropped;
  for (auto& v : raw) {
    v -= arm.overhead;
  }
  arm.summary = measure::summarize_values(raw);
}

void summarize_arms(ScenarioResult& result) {
  for (auto& arm : result.arms) {
    summarize_arm(arm);
  }
}

namespace detail {

ArmResult make_arm(const RunContext& ctx, std::string name, const RawSeries& raw,
                   const std::vector<std::uint8_t>& directions, bool trim) {
  ArmResult arm;
  arm.name = std::move(name);
  arm.trim = trim;
  const std::size_t skip = std::min(ctx.warmup, raw.size());
  arm.values.reserve(raw.size() - skip);
  for (std::size_t i = skip; i < raw.size(); ++i) {
    arm.values.push_back(raw[i] > ctx.overhead ? raw[i] - ctx.overhead : 0);
  }
  if (!directions.empty()) {
    arm.directions.assign(directions.begin() + static_cast<std::ptrdiff_t>(skip),
                          directions.begin() + static_cast<std::ptrdiff_t>(raw.size()));
  }
  arm.overhead = ctx.overhead;
  summarize_arm(arm);
  return arm;
}

void RunContext::settle_overhead() {
  if (overhead_raw.empty()) {
    return;
  }
  std::vector<std::uint64_t> kept = overhead_raw;
  measure::drop_outliers(kept);
  long double sum = 0;
  for (auto v : kept) {
    sum += v;
  }
  const double mean = static_cast<double>(sum / static_cast<long double>(kept.size()));
  const double calibrated = result.metrics["overhead_calibrated"];
  overhead = static_cast<std::uint64_t>(std::llround(mean));
  result.overhead = mean;
  result.metrics["overhead_interleaved"] = mean;
  if (std::abs(mean - calibrated) > 2.0) {
    result.notes.push_back("timing overhead drifted from " + std::to_string(calibrated) +
                           " at calibration to " + std::to_string(mean) +
                           " during the run; the interleaved value is subtracted");
  }
}

double median_of(const ArmResult& arm) { return static_cast<double>(arm.summary.median); }

void preflight_bodies(RunContext& ctx, std::size_t count) {
  constexpr std::size_t kSamples = 200'000;
  constexpr std::size_t kSkip = 20'000;
  std::vector<std::vector<std::uint64_t>> samples(count);
  for (std::size_t i = 0; i < kSamples + kSkip; ++i) {
    for (std::size_t b = 0; b < count; ++b) {
      const Body body = kBodies[b];
      const auto c = measure::measure_cycles([&] { body(); }).cycles;
      if (i >= kSkip) {
        samples[b].push_back(c);
      }
    }
  }
  std::vector<std::uint64_t> medians;
  for (const auto& s : samples) {
    medians.push_back(measure::lower_median(s));
  }
  const auto [lo, hi] = std::minmax_element(medians.begin(), medians.end());
  const double spread = static_cast<double>(*hi - *lo);
  ctx.result.metrics["preflight_body_spread"] = spread;
  if (spread > 1.0) {
    ctx.result.notes.push_back("warning: branch body medians differ by " +
                               std::to_string(*hi - *lo) + " cycles (tolerance 1)");
  }
}

}  // namespace detail

ScenarioResult run_scenario(const ScenarioConfig& config, const Capabilities& caps) {
  config.validate();
  const auto status = scenario_status(caps, config.scenario);
  if (status.availability == Availability::Unavailable) {
    throw CapabilityMissing(to_string(config.scenario) + ": " + status.reason);
  }
  if (config.pin_core && !measure::pin_current_thread(*config.pin_core)) {
    throw std::invalid_argument("cannot pin to core " + std::to_string(*config.pin_core));
  }

  ScenarioResult result;
  result.config = config;
  result.availability = status.availability;
  if (!status.reason.empty()) {
    result.notes.push_back(to_string(status.availability) + ": " + status.reason);
  }
  const auto calibration =
      measure::calibrate_overhead(config.calibration_iterations, config.warmup);
  result.overhead = calibration.overhead_mean();
  result.metrics["overhead_calibrated"] = result.overhead;

  detail::RunContext ctx{config, caps, result, config.effective_iterations(), config.warmup,
                         calibration.overhead_cycles(), {}};
  switch (config.scenario) {
    case ScenarioId::S1: detail::run_s1(ctx); break;
    case ScenarioId::S2: detail::run_s2(ctx); break;
    case ScenarioId::S3: detail::run_s3(ctx); break;
    case ScenarioId::S4: detail::run_s4(ctx); break;
    case ScenarioId::S5: detail::run_s5(ctx); break;
    case ScenarioId::S6: detail::run_s6(ctx); break;
    case ScenarioId::S7: detail::run_s7(ctx); break;
    case ScenarioId::S8: detail::run_s8(ctx); break;
    case ScenarioId::S9: detail::run_s9(ctx); break;
  }
  summarize_arms(result);
  for (const auto& arm : result.arms) {
    if (arm.trim_skipped) {
      result.notes.push_back(arm.name + ": over 1% of samples exceed 3x the median; summarized untrimmed");
    }
  }
  return result;
}

std::vector<CsvRow> to_rows(const ScenarioResult& result) {
  std::vector<CsvRow> rows;
  const std::string scenario = to_string(result.config.scenario);
  for (const auto& arm : result.arms) {
    for (std::size_t i = 0; i < arm.values.size(); ++i) {
      std::string variant = arm.name;
      if (!arm.directions.empty()) {
        variant += ':';
        variant += std::to_string(arm.directions[i]);
      }
      rows.push_back(CsvRow{scenario, std::move(variant), i, arm.values[i], arm.counter});
    }
  }
  return rows;
}

void write_csv(std::ostream& out, const ScenarioResult& result) {
  write_csv_header(out);
  const std::string scenario = to_string(result.config.scenario);
  for (const auto& arm : result.arms) {
    for (std::size_t i = 0; i < arm.values.size(); ++i) {
      out << scenario << ',' << arm.name;
      if (!arm.directions.empty()) {
        out << ':' << static_cast<unsigned>(arm.directions[i]);
      }
      out << ',' << i << ',' << arm.values[i] << ',' << arm.counter << '\n';
    }
  }
}

void print_summary(std::ostream& out, const ScenarioResult& result) {
  out << to_string(result.config.scenario) << " (" << describe(result.config.scenario) << "), "
      << to_string(result.availability) << ", overhead " << std::fixed << std::setprecision(2)
      << result.overhead << " cycles subtracted as "
      << static_cast<std::uint64_t>(result.overhead + 0.5) << "\n";
  out << std::left << std::setw(28) << "variant" << std::setw(10) << "counter" << std::right
      << std::setw(10) << "n" << std::setw(10) << "mean" << std::setw(8) << "median"
      << std::setw(8) << "sd" << std::setw(8) << "min" << std::setw(10) << "max"
      << std::setw(9) << "trimmed" << '\n';
  for (const auto& arm : result.arms) {
    const auto& s = arm.summary;
    out << std::left << std::setw(28) << arm.name << std::setw(10) << arm.counter << std::right
        << std::setw(10) << s.n << std::setw(10) << std::setprecision(2) << s.mean
        << std::setw(8) << s.median << std::setw(8) << s.sd << std::setw(8) << s.min
        << std::setw(10) << s.max << std::setw(9)
        << (arm.trim_skipped ? std::string("skipped") : std::to_string(arm.trimmed)) << '\n';
  }
  for (const auto& [name, value] : result.metrics) {
    out << "  " << name << " = " << std::setprecision(4) << value << '\n';
  }
  for (const auto& note : result.notes) {
    out << "  note: " << note << '\n';
  }
  out.unsetf(std::ios::fixed);
}

}  // namespace semistatic::bench
