#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "semistatic/bench/scenario.hpp"
#include "semistatic/branch.hpp"
#include "semistatic/measure.hpp"

namespace semistatic::bench::detail {

inline constexpr std::size_t kBlock = 1000;

struct RunContext {
  const ScenarioConfig& config;
  const Capabilities& caps;
  ScenarioResult& result;
  std::size_t iterations;       // retained samples per arm
  std::size_t warmup;           // discarded samples per arm
  std::uint64_t overhead = 0;   // whole cycles subtracted from each raw sample
  std::vector<std::uint64_t> overhead_raw;  // empty-region samples taken alongside the arms

  std::size_t total() const noexcept { return warmup + iterations; }
  BranchOptions options() const { return BranchOptions{0, config.safe_mode || kSafeModeBuild}; }

  [[gnu::always_inline]] void sample_overhead() {
    overhead_raw.push_back(measure::measure_cycles([] {}).cycles);
  }
  /// Sets `overhead` from the empty-region samples collected so far. Call
  /// once, after every arm ran and before make_arm.
  void settle_overhead();
};

/// Raw cycle samples of one arm, warm-up included.
using RawSeries = std::vector<std::uint64_t>;

template <typename Arm>
inline void run_block(Arm& arm, std::size_t begin, std::size_t end, RawSeries& out) {
  for (std::size_t i = begin; i < end; ++i) {
    out.push_back(arm(i));
  }
}

/// Runs `total` iterations of every arm, alternating arms every `block`
/// iterations so slow drift affects them equally. A block of empty-region
/// samples for the overhead estimate runs alongside. arm(i) returns raw cycles.
template <typename... Arms>
void run_interleaved(RunContext& ctx, std::size_t total, std::size_t block,
                     std::array<RawSeries*, sizeof...(Arms)> outs, Arms&... arms) {
  for (auto* o : outs) {
    o->clear();
    o->reserve(total);
  }
  ctx.overhead_raw.reserve(ctx.overhead_raw.size() + total);
  for (std::size_t begin = 0; begin < total; begin += block) {
    const std::size_t end = std::min(total, begin + block);
    std::size_t k = 0;
    (run_block(arms, begin, end, *outs[k++]), ...);
    for (std::size_t i = begin; i < end; ++i) {
      ctx.sample_overhead();
    }
  }
}

/// Drops the warm-up, subtracts the overhead and attaches the matching
/// slice of `directions` (which covers warm-up too; may be empty).
ArmResult make_arm(const RunContext& ctx, std::string name, const RawSeries& raw,
                   const std::vector<std::uint8_t>& directions = {}, bool trim = true);

/// Median of direct calls to each body must agree within one cycle.
void preflight_bodies(RunContext& ctx, std::size_t count);

double median_of(const ArmResult& arm);

/// Largest |observed/expected - 1| over the `fanout` outcomes of `seq`.
double uniformity_error(const std::vector<std::uint8_t>& seq, std::size_t fanout);

void run_s1(RunContext& ctx);
void run_s2(RunContext& ctx);
void run_s3(RunContext& ctx);
void run_s4(RunContext& ctx);
void run_s5(RunContext& ctx);
void run_s6(RunContext& ctx);
void run_s7(RunContext& ctx);
void run_s8(RunContext& ctx);
void run_s9(RunContext& ctx);

}  // namespace semistatic::bench::detail
