// Hot-path scenarios with unmeasured filler between iterations: S6, S8.

#include <optional>
#include <stdexcept>
#include <string>

#include "scenario_internal.hpp"
#include "semistatic/bench/bodies.hpp"
#include "semistatic/bench/modes.hpp"
#include "semistatic/perf_counter.hpp"

namespace semistatic::bench::detail {

namespace {

using measure::measure_cycles;

void record_modes(ScenarioResult& result, const ArmResult& arm, const std::string& prefix) {
  const auto modes = measure::find_modes(arm.summary.histogram);
  result.metrics[prefix + "mode_count"] = static_cast<double>(modes.size());
  result.metrics[prefix + "mode_low"] = static_cast<double>(modes.front().location);
  result.metrics[prefix + "mode_high"] = static_cast<double>(modes.back().location);
  result.metrics[prefix + "mode_separation"] =
      static_cast<double>(modes.back().location - modes.front().location);
}

void order_preflight(RunContext& ctx) {
  Message msg{};
  Gateway gw{};
  constexpr std::size_t kSamples = 200'000;
  std::vector<std::uint64_t> send;
  std::vector<std::uint64_t> adjust;
  for (std::size_t i = 0; i < kSamples; ++i) {
    send.push_back(measure_cycles([&] { send_order(&msg, &gw); }).cycles);
    adjust.push_back(measure_cycles([&] { adjust_order(&msg, &gw); }).cycles);
  }
  const auto a = measure::lower_median(send);
  const auto b = measure::lower_median(adjust);
  const auto spread = a > b ? a - b : b - a;
  ctx.result.metrics["preflight_body_spread"] = static_cast<double>(spread);
  if (spread > 1) {
    ctx.result.notes.push_back("warning: send/adjust medians differ by " +
                               std::to_string(spread) + " cycles (tolerance 1)");
  }
}

}  // namespace

void run_s6(RunContext& ctx) {
  order_preflight(ctx);
  using Sig = void(const Message*, Gateway*);
  SemiStaticBranch<Sig, 0> branch({send_order, adjust_order}, ctx.options());
  // 0 sends, 1 adjusts.
  const auto dirs = random_conditions(ctx.config.seed, ctx.total());
  ctx.result.metrics["uniformity_error"] = uniformity_error(dirs, 2);

  Message cond_msg{};
  Message semi_msg{};
  Message warm_msg{};
  Gateway gateway{};
  Gateway dummy{};
  Filler cond_filler(ctx.config.seed + 1, ctx.config.filler_macs);
  Filler semi_filler(ctx.config.seed + 1, ctx.config.filler_macs);
  Filler warm_filler(ctx.config.seed + 1, ctx.config.filler_macs);
  const bool buffer = ctx.config.buffer;

  auto conditional = [&](std::size_t i) {
    const bool send = dirs[i] == 0;
    cond_filler.run(cond_msg);
    return measure_cycles([&] {
             if (send) {
               send_order(&cond_msg, &gateway);
             } else {
               adjust_order(&cond_msg, &gateway);
             }
           }).cycles;
  };
  auto semistatic_arm = [&](Filler& filler, Message& msg, bool warm) {
    return [&, warm, f = &filler, m = &msg](std::size_t i) {
      branch.set_direction(std::size_t{dirs[i]});
      if (buffer) {
        branch.smc_buffer();
      }
      f->run(*m);
      if (warm) {
        branch.warm(m, &dummy);
      }
      const auto writes = branch.writes();
      const auto cycles = measure_cycles([&] { branch.take(m, &gateway); }).cycles;
      if (branch.writes() != writes) {
        throw std::logic_error("s6: direction changed inside the measured region");
      }
      return cycles;
    };
  };
  auto semi = semistatic_arm(semi_filler, semi_msg, false);
  RawSeries r0, r1, r2;
  if (ctx.config.warming) {
    auto warmed = semistatic_arm(warm_filler, warm_msg, true);
    run_interleaved(ctx, ctx.total(), kBlock, {&r0, &r1, &r2}, conditional, semi, warmed);
  } else {
    run_interleaved(ctx, ctx.total(), kBlock, {&r0, &r1}, conditional, semi);
  }
  ctx.settle_overhead();

  ctx.result.arms.push_back(make_arm(ctx, "conditional", r0, dirs));
  ctx.result.arms.push_back(make_arm(ctx, "semistatic", r1, dirs));
  if (ctx.config.warming) {
    ctx.result.arms.push_back(make_arm(ctx, "semistatic_warmed", r2, dirs));
  }
  const auto& c = ctx.result.arms[0];
  const auto& s = ctx.result.arms[1];
  ctx.result.metrics["median_diff"] = median_of(c) - median_of(s);
  ctx.result.metrics["sd_diff"] = c.summary.sd - s.summary.sd;
  record_modes(ctx.result, c, "conditional_");
}

void run_s8(RunContext& ctx) {
  preflight_bodies(ctx, 2);
  SemiStaticBranch<void(), 3> branch({body_0, body_1}, ctx.options());
  const std::size_t total = ctx.total();
  const bool buffer = ctx.config.buffer;
  const bool warming = ctx.config.warming;
  Message msg{};
  Filler filler(ctx.config.seed + 1, ctx.config.filler_macs);

  // Each loop also takes one empty-region sample per iteration for the
  // overhead estimate.
  auto conditional = [&](const std::vector<std::uint8_t>& dirs) {
    RawSeries raw;
    raw.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
      const bool first = dirs[i] == 0;
      filler.run(msg);
      raw.push_back(measure_cycles([&] {
                      if (first) {
                        body_0();
                      } else {
                        body_1();
                      }
                    }).cycles);
      ctx.sample_overhead();
    }
    return raw;
  };
  auto semistatic = [&](const std::vector<std::uint8_t>& dirs) {
    RawSeries raw;
    raw.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
      branch.set_direction(std::size_t{dirs[i]});
      if (buffer) {
        branch.smc_buffer();
      }
      filler.run(msg);
      if (warming) {
        branch.warm();
      }
      raw.push_back(measure_cycles([&] { branch.take(); }).cycles);
      ctx.sample_overhead();
    }
    return raw;
  };

  // Branch-miss counts over the measured region only, when the PMU allows.
  std::optional<measure::PerfCounter> misses;
  if (ctx.caps.hardware_counters) {
    try {
      misses = measure::PerfCounter::open(measure::PerfEventSpec::hardware(measure::kHwBranchMisses));
    } catch (const measure::CounterError& e) {
      ctx.result.notes.push_back(std::string("branch-miss counter: ") + e.what());
    }
  }
  auto counted_misses = [&](const std::vector<std::uint8_t>& dirs) {
    misses->reset();
    for (std::size_t i = 0; i < total; ++i) {
      const bool first = dirs[i] == 0;
      filler.run(msg);
      misses->enable();
      if (first) {
        body_0();
      } else {
        body_1();
      }
      misses->disable();
    }
    return static_cast<double>(misses->read()) / static_cast<double>(total);
  };

  std::vector<std::size_t> intervals;
  if (ctx.config.change_interval != 0) {
    intervals.push_back(ctx.config.change_interval);
  } else {
    intervals.assign(std::begin(kSweepIntervals), std::end(kSweepIntervals));
  }

  // Calibration runs: random conditions give the fast and slow modes, a
  // constant condition gives the background rate of slow samples.
  const auto random_dirs = random_conditions(ctx.config.seed, total);
  const std::vector<std::uint8_t> constant_dirs(total, 0);
  const RawSeries random_raw = conditional(random_dirs);
  const RawSeries constant_raw = conditional(constant_dirs);
  struct Interval {
    std::size_t k;
    std::vector<std::uint8_t> dirs;
    RawSeries cond;
    RawSeries semi;
  };
  std::vector<Interval> runs;
  for (std::size_t k : intervals) {
    Interval run{k, interval_conditions(total, k), {}, {}};
    run.cond = conditional(run.dirs);
    run.semi = semistatic(run.dirs);
    runs.push_back(std::move(run));
  }
  ctx.settle_overhead();

  auto& m = ctx.result.metrics;
  ctx.result.arms.push_back(make_arm(ctx, "conditional.random", random_raw, random_dirs, false));
  ctx.result.arms.push_back(make_arm(ctx, "conditional.constant", constant_raw, {}, false));
  const auto threshold = slow_threshold(ctx.result.arms[0].values);
  double background = 0.0;
  if (threshold) {
    m["fast_mode"] = static_cast<double>(threshold->fast_mode);
    m["slow_mode"] = static_cast<double>(threshold->slow_mode);
    m["slow_threshold"] = static_cast<double>(threshold->threshold);
    background = chunked_slow_fraction(ctx.result.arms[1].values, threshold->threshold);
    m["slow_background"] = background;
  } else if (!misses) {
    ctx.result.notes.push_back(
        "random-condition probe is not bimodal; misprediction rates unavailable");
  }
  double counter_background = 0.0;
  if (misses) {
    counter_background = counted_misses(constant_dirs);
    m["counter_background"] = counter_background;
  }

  for (auto& run : runs) {
    const std::string tag = ".k" + std::to_string(run.k);
    auto cond = make_arm(ctx, "conditional" + tag, run.cond, run.dirs, false);
    auto semi = make_arm(ctx, "semistatic" + tag, run.semi, run.dirs, false);
    m["median_conditional" + tag] = median_of(cond);
    m["sd_conditional" + tag] = cond.summary.sd;
    m["median_semistatic" + tag] = median_of(semi);
    m["sd_semistatic" + tag] = semi.summary.sd;
    if (misses) {
      const double rate = std::max(counted_misses(run.dirs) - counter_background, 0.0);
      m["mispredict_rate" + tag] = rate;
      m["mispredict_per_change" + tag] = rate * static_cast<double>(run.k);
    } else if (threshold) {
      const auto est = estimate_mispredictions_aligned(
          cond.values, threshold->threshold, run.k, ctx.warmup % run.k, background);
      m["slow_fraction" + tag] = est.slow_fraction;
      m["slow_background" + tag] = est.background;
      m["mispredict_rate" + tag] = est.rate;
      m["mispredict_per_change" + tag] = est.per_change;
    }
    ctx.result.arms.push_back(std::move(cond));
    ctx.result.arms.push_back(std::move(semi));
  }
  m["mispredict_from_counter"] = misses ? 1.0 : 0.0;
}

}  // namespace semistatic::bench::detail
