// Scenarios that stress set_direction itself: S1, S2, S4, S5.

#include <algorithm>
#include <optional>
#include <random>

#include "scenario_internal.hpp"
#include "semistatic/bench/bodies.hpp"
#include "semistatic/perf_counter.hpp"
#include "semistatic/rank_test.hpp"

namespace semistatic::bench::detail {

namespace {

using measure::measure_cycles;

std::optional<measure::PerfCounter> open_raw(std::uint64_t code, ScenarioResult& result) {
  try {
    return measure::PerfCounter::open(measure::PerfEventSpec::raw(code));
  } catch (const measure::CounterError& e) {
    result.notes.push_back(std::string("raw event open failed: ") + e.what());
    return std::nullopt;
  }
}

/// Counts the event over `n` iterations of fn(i), one value per block.
template <typename Fn>
ArmResult count_blocks(measure::PerfCounter& counter, const std::string& name,
                       const std::string& event, std::size_t n, Fn&& fn) {
  ArmResult arm;
  arm.name = name;
  arm.counter = event;
  arm.trim = false;
  for (std::size_t begin = 0; begin < n; begin += kBlock) {
    const std::size_t end = std::min(n, begin + kBlock);
    arm.values.push_back(measure::counted(
        [&] {
          for (std::size_t i = begin; i < end; ++i) {
            fn(i);
          }
        },
        counter));
  }
  return arm;
}

double total(const ArmResult& arm) {
  double sum = 0;
  for (auto v : arm.values) {
    sum += static_cast<double>(v);
  }
  return sum;
}

}  // namespace

void run_s1(RunContext& ctx) {
  SemiStaticBranch<void(), 0> branch({body_0, body_1}, ctx.options());
  StoreBaseline baseline(branch.core());
  const auto dirs = interval_conditions(ctx.total(), 1);

  RawSeries patch_raw;
  RawSeries store_raw;
  auto patch = [&](std::size_t i) {
    const std::size_t d = dirs[i];
    return measure_cycles([&] { branch.set_direction(d); }).cycles;
  };
  auto store = [&](std::size_t i) {
    const std::size_t d = dirs[i];
    return measure_cycles([&] { baseline.set_direction(d); }).cycles;
  };
  run_interleaved(ctx, ctx.total(), kBlock, {&patch_raw, &store_raw}, patch, store);
  ctx.settle_overhead();

  ctx.result.arms.push_back(make_arm(ctx, "set_direction", patch_raw, dirs));
  ctx.result.arms.push_back(make_arm(ctx, "baseline_store", store_raw, dirs));
  const auto& a = ctx.result.arms[0];
  const auto& b = ctx.result.arms[1];

  // Rank test on small random subsets of each arm.
  std::mt19937_64 rng(ctx.config.seed ^ 0x51a7e5u);
  const std::size_t k = std::min({ctx.config.rank_subset, a.values.size(), b.values.size()});
  std::vector<std::uint64_t> sa;
  std::vector<std::uint64_t> sb;
  std::sample(a.values.begin(), a.values.end(), std::back_inserter(sa), k, rng);
  std::sample(b.values.begin(), b.values.end(), std::back_inserter(sb), k, rng);
  const auto test = measure::mann_whitney_u(std::span<const std::uint64_t>(sa),
                                            std::span<const std::uint64_t>(sb));
  ctx.result.metrics["rank_subset"] = static_cast<double>(k);
  ctx.result.metrics["u_statistic"] = test.u_statistic;
  ctx.result.metrics["p_value"] = test.p_value;
  ctx.result.metrics["median_diff"] = median_of(a) - median_of(b);
  ctx.result.metrics["writes"] = static_cast<double>(branch.writes());
}

void run_s2(RunContext& ctx) {
  SemiStaticBranch<void(), 0> branch({body_0, body_1}, ctx.options());
  SemiStaticBranch<void(), 1> fixed({body_0, body_1}, ctx.options());
  StoreBaseline baseline(branch.core());
  const auto dirs = interval_conditions(ctx.total(), 1);

  auto unbuffered = [&](std::size_t i) {
    const std::size_t d = dirs[i];
    return measure_cycles([&] {
             branch.set_direction(d);
             branch.take();
           }).cycles;
  };
  auto buffered = [&](std::size_t i) {
    const std::size_t d = dirs[i];
    return measure_cycles([&] {
             branch.set_direction(d);
             branch.smc_buffer();
             branch.take();
           }).cycles;
  };
  auto base = [&](std::size_t i) {
    const std::size_t d = dirs[i];
    return measure_cycles([&] {
             baseline.set_direction(d);
             fixed.take();
           }).cycles;
  };
  auto base_buffered = [&](std::size_t i) {
    const std::size_t d = dirs[i];
    return measure_cycles([&] {
             baseline.set_direction(d);
             fixed.smc_buffer();
             fixed.take();
           }).cycles;
  };
  RawSeries r0, r1, r2, r3;
  run_interleaved(ctx, ctx.total(), kBlock, {&r0, &r1, &r2, &r3}, unbuffered, buffered, base,
                  base_buffered);
  ctx.settle_overhead();
  ctx.result.arms.push_back(make_arm(ctx, "unbuffered", r0, dirs));
  ctx.result.arms.push_back(make_arm(ctx, "buffered", r1, dirs));
  ctx.result.arms.push_back(make_arm(ctx, "baseline", r2, dirs));
  ctx.result.arms.push_back(make_arm(ctx, "baseline_buffered", r3, dirs));
  auto& m = ctx.result.metrics;
  const auto& arms = ctx.result.arms;
  m["penalty_unbuffered"] = median_of(arms[0]) - median_of(arms[2]);
  m["penalty_buffered"] = median_of(arms[1]) - median_of(arms[3]);

  if (ctx.caps.smc_event && ctx.caps.events && ctx.caps.events->smc_clears) {
    auto counter = open_raw(*ctx.caps.events->smc_clears, ctx.result);
    if (counter) {
      const std::size_t n = ctx.iterations;
      auto plain = count_blocks(*counter, "unbuffered", "smc_clears", n, [&](std::size_t i) {
        branch.set_direction(std::size_t{dirs[i]});
        branch.take();
      });
      auto buf = count_blocks(*counter, "buffered", "smc_clears", n, [&](std::size_t i) {
        branch.set_direction(std::size_t{dirs[i]});
        branch.smc_buffer();
        branch.take();
      });
      const double per_plain = total(plain) / static_cast<double>(n);
      const double per_buf = total(buf) / static_cast<double>(n);
      m["clears_per_iter_unbuffered"] = per_plain;
      m["clears_per_iter_buffered"] = per_buf;
      if (per_plain > 0) {
        m["cycles_per_clear"] = (arms[0].summary.mean - arms[2].summary.mean) / per_plain;
      }
      plain.name = "unbuffered_count";
      buf.name = "buffered_count";
      ctx.result.arms.push_back(std::move(plain));
      ctx.result.arms.push_back(std::move(buf));
    }
  }
}

void run_s4(RunContext& ctx) {
  SemiStaticBranch<void(), 0> branch({body_0, body_1}, ctx.options());
  SemiStaticBranch<void(), 1> fixed({body_0, body_1}, ctx.options());
  StoreBaseline baseline(branch.core());
  const auto dirs = interval_conditions(ctx.total(), 1);

  auto unbuffered = [&](std::size_t i) {
    branch.set_direction(std::size_t{dirs[i]});
    return measure_cycles([&] { branch.take(); }).cycles;
  };
  auto buffered = [&](std::size_t i) {
    branch.set_direction(std::size_t{dirs[i]});
    branch.smc_buffer();
    return measure_cycles([&] { branch.take(); }).cycles;
  };
  auto base = [&](std::size_t i) {
    baseline.set_direction(std::size_t{dirs[i]});
    return measure_cycles([&] { fixed.take(); }).cycles;
  };
  auto base_buffered = [&](std::size_t i) {
    baseline.set_direction(std::size_t{dirs[i]});
    fixed.smc_buffer();
    return measure_cycles([&] { fixed.take(); }).cycles;
  };
  RawSeries r0, r1, r2, r3;
  run_interleaved(ctx, ctx.total(), kBlock, {&r0, &r1, &r2, &r3}, unbuffered, buffered, base,
                  base_buffered);
  ctx.settle_overhead();
  ctx.result.arms.push_back(make_arm(ctx, "unbuffered", r0, dirs));
  ctx.result.arms.push_back(make_arm(ctx, "buffered", r1, dirs));
  ctx.result.arms.push_back(make_arm(ctx, "baseline", r2, dirs));
  ctx.result.arms.push_back(make_arm(ctx, "baseline_buffered", r3, dirs));
  auto& m = ctx.result.metrics;
  const auto& arms = ctx.result.arms;
  m["penalty_unbuffered"] = median_of(arms[0]) - median_of(arms[2]);
  m["penalty_buffered"] = median_of(arms[1]) - median_of(arms[3]);

  if (ctx.caps.baclears_event && ctx.caps.events && ctx.caps.events->baclears) {
    auto counter = open_raw(*ctx.caps.events->baclears, ctx.result);
    if (counter) {
      const std::size_t n = ctx.iterations;
      auto plain = count_blocks(*counter, "unbuffered_count", "baclears", n, [&](std::size_t i) {
        branch.set_direction(std::size_t{dirs[i]});
        branch.take();
      });
      auto buf = count_blocks(*counter, "buffered_count", "baclears", n, [&](std::size_t i) {
        branch.set_direction(std::size_t{dirs[i]});
        branch.smc_buffer();
        branch.take();
      });
      m["resteers_per_iter_unbuffered"] = total(plain) / static_cast<double>(n);
      m["resteers_per_iter_buffered"] = total(buf) / static_cast<double>(n);
      ctx.result.arms.push_back(std::move(plain));
      ctx.result.arms.push_back(std::move(buf));
    }
  }
}

void run_s5(RunContext& ctx) {
  SemiStaticBranch<void(), 0> branch({body_0, body_1}, ctx.options());
  SemiStaticBranch<void(), 1> fixed({body_0, body_1}, ctx.options());
  const auto dirs = interval_conditions(ctx.total(), 1);
  const bool buffer = ctx.config.buffer;

  auto cold = [&](std::size_t i) {
    branch.set_direction(std::size_t{dirs[i]});
    if (buffer) {
      branch.smc_buffer();
    }
    return measure_cycles([&] { branch.take(); }).cycles;
  };
  auto warmed = [&](std::size_t i) {
    branch.set_direction(std::size_t{dirs[i]});
    if (buffer) {
      branch.smc_buffer();
    }
    branch.warm();
    return measure_cycles([&] { branch.take(); }).cycles;
  };
  auto steady = [&](std::size_t) { return measure_cycles([&] { fixed.take(); }).cycles; };
  RawSeries r0, r1, r2;
  run_interleaved(ctx, ctx.total(), kBlock, {&r0, &r1, &r2}, cold, warmed, steady);
  ctx.settle_overhead();
  ctx.result.arms.push_back(make_arm(ctx, "unwarmed", r0, dirs));
  ctx.result.arms.push_back(make_arm(ctx, "warmed", r1, dirs));
  ctx.result.arms.push_back(make_arm(ctx, "constant_direction", r2));
  const auto& arms = ctx.result.arms;
  ctx.result.metrics["warming_gain"] = median_of(arms[0]) - median_of(arms[1]);
  ctx.result.metrics["warmed_excess"] = median_of(arms[1]) - median_of(arms[2]);
}

}  // namespace semistatic::bench::detail
