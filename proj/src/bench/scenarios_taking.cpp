// Scenarios that compare the cost of taking a branch: S3, S7.

#include <cmath>
#include <stdexcept>

#include "scenario_internal.hpp"
#include "semistatic/bench/bodies.hpp"

namespace semistatic::bench::detail {

namespace {

using measure::measure_cycles;

[[gnu::always_inline]] inline void dispatch_switch(std::size_t index) {
  switch (index) {
    case 0: body_0(); break;
    case 1: body_1(); break;
    case 2: body_2(); break;
    case 3: body_3(); break;
    case 4: body_4(); break;
    case 5: body_5(); break;
    case 6: body_6(); break;
    case 7: body_7(); break;
    default: break;
  }
}

}  // namespace

double uniformity_error(const std::vector<std::uint8_t>& seq, std::size_t fanout) {
  std::vector<std::size_t> counts(fanout, 0);
  for (auto v : seq) {
    ++counts[v];
  }
  const double expected = static_cast<double>(seq.size()) / static_cast<double>(fanout);
  double worst = 0.0;
  for (auto c : counts) {
    worst = std::max(worst, std::abs(static_cast<double>(c) / expected - 1.0));
  }
  return worst;
}

void run_s3(RunContext& ctx) {
  preflight_bodies(ctx, 2);
  SemiStaticBranch<void(), 0> branch({body_0, body_1}, ctx.options());
  const auto writes_before = branch.writes();

  auto take = [&](std::size_t) { return measure_cycles([&] { branch.take(); }).cycles; };
  auto call = [&](std::size_t) { return measure_cycles([&] { body_0(); }).cycles; };
  RawSeries r0, r1;
  run_interleaved(ctx, ctx.total(), kBlock, {&r0, &r1}, take, call);
  ctx.settle_overhead();
  if (branch.writes() != writes_before) {
    throw std::logic_error("s3: direction changed inside the measured arm");
  }

  ctx.result.arms.push_back(make_arm(ctx, "take", r0));
  ctx.result.arms.push_back(make_arm(ctx, "direct_call", r1));
  const auto& a = ctx.result.arms[0];
  const auto& b = ctx.result.arms[1];
  ctx.result.metrics["median_diff"] = median_of(a) - median_of(b);
  ctx.result.metrics["sd_diff"] = a.summary.sd - b.summary.sd;
}

void run_s7(RunContext& ctx) {
  const std::size_t fanout = ctx.config.switch_fanout;
  preflight_bodies(ctx, fanout);
  SemiStaticBranch<void(), 2> branch(std::span<const Body>(kBodies.data(), fanout),
                                     ctx.options());
  const auto indices = random_indices(ctx.config.seed, ctx.total(), fanout);
  ctx.result.metrics["uniformity_error"] = uniformity_error(indices, fanout);

  Message switch_msg{};
  Message branch_msg{};
  Filler switch_filler(ctx.config.seed + 1, ctx.config.filler_macs);
  Filler branch_filler(ctx.config.seed + 1, ctx.config.filler_macs);
  const bool warming = ctx.config.warming;
  const bool buffer = ctx.config.buffer;

  auto native = [&](std::size_t i) {
    const std::size_t index = indices[i];
    switch_filler.run(switch_msg);
    return measure_cycles([&] { dispatch_switch(index); }).cycles;
  };
  auto semi = [&](std::size_t i) {
    branch.set_direction(std::size_t{indices[i]});
    if (buffer) {
      branch.smc_buffer();
    }
    branch_filler.run(branch_msg);
    if (warming) {
      branch.warm();
    }
    return measure_cycles([&] { branch.take(); }).cycles;
  };
  RawSeries r0, r1;
  run_interleaved(ctx, ctx.total(), kBlock, {&r0, &r1}, native, semi);
  ctx.settle_overhead();

  ctx.result.arms.push_back(make_arm(ctx, "switch", r0, indices));
  ctx.result.arms.push_back(make_arm(ctx, "semistatic", r1, indices));
  const auto& a = ctx.result.arms[0];
  const auto& b = ctx.result.arms[1];
  ctx.result.metrics["median_diff"] = median_of(a) - median_of(b);
}

}  // namespace semistatic::bench::detail
