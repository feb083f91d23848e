// S9: a worker thread flips the condition on a timer while the main thread
// keeps dispatching.

#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

#include "scenario_internal.hpp"
#include "semistatic/bench/bodies.hpp"

namespace semistatic::bench::detail {

namespace {

using measure::measure_cycles;

enum class Mode { Conditional, Semistatic, ConditionalLocked, SemistaticLocked };

constexpr std::size_t kDefaultFlipMicros = 100;

}  // namespace

void run_s9(RunContext& ctx) {
  SemiStaticBranch<void(), 4> branch({body_0, body_1}, ctx.options());
  const auto period = std::chrono::microseconds(
      ctx.config.change_interval != 0 ? ctx.config.change_interval : kDefaultFlipMicros);
  const std::size_t total = ctx.total();
  auto& m = ctx.result.metrics;
  struct Run {
    std::string name;
    RawSeries raw;
    std::vector<std::uint8_t> seen;
  };
  std::vector<Run> runs;

  auto run_arm = [&](const char* name, Mode mode) {
    std::atomic<bool> stop{false};
    std::atomic<std::uint8_t> direction{0};
    std::atomic<std::uint64_t> flips{0};
    std::mutex mutex;
    branch.set_direction(std::size_t{0});
    const bool locked = mode == Mode::ConditionalLocked || mode == Mode::SemistaticLocked;
    const bool patch = mode == Mode::Semistatic || mode == Mode::SemistaticLocked;

    std::thread worker([&] {
      while (!stop.load(std::memory_order_relaxed)) {
        std::this_thread::sleep_for(period);
        std::unique_lock lock(mutex, std::defer_lock);
        if (locked) {
          lock.lock();
        }
        const std::uint8_t next = direction.load(std::memory_order_relaxed) ^ 1;
        direction.store(next, std::memory_order_release);
        if (patch) {
          branch.set_direction(std::size_t{next});
        }
        flips.fetch_add(1, std::memory_order_relaxed);
      }
    });

    RawSeries raw;
    raw.reserve(total);
    std::vector<std::uint8_t> seen;
    seen.reserve(total);
    std::uint64_t wrong = 0;
    for (std::size_t i = 0; i < total; ++i) {
      std::uint8_t d = 0;
      std::uint64_t cycles = 0;
      switch (mode) {
        case Mode::Conditional:
          cycles = measure_cycles([&] {
                     d = direction.load(std::memory_order_acquire);
                     if (d == 0) {
                       body_0();
                     } else {
                       body_1();
                     }
                   }).cycles;
          break;
        case Mode::Semistatic: {
          d = direction.load(std::memory_order_acquire);
          cycles = measure_cycles([&] { branch.take(); }).cycles;
          const std::uint32_t ran = g_last_body;
          if (direction.load(std::memory_order_acquire) == d && ran != d) {
            ++wrong;
          }
          break;
        }
        case Mode::ConditionalLocked:
          cycles = measure_cycles([&] {
                     std::lock_guard lock(mutex);
                     d = direction.load(std::memory_order_relaxed);
                     if (d == 0) {
                       body_0();
                     } else {
                       body_1();
                     }
                   }).cycles;
          break;
        case Mode::SemistaticLocked: {
          std::uint32_t ran = 0;
          cycles = measure_cycles([&] {
                     std::lock_guard lock(mutex);
                     d = direction.load(std::memory_order_relaxed);
                     branch.take();
                     ran = g_last_body;
                   }).cycles;
          if (ran != d) {
            ++wrong;
          }
          break;
        }
      }
      raw.push_back(cycles);
      seen.push_back(d);
      ctx.sample_overhead();
    }
    stop.store(true, std::memory_order_relaxed);
    worker.join();

    runs.push_back(Run{name, std::move(raw), std::move(seen)});
    m[std::string("flips.") + name] = static_cast<double>(flips.load());
    if (patch) {
      m[std::string("wrong_branches.") + name] = static_cast<double>(wrong);
    }
  };

  run_arm("conditional", Mode::Conditional);
  run_arm("semistatic", Mode::Semistatic);
  run_arm("conditional_locked", Mode::ConditionalLocked);
  run_arm("semistatic_locked", Mode::SemistaticLocked);
  branch.set_direction(std::size_t{0});

  ctx.settle_overhead();
  for (const auto& run : runs) {
    ctx.result.arms.push_back(make_arm(ctx, run.name, run.raw, run.seen));
  }
}

}  // namespace semistatic::bench::detail
