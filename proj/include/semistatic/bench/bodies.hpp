#pragma once

// Branch bodies and filler work shared by the scenarios. Every body is
// non-inlinable and performs the same single store, so arms differ only in
// how they reach it.

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

#include "semistatic/branch.hpp"

namespace semistatic::bench {

inline constexpr std::size_t kMaxFanout = 8;

/// Index of the body that last ran.
extern volatile std::uint32_t g_last_body;

void body_0();
void body_1();
void body_2();
void body_3();
void body_4();
void body_5();
void body_6();
void body_7();

using Body = void (*)();
extern const std::array<Body, kMaxFanout> kBodies;

struct alignas(64) Message {
  std::uint8_t bytes[64];
};

struct alignas(64) Gateway {
  std::uint8_t buffer[64];
  volatile std::uint8_t flag;
};

/// Copy the message into the gateway and flip its flag (1 for send, 0 for
/// adjust).
void send_order(const Message* message, Gateway* gateway);
void adjust_order(const Message* message, Gateway* gateway);

/// Unmeasured per-iteration work standing in for the cold side of a trading
/// loop: fills a message from the PRNG, then runs `macs` data-dependent
/// multiply-accumulates over it. Returns the accumulator so callers can keep it
/// alive.
class Filler {
 public:
  explicit Filler(std::uint64_t seed, std::size_t macs) : rng_(seed), macs_(macs) {}
  double run(Message& message);
  double sink() const noexcept { return acc_; }

 private:
  std::mt19937_64 rng_;
  std::size_t macs_;
  double acc_ = 0.0;
};

/// Same layout and control flow as BranchCore::set_direction, but the four
/// bytes land in a private read-write data page at the same cache-line offset
/// as the real stub.
class StoreBaseline {
 public:
  explicit StoreBaseline(const BranchCore& mirror);
  ~StoreBaseline();
  StoreBaseline(const StoreBaseline&) = delete;
  StoreBaseline& operator=(const StoreBaseline&) = delete;

  void set_direction(std::size_t index) {
    check_index(index);
    if (index == direction_) {
      return;
    }
    if (safe_mode_) {
      patch_safe(index);
    } else {
      patch_fast(index);
    }
    direction_ = index;
    ++writes_;
  }
  template <std::same_as<bool> B>
  void set_direction(B condition) {
    set_direction(condition ? std::size_t{0} : std::size_t{1});
  }

  std::uint64_t writes() const noexcept { return writes_; }
  codepatch::CodeAddress entry() const noexcept { return stub_.entry; }

 private:
  void check_index(std::size_t index) const {
    if (index >= table_.size()) {
      throw std::out_of_range("branch direction outside the jump table");
    }
  }
  void patch_fast(std::size_t index) noexcept {
    codepatch::store_rel32(stub_.entry, table_.offset(index));
  }
  void patch_safe(std::size_t index);

  EntryStub stub_;
  JumpTable table_;
  std::size_t direction_ = 0;
  std::uint64_t writes_ = 0;
  bool safe_mode_ = false;
  void* page_ = nullptr;
};

}  // namespace semistatic::bench
