#pragma once

// Semi-static branches: direction is selected on the cold path by patching a
// jump, and taken on the hot path through a direct call to the entry stub.
//
//   int add(int, int);
//   int sub(int, int);
//
//   semistatic::SemiStaticBranch<int(int, int)> branch{add, sub};
//   branch.set_direction(condition);  // cold path
//   int r = branch.take(5, 3);        // hot path: call stub -> jmp add/sub
//
// Not thread safe under mutation: set_direction must be serialized against
// take(). SynchronizedBranch provides that serialization with a mutex.

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include "semistatic/codepatch.hpp"
#include "semistatic/error.hpp"
#include "semistatic/platform.hpp"
#include "semistatic/registry.hpp"
#include "semistatic/stub.hpp"

namespace semistatic {

struct BranchOptions {
  /// Target index patched in at creation. Index 0 is the "true" branch.
  std::size_t initial_direction = 0;
  /// Keep stub pages read+exec except during a patch store. Always on in SAFE_MODE builds.
  bool safe_mode = kSafeModeBuild;
};

/// Precomputed rel32 displacement for every target, relative to one stub.
class JumpTable {
 public:
  JumpTable() = default;
  /// Throws BranchError(DisplacementOutOfRange) if any target is out of reach.
  JumpTable(codepatch::CodeAddress entry, std::span<const codepatch::CodeAddress> targets);

  std::size_t size() const noexcept { return offsets_.size(); }
  const codepatch::Rel32Patch& offset(std::size_t i) const noexcept { return offsets_[i]; }
  codepatch::CodeAddress target(std::size_t i) const noexcept { return targets_[i]; }

 private:
  std::vector<codepatch::Rel32Patch> offsets_;
  std::vector<codepatch::CodeAddress> targets_;
};

inline constexpr std::size_t kSmcBufferLength = 128;

/// Signature-agnostic lifecycle of one branch: stub ownership, page
/// protection, direction state and write accounting.
class BranchCore {
 public:
  BranchCore() = default;
  /// Acquires `slot` of `signature` (or the first free slot when `slot` is
  /// npos), encodes every target and arms the stub on `initial_direction`.
  /// No code byte is modified unless every check passes.
  static BranchCore create(SignatureId signature, std::size_t slot,
                           std::span<const codepatch::CodeAddress> targets,
                           BranchOptions options = {});

  BranchCore(BranchCore&& other) noexcept;
  BranchCore& operator=(BranchCore&& other) noexcept;
  BranchCore(const BranchCore&) = delete;
  BranchCore& operator=(const BranchCore&) = delete;
  ~BranchCore() { release(); }

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

  /// Boolean form for two-way branches: true selects target 0, false target 1.
  template <std::same_as<bool> B>
  void set_direction(B condition) {
    set_direction(condition ? std::size_t{0} : std::size_t{1});
  }

  /// Unlocks the stub page for the store only and restores read+exec after.
  void set_direction_safe(std::size_t index);

  /// Flushes the stub's cache line, then burns a fixed amount of dependent
  /// integer work before the next take().
  void smc_buffer() const noexcept;

  /// Re-points the stub at the pool's inert target and returns it to the pool.
  void release() noexcept;

  bool live() const noexcept { return stub_.in_use; }
  std::size_t direction() const noexcept { return direction_; }
  std::uint64_t writes() const noexcept { return writes_; }
  std::size_t size() const noexcept { return table_.size(); }
  bool safe_mode() const noexcept { return safe_mode_; }
  const EntryStub& stub() const noexcept { return stub_; }
  const JumpTable& table() const noexcept { return table_; }

 private:
  void check_index(std::size_t index) const {
    if (index >= table_.size()) {
      throw std::out_of_range("branch direction outside the jump table");
    }
  }

  void patch_fast(std::size_t index) noexcept {
#if SEMISTATIC_PATCHING
    codepatch::store_rel32(stub_.entry, table_.offset(index));
#else
    *stub_.dispatch_slot = reinterpret_cast<void*>(table_.target(index).value);
#endif
  }

  void patch_safe(std::size_t index);

  EntryStub stub_;
  JumpTable table_;
  std::size_t direction_ = 0;
  std::uint64_t writes_ = 0;
  bool safe_mode_ = false;
};

template <typename Sig, std::size_t Slot = 0>
class SemiStaticBranch;

/// Typed front-end. `Slot` picks the stub at compile time so take() is a
/// direct call; two live branches with the same (Sig, Slot) are rejected.
template <typename Ret, typename... Args, std::size_t Slot>
class SemiStaticBranch<Ret(Args...), Slot> {
 public:
  using Signature = Ret(Args...);
  using Target = Ret (*)(Args...);
  static_assert(Slot < pool_size_v<Signature>, "slot outside the stub pool for this signature");

  SemiStaticBranch(std::initializer_list<Target> targets, BranchOptions options = {})
      : SemiStaticBranch(std::span<const Target>(targets.begin(), targets.size()), options) {}

  explicit SemiStaticBranch(std::span<const Target> targets, BranchOptions options = {})
      : core_(BranchCore::create(signature_id<Signature>(), Slot, addresses(targets), options)) {}

  /// Builds from raw addresses, which need not be real functions until taken.
  static SemiStaticBranch from_addresses(std::span<const codepatch::CodeAddress> targets,
                                         BranchOptions options = {}) {
    return SemiStaticBranch(
        BranchCore::create(signature_id<Signature>(), Slot, targets, options));
  }

  [[gnu::always_inline]] inline Ret take(Args... args) const {
    return detail::Stub<Signature, Slot>::entry(args...);
  }

  /// Sends dummy arguments through the branch so the BTB and the target's
  /// instruction lines are primed before the next latency-critical take().
  void warm(Args... dummy) const { static_cast<void>(take(dummy...)); }
  void warm_n(std::size_t times, Args... dummy) const {
    for (std::size_t i = 0; i < times; ++i) {
      static_cast<void>(take(dummy...));
    }
  }

  void set_direction(std::size_t index) { core_.set_direction(index); }
  template <std::same_as<bool> B>
  void set_direction(B condition) {
    core_.set_direction(condition);
  }
  void set_direction_safe(std::size_t index) { core_.set_direction_safe(index); }
  void smc_buffer() const noexcept { core_.smc_buffer(); }
  void release() noexcept { core_.release(); }

  std::size_t direction() const noexcept { return core_.direction(); }
  std::uint64_t writes() const noexcept { return core_.writes(); }
  std::size_t size() const noexcept { return core_.size(); }
  bool live() const noexcept { return core_.live(); }
  codepatch::CodeAddress entry() const noexcept { return stub_entry<Signature, Slot>(); }
  const BranchCore& core() const noexcept { return core_; }

 private:
  explicit SemiStaticBranch(BranchCore core) : core_(std::move(core)) {}

  static std::vector<codepatch::CodeAddress> addresses(std::span<const Target> targets) {
    std::vector<codepatch::CodeAddress> out;
    out.reserve(targets.size());
    for (Target t : targets) {
      out.push_back(codepatch::CodeAddress::of_function(t));
    }
    return out;
  }

  BranchCore core_;
};

template <typename Sig, std::size_t Slot = 0>
class SynchronizedBranch;

/// Mutex around both direction changes and taking. Correct under concurrent
/// mutation, at the price of a lock on every take().
template <typename Ret, typename... Args, std::size_t Slot>
class SynchronizedBranch<Ret(Args...), Slot> {
 public:
  using Inner = SemiStaticBranch<Ret(Args...), Slot>;
  using Target = typename Inner::Target;

  SynchronizedBranch(std::initializer_list<Target> targets, BranchOptions options = {})
      : branch_(targets, options) {}

  Ret take(Args... args) const {
    std::lock_guard lock(mutex_);
    return branch_.take(args...);
  }

  void set_direction(std::size_t index) {
    std::lock_guard lock(mutex_);
    branch_.set_direction(index);
  }
  template <std::same_as<bool> B>
  void set_direction(B condition) {
    std::lock_guard lock(mutex_);
    branch_.set_direction(condition);
  }

  std::size_t direction() const {
    std::lock_guard lock(mutex_);
    return branch_.direction();
  }

 private:
  Inner branch_;
  mutable std::mutex mutex_;
};

}  // namespace semistatic
