#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

#include "semistatic/branch.hpp"

namespace semistatic {

using codepatch::CodeAddress;
using codepatch::PageRegion;
using codepatch::ProtectionMode;

namespace {

// Pages held writable by fast-mode branches. A page goes back to read+exec
// only once no fast-mode branch on it remains, so safe-mode relocking never
// pulls a page out from under a fast-mode neighbour.
class PageLocks {
 public:
  static PageLocks& instance() {
    static PageLocks locks;
    return locks;
  }

  void hold(const PageRegion& region) {
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < region.page_count(); ++i) {
      const std::uintptr_t page = region.base.value + i * region.page_size;
      auto& holders = holders_[page];
      if (holders == 0) {
        try {
          protect(page, region.page_size, ProtectionMode::ReadWriteExec);
        } catch (...) {
          holders_.erase(page);
          unwind(region, i);
          throw;
        }
      }
      ++holders;
    }
  }

  void drop(const PageRegion& region) noexcept {
    std::lock_guard lock(mutex_);
    unwind(region, region.page_count());
  }

  template <typename Fn>
  void with_writable(const PageRegion& region, Fn&& store) {
    std::lock_guard lock(mutex_);
    codepatch::set_region_protection(region, ProtectionMode::ReadWriteExec);
    store();
    for (std::size_t i = 0; i < region.page_count(); ++i) {
      const std::uintptr_t page = region.base.value + i * region.page_size;
      if (holders_.count(page) == 0) {
        protect(page, region.page_size, ProtectionMode::ReadExec);
      }
    }
  }

 private:
  static void protect(std::uintptr_t page, std::size_t page_size, ProtectionMode mode) {
    codepatch::set_region_protection(PageRegion{CodeAddress{page}, page_size, page_size}, mode);
  }

  // Drops one hold on the first `pages` pages of `region`.
  void unwind(const PageRegion& region, std::size_t pages) noexcept {
    for (std::size_t i = 0; i < pages; ++i) {
      const std::uintptr_t page = region.base.value + i * region.page_size;
      auto it = holders_.find(page);
      if (it == holders_.end()) {
        continue;
      }
      if (--it->second == 0) {
        holders_.erase(it);
        try {
          protect(page, region.page_size, ProtectionMode::ReadExec);
        } catch (...) {
        }
      }
    }
  }

  std::mutex mutex_;
  std::map<std::uintptr_t, std::size_t> holders_;
};

[[maybe_unused]] PageRegion stub_region(CodeAddress entry) {
  return PageRegion::covering(entry, codepatch::kJumpLength);
}

}  // namespace

JumpTable::JumpTable(CodeAddress entry, std::span<const CodeAddress> targets)
    : targets_(targets.begin(), targets.end()) {
  offsets_.reserve(targets.size());
  for (CodeAddress target : targets) {
    offsets_.push_back(codepatch::encode_rel32(entry, target));
  }
}

BranchCore BranchCore::create(SignatureId signature, std::size_t slot,
                              std::span<const CodeAddress> targets, BranchOptions options) {
  if constexpr (!kPatchingSupported && !kIndirectFallback) {
    throw BranchError::unsupported_platform(host_architecture());
  }
  if (targets.size() < 2) {
    throw std::invalid_argument("a semi-static branch needs at least two targets");
  }
  if (options.initial_direction >= targets.size()) {
    throw std::out_of_range("initial direction outside the target list");
  }

  auto& registry = StubRegistry::instance();
  BranchCore core;
  core.stub_ = slot == static_cast<std::size_t>(-1) ? registry.acquire(signature)
                                                   : registry.acquire_slot(signature, slot);
  core.safe_mode_ = options.safe_mode || kSafeModeBuild;
  core.direction_ = options.initial_direction;

  try {
    core.table_ = JumpTable(core.stub_.entry, targets);
  } catch (...) {
    registry.release(core.stub_);
    throw;
  }

#if SEMISTATIC_PATCHING
  const PageRegion region = stub_region(core.stub_.entry);
  const auto& first = core.table_.offset(core.direction_);
  try {
    if (core.safe_mode_) {
      PageLocks::instance().with_writable(
          region, [&] { codepatch::write_jump(core.stub_.entry, first, true); });
    } else {
      PageLocks::instance().hold(region);
      try {
        codepatch::write_jump(core.stub_.entry, first, true);
      } catch (...) {
        PageLocks::instance().drop(region);
        throw;
      }
    }
  } catch (const BranchError& e) {
    registry.release(core.stub_);
    throw BranchError(ErrorCode::UnsupportedPlatform,
                      std::string("could not unlock the entry stub page: ") + e.what(),
                      e.os_error());
  }
#else
  *core.stub_.dispatch_slot = reinterpret_cast<void*>(core.table_.target(core.direction_).value);
#endif
  return core;
}

BranchCore::BranchCore(BranchCore&& other) noexcept
    : stub_(std::exchange(other.stub_, EntryStub{})),
      table_(std::move(other.table_)),
      direction_(other.direction_),
      writes_(other.writes_),
      safe_mode_(other.safe_mode_) {}

BranchCore& BranchCore::operator=(BranchCore&& other) noexcept {
  if (this != &other) {
    release();
    stub_ = std::exchange(other.stub_, EntryStub{});
    table_ = std::move(other.table_);
    direction_ = other.direction_;
    writes_ = other.writes_;
    safe_mode_ = other.safe_mode_;
  }
  return *this;
}

void BranchCore::set_direction_safe(std::size_t index) {
  check_index(index);
  if (index == direction_) {
    return;
  }
  patch_safe(index);
  direction_ = index;
  ++writes_;
}

void BranchCore::patch_safe(std::size_t index) {
#if SEMISTATIC_PATCHING
  const auto& patch = table_.offset(index);
  PageLocks::instance().with_writable(stub_region(stub_.entry),
                                      [&] { codepatch::store_rel32(stub_.entry, patch); });
#else
  patch_fast(index);
#endif
}

void BranchCore::smc_buffer() const noexcept {
  codepatch::flush_code_line(stub_.entry);
  std::uint64_t buffer[kSmcBufferLength];
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < kSmcBufferLength; ++i) {
    buffer[i] = ++acc;
    asm volatile("" : "+r"(acc) : "r"(buffer) : "memory");
  }
}

void BranchCore::release() noexcept {
  if (!stub_.in_use) {
    return;
  }
  const CodeAddress inert = stub_.signature->inert_target;
#if SEMISTATIC_PATCHING
  const PageRegion region = stub_region(stub_.entry);
  try {
    const auto patch = codepatch::encode_rel32(stub_.entry, inert);
    if (safe_mode_) {
      PageLocks::instance().with_writable(region,
                                          [&] { codepatch::store_rel32(stub_.entry, patch); });
    } else {
      codepatch::store_rel32(stub_.entry, patch);
      PageLocks::instance().drop(region);
    }
  } catch (...) {
    // The stub keeps its last target; the slot is still returned.
  }
#else
  *stub_.dispatch_slot = reinterpret_cast<void*>(inert.value);
#endif
  StubRegistry::instance().release(stub_);
}

}  // namespace semistatic
