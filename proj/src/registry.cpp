#include "semistatic/registry.hpp"

#include <atomic>
#include <cstdio>
#include <stdexcept>

#include "semistatic/error.hpp"

namespace semistatic {

namespace {
std::atomic<std::size_t> g_stale_calls{0};
}  // namespace

namespace detail {

void note_stale_call() noexcept {
  g_stale_calls.fetch_add(1, std::memory_order_relaxed);
#ifndef NDEBUG
  std::fputs("semistatic: call through a released entry stub\n", stderr);
#endif
}

}  // namespace detail

std::size_t stale_call_count() noexcept { return g_stale_calls.load(std::memory_order_relaxed); }

StubRegistry& StubRegistry::instance() {
  static StubRegistry registry;
  return registry;
}

EntryStub StubRegistry::acquire(SignatureId signature) {
  std::lock_guard lock(mutex_);
  for (std::size_t slot = 0; slot < signature->entries.size(); ++slot) {
    const auto entry = signature->entries[slot];
    if (live_.insert(entry.value).second) {
      return EntryStub{entry, signature, slot, signature->dispatch_slots[slot], true};
    }
  }
  throw BranchError::duplicate_entry_point();
}

EntryStub StubRegistry::acquire_slot(SignatureId signature, std::size_t slot) {
  if (slot >= signature->entries.size()) {
    throw std::out_of_range("stub slot outside the signature pool");
  }
  std::lock_guard lock(mutex_);
  const auto entry = signature->entries[slot];
  if (!live_.insert(entry.value).second) {
    throw BranchError::duplicate_entry_point();
  }
  return EntryStub{entry, signature, slot, signature->dispatch_slots[slot], true};
}

void StubRegistry::release(EntryStub& stub) noexcept {
  if (!stub.in_use) {
    return;
  }
  std::lock_guard lock(mutex_);
  live_.erase(stub.entry.value);
  stub.in_use = false;
}

bool StubRegistry::is_live(codepatch::CodeAddress entry) const {
  std::lock_guard lock(mutex_);
  return live_.count(entry.value) != 0;
}

std::size_t StubRegistry::live_count() const {
  std::lock_guard lock(mutex_);
  return live_.size();
}

}  // namespace semistatic
