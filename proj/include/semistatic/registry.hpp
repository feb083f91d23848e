#pragma once

#include <cstddef>
#include <mutex>
#include <set>

#include "semistatic/codepatch.hpp"
#include "semistatic/stub.hpp"

namespace semistatic {

/// One stub of a signature pool, as handed out by the registry.
struct EntryStub {
  codepatch::CodeAddress entry;
  SignatureId signature = nullptr;
  std::size_t slot = 0;
  void** dispatch_slot = nullptr;
  bool in_use = false;
};

/// Entry addresses currently bound to a live branch. An address is never
/// handed out twice; a second claim raises DuplicateEntryPoint.
class StubRegistry {
 public:
  static StubRegistry& instance();

  /// First free stub of the pool. DuplicateEntryPoint when the pool is exhausted.
  EntryStub acquire(SignatureId signature);
  /// A specific slot. DuplicateEntryPoint when it is already live.
  EntryStub acquire_slot(SignatureId signature, std::size_t slot);
  /// Returns the stub to its pool. Releasing a free stub is a no-op.
  void release(EntryStub& stub) noexcept;

  bool is_live(codepatch::CodeAddress entry) const;
  std::size_t live_count() const;

 private:
  StubRegistry() = default;

  mutable std::mutex mutex_;
  std::set<std::uintptr_t> live_;
};

inline EntryStub acquire_stub(SignatureId signature) {
  return StubRegistry::instance().acquire(signature);
}

inline void release_stub(EntryStub& stub) noexcept { StubRegistry::instance().release(stub); }

}  // namespace semistatic
