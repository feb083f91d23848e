#pragma once

// Build-time pool of entry stubs.
//
// Every (signature, slot) pair instantiates one stub whose first instruction
// is a hard-coded `jmp rel32` with a zero displacement. Call sites reach a
// stub through a direct call, so the only thing that ever changes at run time
// is the four displacement bytes.

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <type_traits>
#include <utility>

#include "semistatic/codepatch.hpp"
#include "semistatic/platform.hpp"

#if defined(__clang__)
#define SEMISTATIC_STUB_ATTRS \
  __attribute__((naked, noinline, hot, aligned(16), nocf_check, used))
#else
#define SEMISTATIC_STUB_ATTRS \
  __attribute__((naked, noinline, noipa, no_icf, hot, aligned(16), nocf_check, used))
#endif

namespace semistatic {

/// Number of stubs generated for a signature shape. Specialize to change the
/// pool size of one shape.
template <typename Sig>
inline constexpr std::size_t pool_size_v = SEMISTATIC_POOL_SIZE;

/// Runtime description of one signature's stub pool. Its address is the
/// signature id.
struct SignatureShape {
  std::string_view name;
  std::span<const codepatch::CodeAddress> entries;
  std::span<void** const> dispatch_slots;  // used only by the indirect fallback
  codepatch::CodeAddress inert_target;
};
using SignatureId = const SignatureShape*;

namespace detail {

void note_stale_call() noexcept;

template <typename Sig, std::size_t Slot>
struct Stub;

template <typename Ret, typename... Args, std::size_t Slot>
struct Stub<Ret(Args...), Slot> {
#if SEMISTATIC_PATCHING
  // jmp rel32 (patched), then a zeroing fall-through for the unarmed state.
  SEMISTATIC_STUB_ATTRS static Ret entry(Args...) {
    asm(".byte 0xe9\n\t"
        ".long 0\n\t"
        "xorl %eax, %eax\n\t"
        "xorl %edx, %edx\n\t"
        "pxor %xmm0, %xmm0\n\t"
        "ret");
  }
  static inline void* dispatch = nullptr;
#else
  static inline void* dispatch = nullptr;

  [[gnu::noinline]] static Ret entry(Args... args) {
    auto* fn = reinterpret_cast<Ret (*)(Args...)>(dispatch);
    if (fn == nullptr) {
      if constexpr (!std::is_void_v<Ret>) {
        return Ret{};
      } else {
        return;
      }
    }
    return fn(args...);
  }
#endif
};

template <typename Ret, typename... Args>
[[gnu::noinline]] Ret inert_target(Args...) {
  note_stale_call();
  if constexpr (!std::is_void_v<Ret>) {
    return Ret{};
  }
}

template <typename Sig>
constexpr std::string_view signature_name() {
  std::string_view p = __PRETTY_FUNCTION__;
  const auto at = p.find("Sig = ");
  if (at == std::string_view::npos) {
    return p;
  }
  p.remove_prefix(at + 6);
  return p.substr(0, p.find_first_of(";]"));
}

template <typename Sig>
struct PoolData;

template <typename Ret, typename... Args>
struct PoolData<Ret(Args...)> {
  using Sig = Ret(Args...);
  static constexpr std::size_t kSize = pool_size_v<Sig>;
  static_assert(kSize >= 1, "a stub pool needs at least one slot");

  std::array<codepatch::CodeAddress, kSize> entries;
  std::array<void**, kSize> slots;
  SignatureShape shape;

  PoolData() : PoolData(std::make_index_sequence<kSize>{}) {}

  template <std::size_t... I>
  explicit PoolData(std::index_sequence<I...>)
      : entries{codepatch::CodeAddress::of_function(&Stub<Sig, I>::entry)...},
        slots{&Stub<Sig, I>::dispatch...},
        shape{signature_name<Sig>(), entries, slots,
              codepatch::CodeAddress::of_function(&inert_target<Ret, Args...>)} {}
  PoolData(const PoolData&) = delete;
  PoolData& operator=(const PoolData&) = delete;
};

}  // namespace detail

/// Signature id for `Sig` (a function type such as `int(int, int)`).
template <typename Sig>
SignatureId signature_id() {
  static const detail::PoolData<Sig> pool;
  return &pool.shape;
}

/// Entry address of slot `Slot` of `Sig`'s pool.
template <typename Sig, std::size_t Slot>
codepatch::CodeAddress stub_entry() noexcept {
  return codepatch::CodeAddress::of_function(&detail::Stub<Sig, Slot>::entry);
}

/// Calls made after a branch was released and before its stub was reused.
std::size_t stale_call_count() noexcept;

}  // namespace semistatic
