#pragma once

// Mechanics of editing live machine code: page arithmetic, page protection,
// rel32 encoding, patch stores and cache-line flushes.
//
// Nothing in here synchronizes. Mutating calls must not race with execution
// of the code they modify.

#include <array>
#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <type_traits>
#include <optional>

#include "semistatic/platform.hpp"

namespace semistatic::codepatch {

/// A virtual address in this process.
struct CodeAddress {
  std::uintptr_t value = 0;

  static CodeAddress of(const void* p) noexcept {
    return CodeAddress{reinterpret_cast<std::uintptr_t>(p)};
  }
  template <typename Fn>
    requires std::is_function_v<Fn>
  static CodeAddress of_function(Fn* fn) noexcept {
    return CodeAddress{reinterpret_cast<std::uintptr_t>(fn)};
  }

  std::uint8_t* bytes() const noexcept { return reinterpret_cast<std::uint8_t*>(value); }
  explicit operator bool() const noexcept { return value != 0; }

  friend constexpr auto operator<=>(CodeAddress, CodeAddress) = default;
};

inline constexpr std::size_t kJumpLength = 5;
inline constexpr std::uint8_t kJmpRel32Opcode = 0xE9;

/// Four displacement bytes as they are stored after the 0xE9 opcode.
struct Rel32Patch {
  std::array<std::uint8_t, 4> bytes{};

  friend constexpr bool operator==(const Rel32Patch&, const Rel32Patch&) = default;
};

/// Platform page size, queried once.
std::size_t system_page_size() noexcept;

/// Largest multiple of `page_size` not above `addr`. `page_size` must be a power of two.
constexpr CodeAddress page_base(CodeAddress addr, std::size_t page_size) noexcept {
  return CodeAddress{addr.value & ~(static_cast<std::uintptr_t>(page_size) - 1)};
}

struct PageRegion {
  CodeAddress base;
  std::size_t length = 0;
  std::size_t page_size = 0;

  /// Whole pages covering [addr, addr + bytes). Spans two pages when the range
  /// crosses a boundary.
  static PageRegion covering(CodeAddress addr, std::size_t bytes,
                             std::size_t page_size = system_page_size()) noexcept;

  std::size_t page_count() const noexcept { return length / page_size; }
};

enum class ProtectionMode { ReadExec, ReadWriteExec };

/// mprotect wrapper. Throws BranchError(PlatformError) with the OS error code.
void set_region_protection(const PageRegion& region, ProtectionMode mode);

/// True when `target - entry - instr_len` fits a signed 32-bit displacement.
bool displacement_fits(CodeAddress entry, CodeAddress target,
                       std::size_t instr_len = kJumpLength) noexcept;

/// Encodes `target - entry - instr_len` as a little-endian rel32. With
/// `order == std::endian::big` the bytes are swapped before storage.
/// Throws BranchError(DisplacementOutOfRange).
Rel32Patch encode_rel32(CodeAddress entry, CodeAddress target,
                        std::size_t instr_len = kJumpLength,
                        std::endian order = std::endian::native);

std::int32_t decode_rel32(const Rel32Patch& patch,
                          std::endian order = std::endian::native) noexcept;

/// Address a jump at `entry` with this patch lands on.
CodeAddress jump_destination(CodeAddress entry, const Rel32Patch& patch,
                             std::size_t instr_len = kJumpLength) noexcept;

/// Bytes currently stored at [entry + 1, entry + 5).
Rel32Patch read_rel32(CodeAddress entry) noexcept;

/// Checked jump write. Verifies the page is writable first (PlatformError
/// otherwise, never a fault), writes 0xE9 when `arm` is set, then stores the
/// four displacement bytes with one 32-bit store.
void write_jump(CodeAddress entry, const Rel32Patch& patch, bool arm);

/// Unchecked 32-bit store of the displacement. The page must be writable.
inline void store_rel32(CodeAddress entry, const Rel32Patch& patch) noexcept {
  using unaligned_u32 [[gnu::aligned(1), gnu::may_alias]] = std::uint32_t;
  std::uint32_t word;
  __builtin_memcpy(&word, patch.bytes.data(), sizeof word);
  *reinterpret_cast<volatile unaligned_u32*>(entry.value + 1) = word;
}

/// Flushes the cache line holding `addr` from every cache level.
void flush_code_line(CodeAddress addr) noexcept;

/// Protection of the mapping containing `addr`, read from /proc/self/maps.
struct MappingProtection {
  bool readable = false;
  bool writable = false;
  bool executable = false;
};
std::optional<MappingProtection> query_protection(CodeAddress addr);

}  // namespace semistatic::codepatch
