#include "semistatic/codepatch.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "semistatic/error.hpp"

#if SEMISTATIC_HOST_X86_64_LINUX
#include <sys/mman.h>
#include <unistd.h>
#include <x86intrin.h>
#endif

namespace semistatic {

const char* host_architecture() noexcept {
#if defined(__x86_64__)
  return "x86_64";
#elif defined(__aarch64__)
  return "aarch64";
#elif defined(__i386__)
  return "i386";
#else
  return "unknown";
#endif
}

}  // namespace semistatic

namespace semistatic::codepatch {

std::size_t system_page_size() noexcept {
#if SEMISTATIC_HOST_X86_64_LINUX
  static const std::size_t size = static_cast<std::size_t>(::sysconf(_SC_PAGESIZE));
#else
  static const std::size_t size = 4096;
#endif
  return size;
}

PageRegion PageRegion::covering(CodeAddress addr, std::size_t bytes,
                                std::size_t page_size) noexcept {
  const CodeAddress first = page_base(addr, page_size);
  const CodeAddress last = page_base(CodeAddress{addr.value + std::max<std::size_t>(bytes, 1) - 1},
                                     page_size);
  return PageRegion{first, last.value - first.value + page_size, page_size};
}

void set_region_protection(const PageRegion& region, ProtectionMode mode) {
#if SEMISTATIC_HOST_X86_64_LINUX
  const int prot = mode == ProtectionMode::ReadWriteExec ? PROT_READ | PROT_WRITE | PROT_EXEC
                                                         : PROT_READ | PROT_EXEC;
  if (::mprotect(reinterpret_cast<void*>(region.base.value), region.length, prot) != 0) {
    throw BranchError::platform_error("mprotect", errno);
  }
#else
  (void)region;
  (void)mode;
  throw BranchError::unsupported_platform("no page protection call");
#endif
}

bool displacement_fits(CodeAddress entry, CodeAddress target, std::size_t instr_len) noexcept {
  // Work in 128 bits so far-apart addresses cannot wrap.
  const __int128 d = static_cast<__int128>(target.value) - static_cast<__int128>(entry.value) -
                     static_cast<__int128>(instr_len);
  return d >= std::numeric_limits<std::int32_t>::min() &&
         d <= std::numeric_limits<std::int32_t>::max();
}

Rel32Patch encode_rel32(CodeAddress entry, CodeAddress target, std::size_t instr_len,
                        std::endian order) {
  if (!displacement_fits(entry, target, instr_len)) {
    throw BranchError::displacement_out_of_range();
  }
  const auto offset = static_cast<std::uint32_t>(
      static_cast<std::int32_t>(target.value - entry.value - instr_len));
  Rel32Patch patch{{
      static_cast<std::uint8_t>(offset & 0xff),
      static_cast<std::uint8_t>((offset >> 8) & 0xff),
      static_cast<std::uint8_t>((offset >> 16) & 0xff),
      static_cast<std::uint8_t>((offset >> 24) & 0xff),
  }};
  if (order == std::endian::big) {
    std::reverse(patch.bytes.begin(), patch.bytes.end());
  }
  return patch;
}

std::int32_t decode_rel32(const Rel32Patch& patch, std::endian order) noexcept {
  auto b = patch.bytes;
  if (order == std::endian::big) {
    std::reverse(b.begin(), b.end());
  }
  const std::uint32_t u = static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
                          static_cast<std::uint32_t>(b[2]) << 16 |
                          static_cast<std::uint32_t>(b[3]) << 24;
  return static_cast<std::int32_t>(u);
}

CodeAddress jump_destination(CodeAddress entry, const Rel32Patch& patch,
                             std::size_t instr_len) noexcept {
  return CodeAddress{entry.value + instr_len +
                     static_cast<std::uintptr_t>(static_cast<std::intptr_t>(decode_rel32(patch)))};
}

Rel32Patch read_rel32(CodeAddress entry) noexcept {
  Rel32Patch patch;
  __builtin_memcpy(patch.bytes.data(), entry.bytes() + 1, patch.bytes.size());
  return patch;
}

void write_jump(CodeAddress entry, const Rel32Patch& patch, bool arm) {
  const PageRegion region = PageRegion::covering(entry, kJumpLength);
  for (std::size_t i = 0; i < region.page_count(); ++i) {
    const auto prot = query_protection(CodeAddress{region.base.value + i * region.page_size});
    if (!prot || !prot->writable) {
      throw BranchError::platform_error("write_jump (page not writable)", EACCES);
    }
  }
  if (arm) {
    *reinterpret_cast<volatile std::uint8_t*>(entry.value) = kJmpRel32Opcode;
  }
  store_rel32(entry, patch);
}

void flush_code_line(CodeAddress addr) noexcept {
#if defined(__x86_64__)
  _mm_clflush(reinterpret_cast<const void*>(addr.value));
#else
  (void)addr;
#endif
}

std::optional<MappingProtection> query_protection(CodeAddress addr) {
  std::ifstream maps("/proc/self/maps");
  std::string line;
  while (std::getline(maps, line)) {
    std::uintptr_t lo = 0;
    std::uintptr_t hi = 0;
    char perms[5] = {};
    if (std::sscanf(line.c_str(), "%lx-%lx %4s", &lo, &hi, perms) != 3) {
      continue;
    }
    if (addr.value >= lo && addr.value < hi) {
      return MappingProtection{perms[0] == 'r', perms[1] == 'w', perms[2] == 'x'};
    }
  }
  return std::nullopt;
}

}  // namespace semistatic::codepatch
