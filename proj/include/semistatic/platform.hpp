#pragma once

// Platform selection. Code patching needs x86-64, a POSIX page-protection
// call and GCC/Clang attributes for the entry stubs.

#if defined(__x86_64__) && defined(__linux__) && (defined(__GNUC__) || defined(__clang__))
#define SEMISTATIC_HOST_X86_64_LINUX 1
#else
#define SEMISTATIC_HOST_X86_64_LINUX 0
#endif

// Test-only: dispatch through a function pointer instead of a patched jump.
// Never used for benchmarks.
#if defined(SEMISTATIC_INDIRECT_FALLBACK)
#define SEMISTATIC_PATCHING 0
#define SEMISTATIC_FALLBACK 1
#elif SEMISTATIC_HOST_X86_64_LINUX
#define SEMISTATIC_PATCHING 1
#define SEMISTATIC_FALLBACK 0
#else
#define SEMISTATIC_PATCHING 0
#define SEMISTATIC_FALLBACK 0
#endif

#if defined(SAFE_MODE)
#define SEMISTATIC_SAFE_MODE_DEFAULT true
#else
#define SEMISTATIC_SAFE_MODE_DEFAULT false
#endif

#ifndef SEMISTATIC_POOL_SIZE
#define SEMISTATIC_POOL_SIZE 8
#endif

namespace semistatic {

inline constexpr bool kPatchingSupported = SEMISTATIC_PATCHING != 0;
inline constexpr bool kIndirectFallback = SEMISTATIC_FALLBACK != 0;
inline constexpr bool kSafeModeBuild = SEMISTATIC_SAFE_MODE_DEFAULT;

const char* host_architecture() noexcept;

}  // namespace semistatic
