#include <doctest.h>

#include <cstring>
#include <random>

#include <sys/mman.h>
#include <unistd.h>

#include "semistatic/codepatch.hpp"
#include "semistatic/error.hpp"

using namespace semistatic;
using namespace semistatic::codepatch;

namespace {

// Independent oracle: byte decomposition by division, no shifts or masks.
std::array<std::uint8_t, 4> le_bytes_by_division(std::int64_t displacement) {
  std::uint64_t u = static_cast<std::uint64_t>(displacement) % 4294967296ULL;
  std::array<std::uint8_t, 4> out{};
  for (auto& b : out) {
    b = static_cast<std::uint8_t>(u % 256);
    u /= 256;
  }
  return out;
}

std::int64_t decode_by_weights(const std::array<std::uint8_t, 4>& b) {
  std::int64_t v = b[0] + 256LL * b[1] + 65536LL * b[2] + 16777216LL * b[3];
  return v >= 2147483648LL ? v - 4294967296LL : v;
}

}  // namespace

TEST_CASE("page_base") {
  CHECK(page_base(CodeAddress{0x2000}, 4096).value == 0x2000);
  CHECK(page_base(CodeAddress{0x2001}, 4096).value == 0x2000);
  CHECK(page_base(CodeAddress{0x11e7}, 4096).value == 0x11e7 - (0x11e7 % 4096));
  CHECK(page_base(CodeAddress{0x11e7}, 4096).value == 0x1000);
}

TEST_CASE("page_base brackets every address") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10000; ++i) {
    const std::uintptr_t a = rng();
    const std::size_t p = std::size_t{1} << (rng() % 22);
    const auto base = page_base(CodeAddress{a}, p).value;
    CHECK(base <= a);
    CHECK(a - base < p);
    CHECK(base % p == 0);
  }
}

TEST_CASE("system page size is a power of two") {
  const auto p = system_page_size();
  CHECK(p >= 4096);
  CHECK((p & (p - 1)) == 0);
  CHECK(p == static_cast<std::size_t>(::sysconf(_SC_PAGESIZE)));
}

TEST_CASE("covering region spans a page boundary when the jump straddles it") {
  const std::size_t p = 4096;
  auto one = PageRegion::covering(CodeAddress{0x10000}, 5, p);
  CHECK(one.base.value == 0x10000);
  CHECK(one.length == p);
  auto two = PageRegion::covering(CodeAddress{0x10000 + p - 3}, 5, p);
  CHECK(two.base.value == 0x10000);
  CHECK(two.length == 2 * p);
  CHECK(two.page_count() == 2);
  auto edge = PageRegion::covering(CodeAddress{0x10000 + p - 5}, 5, p);
  CHECK(edge.length == p);
}

TEST_CASE("encode_rel32 matches the worked call example") {
  const auto patch = encode_rel32(CodeAddress{0x11e7}, CodeAddress{0x11a9}, 5, std::endian::little);
  CHECK(patch.bytes == std::array<std::uint8_t, 4>{0xbd, 0xff, 0xff, 0xff});
  CHECK(decode_rel32(patch, std::endian::little) == -67);
}

TEST_CASE("encode_rel32 trivial displacements") {
  const CodeAddress e{0x400000};
  CHECK(encode_rel32(e, CodeAddress{e.value + 5}, 5, std::endian::little).bytes ==
        std::array<std::uint8_t, 4>{0, 0, 0, 0});
  CHECK(encode_rel32(e, CodeAddress{e.value + 5 + 0x1234}, 5, std::endian::little).bytes ==
        std::array<std::uint8_t, 4>{0x34, 0x12, 0x00, 0x00});
}

TEST_CASE("encode_rel32 agrees with a byte-decomposition oracle") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::int64_t> disp(std::numeric_limits<std::int32_t>::min(),
                                                   std::numeric_limits<std::int32_t>::max());
  for (int i = 0; i < 20000; ++i) {
    const std::int64_t d = disp(rng);
    const CodeAddress entry{0x7f0000000000ULL + (rng() % (1ULL << 36))};
    const CodeAddress target{static_cast<std::uintptr_t>(static_cast<std::int64_t>(entry.value) + 5 + d)};
    const auto patch = encode_rel32(entry, target, 5, std::endian::little);
    REQUIRE(patch.bytes == le_bytes_by_division(d));
    REQUIRE(decode_by_weights(patch.bytes) == d);
    REQUIRE(jump_destination(entry, patch).value == target.value);
  }
}

TEST_CASE("big-endian byte order is swapped and still round-trips") {
  const auto le = encode_rel32(CodeAddress{0x11e7}, CodeAddress{0x11a9}, 5, std::endian::little);
  const auto be = encode_rel32(CodeAddress{0x11e7}, CodeAddress{0x11a9}, 5, std::endian::big);
  CHECK(be.bytes == std::array<std::uint8_t, 4>{0xff, 0xff, 0xff, 0xbd});
  CHECK(decode_rel32(be, std::endian::big) == -67);
  CHECK(decode_rel32(le, std::endian::little) == decode_rel32(be, std::endian::big));
}

TEST_CASE("displacement limits") {
  const CodeAddress e{0x100000000ULL};
  const auto max_ok = CodeAddress{e.value + 5 + 0x7fffffffULL};
  const auto min_ok = CodeAddress{e.value + 5 - 0x80000000ULL};
  CHECK(displacement_fits(e, max_ok));
  CHECK(displacement_fits(e, min_ok));
  CHECK_FALSE(displacement_fits(e, CodeAddress{max_ok.value + 1}));
  CHECK_FALSE(displacement_fits(e, CodeAddress{min_ok.value - 1}));
  CHECK_FALSE(displacement_fits(e, CodeAddress{e.value + (1ULL << 34)}));
  try {
    encode_rel32(e, CodeAddress{e.value + (1ULL << 34)});
    FAIL("expected DisplacementOutOfRange");
  } catch (const BranchError& err) {
    CHECK(err.code() == ErrorCode::DisplacementOutOfRange);
    CHECK(std::string_view(err.what()) == kDisplacementOutOfRangeMessage);
  }
}

namespace {

struct AnonPage {
  std::uint8_t* p;
  std::size_t size;
  AnonPage() : size(system_page_size()) {
    p = static_cast<std::uint8_t*>(
        ::mmap(nullptr, size, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0));
    REQUIRE(p != MAP_FAILED);
  }
  ~AnonPage() { ::munmap(p, size); }
};

}  // namespace

TEST_CASE("set_region_protection toggles writability") {
  AnonPage page;
  const PageRegion region{CodeAddress::of(page.p), page.size, page.size};
  set_region_protection(region, ProtectionMode::ReadWriteExec);
  page.p[0] = 0x90;  // does not fault
  auto prot = query_protection(CodeAddress::of(page.p));
  REQUIRE(prot);
  CHECK(prot->writable);
  CHECK(prot->executable);
  set_region_protection(region, ProtectionMode::ReadExec);
  prot = query_protection(CodeAddress::of(page.p));
  REQUIRE(prot);
  CHECK_FALSE(prot->writable);
  CHECK(prot->executable);
  CHECK(page.p[0] == 0x90);
}

TEST_CASE("set_region_protection on an unmapped region reports the OS error") {
  const std::size_t size = system_page_size();
  void* p = ::mmap(nullptr, size, PROT_READ, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
  REQUIRE(p != MAP_FAILED);
  ::munmap(p, size);
  try {
    set_region_protection(PageRegion{CodeAddress::of(p), size, size}, ProtectionMode::ReadWriteExec);
    FAIL("expected PlatformError");
  } catch (const BranchError& err) {
    CHECK(err.code() == ErrorCode::PlatformError);
    CHECK(err.os_error() == ENOMEM);
  }
}

TEST_CASE("write_jump stores opcode and displacement; rewriting is idempotent") {
  AnonPage page;
  const CodeAddress entry = CodeAddress::of(page.p + 64);
  const auto patch = encode_rel32(entry, CodeAddress{entry.value + 5 + 0x1234});
  write_jump(entry, patch, true);
  CHECK(page.p[64] == kJmpRel32Opcode);
  CHECK(read_rel32(entry) == patch);
  std::array<std::uint8_t, 16> once{};
  std::memcpy(once.data(), page.p + 60, once.size());
  write_jump(entry, patch, true);
  CHECK(std::memcmp(once.data(), page.p + 60, once.size()) == 0);

  // arm=false leaves the opcode byte alone.
  page.p[128] = 0xcc;
  write_jump(CodeAddress::of(page.p + 128), patch, false);
  CHECK(page.p[128] == 0xcc);
  CHECK(read_rel32(CodeAddress::of(page.p + 128)) == patch);
}

TEST_CASE("write_jump refuses a read-only page instead of faulting") {
  AnonPage page;
  const PageRegion region{CodeAddress::of(page.p), page.size, page.size};
  set_region_protection(region, ProtectionMode::ReadExec);
  const CodeAddress entry = CodeAddress::of(page.p + 8);
  try {
    write_jump(entry, Rel32Patch{{1, 2, 3, 4}}, true);
    FAIL("expected PlatformError");
  } catch (const BranchError& err) {
    CHECK(err.code() == ErrorCode::PlatformError);
  }
  CHECK(page.p[8] == 0);
}

TEST_CASE("flush_code_line does not change data") {
  AnonPage page;
  page.p[3] = 0x5a;
  flush_code_line(CodeAddress::of(page.p + 3));
  CHECK(page.p[3] == 0x5a);
}
