#include "semistatic/bench/bodies.hpp"

#include <cstring>
#include <new>

#include <sys/mman.h>

namespace semistatic::bench {

volatile std::uint32_t g_last_body = 0;

#define SEMISTATIC_BODY(n) \
  [[gnu::noinline, gnu::noipa]] void body_##n() { g_last_body = n; }
SEMISTATIC_BODY(0)
SEMISTATIC_BODY(1)
SEMISTATIC_BODY(2)
SEMISTATIC_BODY(3)
SEMISTATIC_BODY(4)
SEMISTATIC_BODY(5)
SEMISTATIC_BODY(6)
SEMISTATIC_BODY(7)
#undef SEMISTATIC_BODY

const std::array<Body, kMaxFanout> kBodies{body_0, body_1, body_2, body_3,
                                           body_4, body_5, body_6, body_7};

[[gnu::noinline, gnu::noipa]] void send_order(const Message* message, Gateway* gateway) {
  std::memcpy(gateway->buffer, message->bytes, sizeof gateway->buffer);
  gateway->flag = 1;
}

[[gnu::noinline, gnu::noipa]] void adjust_order(const Message* message, Gateway* gateway) {
  std::memcpy(gateway->buffer, message->bytes, sizeof gateway->buffer);
  gateway->flag = 0;
}

double Filler::run(Message& message) {
  for (std::size_t i = 0; i < sizeof message.bytes; i += 8) {
    const std::uint64_t word = rng_();
    std::memcpy(message.bytes + i, &word, 8);
  }
  double acc = acc_;
  for (std::size_t i = 0; i < macs_; ++i) {
    const double x = message.bytes[i % sizeof message.bytes];
    // The empty asm keeps these as real data-dependent branches.
    if (message.bytes[(i * 7 + 3) % sizeof message.bytes] & 1) {
      asm volatile("");
      acc = acc * 0.999 + x;
    } else {
      asm volatile("");
      acc = acc * 1.001 - x;
    }
  }
  acc_ = acc;
  return acc;
}

StoreBaseline::StoreBaseline(const BranchCore& mirror)
    : table_(mirror.table()), direction_(mirror.direction()) {
  const std::size_t page = codepatch::system_page_size();
  page_ = ::mmap(nullptr, page, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
  if (page_ == MAP_FAILED) {
    throw std::bad_alloc();
  }
  auto* bytes = static_cast<std::uint8_t*>(page_);
  const std::size_t offset = 64 + mirror.stub().entry.value % 64;
  bytes[offset] = codepatch::kJmpRel32Opcode;
  stub_.entry = codepatch::CodeAddress::of(bytes + offset);
  stub_.in_use = true;
}

StoreBaseline::~StoreBaseline() { ::munmap(page_, codepatch::system_page_size()); }

void StoreBaseline::patch_safe(std::size_t index) { patch_fast(index); }

}  // namespace semistatic::bench
