#pragma once

// Raw event codes per microarchitecture, read from a small key/value file:
//
//   [icelake]
//   family = 6
//   models = [0x7d, 0x7e]
//   smc_clears = 0x04c3
//   baclears = 0x0160

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace semistatic::bench {

struct MicroarchEvents {
  std::string name;
  unsigned family = 0;
  std::vector<unsigned> models;
  std::optional<std::uint64_t> smc_clears;
  std::optional<std::uint64_t> baclears;
};

struct CpuModel {
  std::string vendor;
  unsigned family = 0;  // display family
  unsigned model = 0;   // display model, extended bits folded in
};

CpuModel probe_cpu();

class EventTable {
 public:
  /// Throws std::runtime_error with a line number on malformed input.
  static EventTable parse(std::string_view text);
  static EventTable load(const std::string& path);

  const std::vector<MicroarchEvents>& entries() const noexcept { return entries_; }
  std::optional<MicroarchEvents> lookup(unsigned family, unsigned model) const;

 private:
  std::vector<MicroarchEvents> entries_;
};

/// Bundled table path, fixed at build time.
std::string default_events_file();

}  // namespace semistatic::bench
