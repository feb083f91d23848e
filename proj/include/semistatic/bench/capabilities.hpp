#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include "semistatic/bench/config.hpp"
#include "semistatic/bench/event_table.hpp"

namespace semistatic::bench {

enum class Availability { Runnable, Degraded, Unavailable };
std::string to_string(Availability a);

struct Capabilities {
  std::string arch;
  bool patching = false;
  bool timestamp_counter = false;
  std::size_t page_size = 0;
  int perf_paranoid = -99;
  CpuModel cpu;
  std::string events_file;
  std::string events_error;  // why the table could not be read, if it could not
  std::optional<MicroarchEvents> events;

  bool hardware_counters = false;  // generic branch-misses opens
  std::string hardware_error;
  bool smc_event = false;
  bool baclears_event = false;
  std::string raw_error;
};

Capabilities probe_capabilities(const std::string& events_file = {});

struct ScenarioStatus {
  ScenarioId id = ScenarioId::S1;
  Availability availability = Availability::Unavailable;
  std::string reason;
};

ScenarioStatus scenario_status(const Capabilities& caps, ScenarioId id);

std::string capability_report(const Capabilities& caps);

class CapabilityMissing : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace semistatic::bench
