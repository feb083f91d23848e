#include "semistatic/bench/capabilities.hpp"

#include <sstream>

#include "semistatic/codepatch.hpp"
#include "semistatic/measure.hpp"
#include "semistatic/perf_counter.hpp"
#include "semistatic/platform.hpp"

namespace semistatic::bench {

std::string to_string(Availability a) {
  switch (a) {
    case Availability::Runnable: return "runnable";
    case Availability::Degraded: return "degraded (cycles only)";
    case Availability::Unavailable: return "unavailable";
  }
  return "unknown";
}

namespace {

bool try_open(const measure::PerfEventSpec& spec, std::string& error) {
  try {
    auto counter = measure::PerfCounter::open(spec);
    static_cast<void>(counter);
    return true;
  } catch (const measure::CounterError& e) {
    if (error.empty()) {
      error = measure::to_string(e.code()) + " (" + e.what() + ")";
    }
    return false;
  }
}

}  // namespace

Capabilities probe_capabilities(const std::string& events_file) {
  Capabilities caps;
  caps.arch = host_architecture();
  caps.patching = kPatchingSupported;
  caps.timestamp_counter = measure::timestamp_counter_available();
  caps.page_size = codepatch::system_page_size();
  caps.perf_paranoid = measure::perf_paranoid_level();
  caps.cpu = probe_cpu();
  caps.events_file = events_file.empty() ? default_events_file() : events_file;
  try {
    caps.events = EventTable::load(caps.events_file).lookup(caps.cpu.family, caps.cpu.model);
    if (!caps.events) {
      caps.events_error = "no entry for this CPU";
    }
  } catch (const std::exception& e) {
    caps.events_error = e.what();
  }

  caps.hardware_counters =
      try_open(measure::PerfEventSpec::hardware(measure::kHwBranchMisses), caps.hardware_error);
  if (caps.events && caps.events->smc_clears) {
    caps.smc_event = try_open(measure::PerfEventSpec::raw(*caps.events->smc_clears), caps.raw_error);
  }
  if (caps.events && caps.events->baclears) {
    caps.baclears_event =
        try_open(measure::PerfEventSpec::raw(*caps.events->baclears), caps.raw_error);
  }
  return caps;
}

ScenarioStatus scenario_status(const Capabilities& caps, ScenarioId id) {
  ScenarioStatus s{id, Availability::Runnable, {}};
  if (!caps.patching) {
    s.availability = Availability::Unavailable;
    s.reason = "code patching unsupported on " + caps.arch;
    return s;
  }
  if (!caps.timestamp_counter) {
    s.availability = Availability::Unavailable;
    s.reason = "no timestamp counter";
    return s;
  }
  auto degrade = [&](const std::string& why) {
    s.availability = Availability::Degraded;
    s.reason = why;
  };
  switch (id) {
    case ScenarioId::S2:
      if (!caps.smc_event) {
        degrade(!caps.events ? "no raw event table entry: " + caps.events_error
                             : "SMC machine-clear event unavailable: " + caps.raw_error);
      }
      break;
    case ScenarioId::S4:
      if (!caps.baclears_event) {
        degrade(!caps.events ? "no raw event table entry: " + caps.events_error
                             : "BACLEARS event unavailable: " + caps.raw_error);
      }
      break;
    case ScenarioId::S8:
      if (!caps.hardware_counters) {
        degrade("branch-miss counter unavailable (" + caps.hardware_error +
                "); misprediction rate estimated from cycle modes");
      }
      break;
    default:
      break;
  }
  return s;
}

std::string capability_report(const Capabilities& caps) {
  std::ostringstream out;
  out << "architecture       " << caps.arch << (caps.patching ? "" : " (patching unsupported)")
      << '\n';
  out << "cpu                " << (caps.cpu.vendor.empty() ? "unknown" : caps.cpu.vendor)
      << " family " << caps.cpu.family << " model 0x" << std::hex << caps.cpu.model << std::dec
      << '\n';
  out << "page size          " << caps.page_size << '\n';
  out << "timestamp counter  " << (caps.timestamp_counter ? "yes" : "no") << '\n';
  out << "perf paranoid      ";
  if (caps.perf_paranoid == -99) {
    out << "unreadable";
  } else {
    out << caps.perf_paranoid;
  }
  out << '\n';
  out << "event table        " << caps.events_file;
  if (caps.events) {
    out << " -> [" << caps.events->name << "]";
  } else {
    out << " -> " << caps.events_error;
  }
  out << '\n';
  out << "branch-miss count  "
      << (caps.hardware_counters ? "available" : "unavailable: " + caps.hardware_error) << '\n';
  out << "smc_clears raw     " << (caps.smc_event ? "available" : "unavailable") << '\n';
  out << "baclears raw       " << (caps.baclears_event ? "available" : "unavailable") << '\n';

  bool degraded = false;
  out << '\n';
  for (ScenarioId id : kAllScenarios) {
    const auto s = scenario_status(caps, id);
    degraded = degraded || s.availability != Availability::Runnable;
    out << to_string(id) << "  " << describe(id) << ": " << to_string(s.availability);
    if (!s.reason.empty()) {
      out << " - " << s.reason;
    }
    out << '\n';
  }
  if (!caps.smc_event || !caps.baclears_event) {
    out << "\nWithout raw events S2 and S4 report cycle-only directional checks instead of\n"
           "SMC clear and BAC re-steer counts.\n";
  }
  if (degraded && caps.perf_paranoid > 1) {
    out << "Counting user-space events needs kernel.perf_event_paranoid <= 2; raw events on\n"
           "some kernels need <= 1 (sysctl -w kernel.perf_event_paranoid=1). A guest VM\n"
           "without a virtual PMU has no hardware events at any setting.\n";
  }
  if (!caps.patching) {
    out << "\nCorrectness tests still run against the indirect-call fallback build.\n";
  }
  return out.str();
}

}  // namespace semistatic::bench
