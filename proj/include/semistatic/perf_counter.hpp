#pragma once

// In-process hardware event counting through perf_event_open.

#include <cstdint>
#include <stdexcept>
#include <string>

namespace semistatic::measure {

enum class EventType { Hardware, Raw };

struct PerfEventSpec {
  EventType type = EventType::Hardware;
  std::uint64_t config = 0;
  bool exclude_kernel = true;
  bool exclude_idle = true;
  bool exclude_hv = true;
  bool exclude_guest = true;

  static PerfEventSpec hardware(std::uint64_t config) { return {EventType::Hardware, config}; }
  static PerfEventSpec raw(std::uint64_t config) { return {EventType::Raw, config}; }
};

// Generic hardware event codes (PERF_COUNT_HW_*).
inline constexpr std::uint64_t kHwInstructions = 1;
inline constexpr std::uint64_t kHwBranchMisses = 5;

enum class CounterErrc { PermissionDenied, UnsupportedEvent, ReadFailure };

class CounterError : public std::runtime_error {
 public:
  CounterError(CounterErrc code, std::string message, int os_error)
      : std::runtime_error(std::move(message)), code_(code), os_error_(os_error) {}
  CounterErrc code() const noexcept { return code_; }
  int os_error() const noexcept { return os_error_; }

 private:
  CounterErrc code_;
  int os_error_;
};

/// Owns one perf event file descriptor, opened disabled, for this thread.
class PerfCounter {
 public:
  /// Throws CounterError(PermissionDenied) when perf_event_paranoid forbids
  /// the event, CounterError(UnsupportedEvent) when the PMU lacks it.
  static PerfCounter open(const PerfEventSpec& spec);

  PerfCounter(PerfCounter&& other) noexcept;
  PerfCounter& operator=(PerfCounter&& other) noexcept;
  PerfCounter(const PerfCounter&) = delete;
  PerfCounter& operator=(const PerfCounter&) = delete;
  ~PerfCounter();

  void reset() noexcept;
  void enable() noexcept;
  void disable() noexcept;
  /// Throws CounterError(ReadFailure).
  std::uint64_t read() const;

  const PerfEventSpec& spec() const noexcept { return spec_; }

 private:
  PerfCounter(int fd, PerfEventSpec spec) : fd_(fd), spec_(spec) {}
  int fd_ = -1;
  PerfEventSpec spec_;
};

/// reset, enable, thunk, disable, read.
template <typename Thunk>
std::uint64_t counted(Thunk&& thunk, PerfCounter& counter) {
  counter.reset();
  counter.enable();
  thunk();
  counter.disable();
  return counter.read();
}

/// Current /proc/sys/kernel/perf_event_paranoid, or -99 if unreadable.
int perf_paranoid_level() noexcept;

std::string to_string(CounterErrc code);

}  // namespace semistatic::measure
