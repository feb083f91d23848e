#include "semistatic/perf_counter.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <utility>

#if defined(__linux__)
#include <linux/perf_event.h>
#include <sys/ioctl.h>
#include <sys/syscall.h>
#include <unistd.h>
#endif

namespace semistatic::measure {

PerfCounter PerfCounter::open(const PerfEventSpec& spec) {
#if defined(__linux__)
  perf_event_attr attr;
  std::memset(&attr, 0, sizeof attr);
  attr.size = sizeof attr;
  attr.type = spec.type == EventType::Hardware ? PERF_TYPE_HARDWARE : PERF_TYPE_RAW;
  attr.config = spec.config;
  attr.disabled = 1;
  attr.exclude_kernel = spec.exclude_kernel;
  attr.exclude_idle = spec.exclude_idle;
  attr.exclude_hv = spec.exclude_hv;
  attr.exclude_guest = spec.exclude_guest;

  const int fd = static_cast<int>(::syscall(SYS_perf_event_open, &attr, 0, -1, -1, 0));
  if (fd < 0) {
    const int err = errno;
    std::string msg = "perf_event_open: ";
    msg += std::strerror(err);
    if (err == EACCES || err == EPERM) {
      throw CounterError(CounterErrc::PermissionDenied, msg, err);
    }
    throw CounterError(CounterErrc::UnsupportedEvent, msg, err);
  }
  return PerfCounter(fd, spec);
#else
  throw CounterError(CounterErrc::UnsupportedEvent, "perf_event_open needs Linux", ENOSYS);
#endif
}

PerfCounter::PerfCounter(PerfCounter&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)), spec_(other.spec_) {}

PerfCounter& PerfCounter::operator=(PerfCounter&& other) noexcept {
  if (this != &other) {
#if defined(__linux__)
    if (fd_ >= 0) {
      ::close(fd_);
    }
#endif
    fd_ = std::exchange(other.fd_, -1);
    spec_ = other.spec_;
  }
  return *this;
}

PerfCounter::~PerfCounter() {
#if defined(__linux__)
  if (fd_ >= 0) {
    ::close(fd_);
  }
#endif
}

#if defined(__linux__)
void PerfCounter::reset() noexcept { ::ioctl(fd_, PERF_EVENT_IOC_RESET, 0); }
void PerfCounter::enable() noexcept { ::ioctl(fd_, PERF_EVENT_IOC_ENABLE, 0); }
void PerfCounter::disable() noexcept { ::ioctl(fd_, PERF_EVENT_IOC_DISABLE, 0); }

std::uint64_t PerfCounter::read() const {
  std::uint64_t count = 0;
  const auto rc = ::read(fd_, &count, sizeof count);
  if (rc != static_cast<ssize_t>(sizeof count)) {
    throw CounterError(CounterErrc::ReadFailure, "short read from perf event", errno);
  }
  return count;
}
#else
void PerfCounter::reset() noexcept {}
void PerfCounter::enable() noexcept {}
void PerfCounter::disable() noexcept {}
std::uint64_t PerfCounter::read() const {
  throw CounterError(CounterErrc::ReadFailure, "perf events need Linux", ENOSYS);
}
#endif

int perf_paranoid_level() noexcept {
  std::ifstream in("/proc/sys/kernel/perf_event_paranoid");
  int level = -99;
  if (!(in >> level)) {
    return -99;
  }
  return level;
}

std::string to_string(CounterErrc code) {
  switch (code) {
    case CounterErrc::PermissionDenied: return "PermissionDenied";
    case CounterErrc::UnsupportedEvent: return "UnsupportedEvent";
    case CounterErrc::ReadFailure: return "ReadFailure";
  }
  return "Unknown";
}

}  // namespace semistatic::measure
