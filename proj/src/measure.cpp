#include "semistatic/measure.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#if defined(__linux__)
#include <pthread.h>
#include <sched.h>
#endif
#if defined(__x86_64__)
#include <cpuid.h>
#endif

namespace semistatic::measure {

namespace {
std::atomic<double> g_overhead{0.0};
}  // namespace

bool timestamp_counter_available() noexcept {
#if defined(__x86_64__)
  unsigned eax = 0, ebx = 0, ecx = 0, edx = 0;
  if (__get_cpuid(1, &eax, &ebx, &ecx, &edx) == 0) {
    return false;
  }
  return (edx & (1u << 4)) != 0;
#else
  return false;
#endif
}

std::uint64_t SampleSet::overhead_cycles() const noexcept {
  return overhead_mean_ <= 0.0 ? 0 : static_cast<std::uint64_t>(std::llround(overhead_mean_));
}

std::vector<std::uint64_t> SampleSet::corrected() const {
  const std::uint64_t overhead = overhead_cycles();
  std::vector<std::uint64_t> out(raw_.size());
  std::transform(raw_.begin(), raw_.end(), out.begin(),
                 [overhead](std::uint64_t r) { return r > overhead ? r - overhead : 0; });
  return out;
}

std::size_t SampleSet::clamped_count() const noexcept {
  const std::uint64_t overhead = overhead_cycles();
  return static_cast<std::size_t>(
      std::count_if(raw_.begin(), raw_.end(), [overhead](std::uint64_t r) { return r < overhead; }));
}

std::uint64_t lower_median(std::span<const std::uint64_t> values) {
  if (values.empty()) {
    throw MeasureError("median of an empty sample set");
  }
  std::vector<std::uint64_t> copy(values.begin(), values.end());
  const auto mid = copy.begin() + static_cast<std::ptrdiff_t>((copy.size() - 1) / 2);
  std::nth_element(copy.begin(), mid, copy.end());
  return *mid;
}

SummaryStats summarize_values(std::span<const std::uint64_t> values, std::uint64_t bin_width) {
  if (values.empty()) {
    throw MeasureError("cannot summarize an empty sample set");
  }
  if (bin_width == 0) {
    bin_width = 1;
  }
  SummaryStats s;
  s.n = values.size();
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  s.median = lower_median(values);

  // Two-pass mean/variance; sums of 1e7 integer samples stay exact in long double.
  long double sum = 0;
  for (auto v : values) {
    sum += v;
  }
  const long double mean = sum / static_cast<long double>(s.n);
  long double sq = 0;
  for (auto v : values) {
    const long double d = static_cast<long double>(v) - mean;
    sq += d * d;
  }
  s.mean = static_cast<double>(mean);
  s.sd = s.n > 1 ? static_cast<double>(std::sqrt(sq / static_cast<long double>(s.n - 1))) : 0.0;

  s.histogram.bin_width = bin_width;
  s.histogram.first_edge = (s.min / bin_width) * bin_width;
  s.histogram.counts.assign((s.max - s.histogram.first_edge) / bin_width + 1, 0);
  for (auto v : values) {
    ++s.histogram.counts[(v - s.histogram.first_edge) / bin_width];
  }
  return s;
}

SummaryStats summarize(const SampleSet& set, std::uint64_t bin_width) {
  const auto values = set.corrected();
  return summarize_values(values, bin_width);
}

std::size_t drop_outliers(std::vector<std::uint64_t>& values, double factor) {
  if (values.empty()) {
    return 0;
  }
  const double limit = factor * static_cast<double>(lower_median(values));
  const auto before = values.size();
  std::erase_if(values, [limit](std::uint64_t v) { return static_cast<double>(v) > limit; });
  return before - values.size();
}

std::vector<Mode> find_modes(const Histogram& histogram, std::uint64_t min_separation,
                             double min_relative_height) {
  const auto& c = histogram.counts;
  std::vector<Mode> peaks;
  if (c.empty()) {
    return peaks;
  }
  // Smooth over three bins so single-bin jitter does not register as a peak.
  std::vector<std::uint64_t> smooth(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    smooth[i] = c[i] + (i > 0 ? c[i - 1] : 0) + (i + 1 < c.size() ? c[i + 1] : 0);
  }
  for (std::size_t i = 0; i < smooth.size(); ++i) {
    const bool left = i == 0 || smooth[i] >= smooth[i - 1];
    const bool right = i + 1 == smooth.size() || smooth[i] > smooth[i + 1];
    if (left && right && smooth[i] > 0) {
      peaks.push_back(Mode{histogram.first_edge + i * histogram.bin_width, smooth[i]});
    }
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const Mode& a, const Mode& b) { return a.count > b.count; });

  std::vector<Mode> modes;
  modes.push_back(peaks.front());
  for (std::size_t i = 1; i < peaks.size(); ++i) {
    const auto dist = peaks[i].location > modes[0].location ? peaks[i].location - modes[0].location
                                                             : modes[0].location - peaks[i].location;
    if (dist >= min_separation) {
      if (static_cast<double>(peaks[i].count) >=
          min_relative_height * static_cast<double>(modes[0].count)) {
        modes.push_back(peaks[i]);
      }
      break;
    }
  }
  std::sort(modes.begin(), modes.end(),
            [](const Mode& a, const Mode& b) { return a.location < b.location; });
  return modes;
}

SampleSet calibrate_overhead(std::size_t iterations, std::size_t warmup) {
  for (std::size_t i = 0; i < warmup; ++i) {
    static_cast<void>(measure_cycles([] {}));
  }
  SampleSet set("rdtsc-overhead");
  set.reserve(iterations);
  for (std::size_t i = 0; i < iterations; ++i) {
    set.add(measure_cycles([] {}).cycles);
  }
  std::vector<std::uint64_t> kept = set.raw();
  drop_outliers(kept);
  double mean = 0.0;
  if (!kept.empty()) {
    mean = static_cast<double>(std::accumulate(kept.begin(), kept.end(), 0.0L) /
                               static_cast<long double>(kept.size()));
  }
  set.set_overhead_mean(mean);
  g_overhead.store(mean, std::memory_order_relaxed);
  return set;
}

double calibrated_overhead() noexcept { return g_overhead.load(std::memory_order_relaxed); }

bool pin_current_thread(int core) noexcept {
#if defined(__linux__)
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(core, &set);
  return pthread_setaffinity_np(pthread_self(), sizeof set, &set) == 0;
#else
  (void)core;
  return false;
#endif
}

}  // namespace semistatic::measure
