#pragma once

// Serialized timestamp-counter measurement and distribution statistics.
//
// All cycle counts are reference cycles (TSC ticks at the nominal frequency),
// not core clock cycles.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#if defined(__x86_64__)
#include <x86intrin.h>
#endif

namespace semistatic::measure {

struct CycleSample {
  std::uint64_t cycles = 0;
};

class MeasureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool timestamp_counter_available() noexcept;

/// lfence; rdtsc; lfence; thunk(); lfence; rdtsc; lfence.
template <typename Thunk>
[[gnu::always_inline]] inline CycleSample measure_cycles(Thunk&& thunk) {
#if defined(__x86_64__)
  _mm_lfence();
  const std::uint64_t start = __rdtsc();
  _mm_lfence();
  thunk();
  _mm_lfence();
  const std::uint64_t end = __rdtsc();
  _mm_lfence();
  return CycleSample{end - start};
#else
  (void)thunk;
  throw MeasureError("timestamp counter measurement needs x86-64");
#endif
}

/// Raw samples plus the measurement overhead to subtract from them.
class SampleSet {
 public:
  SampleSet() = default;
  explicit SampleSet(std::string label, double overhead_mean = 0.0)
      : label_(std::move(label)), overhead_mean_(overhead_mean) {}

  void add(std::uint64_t raw) { raw_.push_back(raw); }
  void reserve(std::size_t n) { raw_.reserve(n); }

  const std::string& label() const noexcept { return label_; }
  const std::vector<std::uint64_t>& raw() const noexcept { return raw_; }
  std::vector<std::uint64_t>& raw() noexcept { return raw_; }
  double overhead_mean() const noexcept { return overhead_mean_; }
  void set_overhead_mean(double overhead) noexcept { overhead_mean_ = overhead; }
  std::size_t size() const noexcept { return raw_.size(); }
  bool empty() const noexcept { return raw_.empty(); }

  /// Whole cycles subtracted from each raw sample: the overhead mean rounded
  /// to nearest.
  std::uint64_t overhead_cycles() const noexcept;
  /// max(raw - overhead, 0) per sample.
  std::vector<std::uint64_t> corrected() const;
  /// Samples that would have gone negative and were clamped to 0.
  std::size_t clamped_count() const noexcept;

 private:
  std::string label_;
  std::vector<std::uint64_t> raw_;
  double overhead_mean_ = 0.0;
};

/// Fixed-width bins starting at `first_edge`; bin i covers
/// [first_edge + i*width, first_edge + (i+1)*width).
struct Histogram {
  std::uint64_t first_edge = 0;
  std::uint64_t bin_width = 1;
  std::vector<std::uint64_t> counts;
};

struct SummaryStats {
  std::size_t n = 0;
  double mean = 0.0;
  std::uint64_t median = 0;  // lower median for even n
  double sd = 0.0;           // n - 1 denominator; 0 when n == 1
  std::uint64_t min = 0;
  std::uint64_t max = 0;
  Histogram histogram;
};

/// Statistics over the overhead-corrected samples. Throws MeasureError on an empty set.
SummaryStats summarize(const SampleSet& set, std::uint64_t bin_width = 1);
SummaryStats summarize_values(std::span<const std::uint64_t> values, std::uint64_t bin_width = 1);

/// Lower median of `values` (copied, not modified).
std::uint64_t lower_median(std::span<const std::uint64_t> values);

/// Drops samples greater than `factor` times the median. Returns the number dropped.
std::size_t drop_outliers(std::vector<std::uint64_t>& values, double factor = 3.0);

struct Mode {
  std::uint64_t location = 0;  // cycle value of the peak bin
  std::uint64_t count = 0;
};

/// The two most prominent peaks of a histogram at least `min_separation`
/// cycles apart. The second peak must reach `min_relative_height` of the
/// first; otherwise only one mode is returned.
std::vector<Mode> find_modes(const Histogram& histogram, std::uint64_t min_separation = 4,
                             double min_relative_height = 0.05);

inline constexpr std::size_t kDefaultCalibrationIterations = 10'000'000;
inline constexpr std::size_t kDefaultWarmup = 100'000;

/// Times an empty region `iterations` times after `warmup` discarded runs.
/// The returned set carries the outlier-trimmed mean as its overhead; the
/// same value becomes the process-wide default for later sets.
SampleSet calibrate_overhead(std::size_t iterations = kDefaultCalibrationIterations,
                             std::size_t warmup = kDefaultWarmup);

/// Overhead from the last calibrate_overhead() call, 0 before any.
double calibrated_overhead() noexcept;

/// Pins the calling thread to one core. Returns false if the OS refuses.
bool pin_current_thread(int core) noexcept;

}  // namespace semistatic::measure
