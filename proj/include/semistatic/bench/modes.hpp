#pragma once

// Cycle-based misprediction estimate for hosts without a branch-miss counter.
// A random-condition probe of the conditional arm is bimodal: the fast mode is
// a correctly predicted branch, the slow mode a mispredicted one. Samples above
// the midpoint between the modes count as slow.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

namespace semistatic::bench {

struct SlowThreshold {
  std::uint64_t fast_mode = 0;
  std::uint64_t slow_mode = 0;
  std::uint64_t threshold = 0;  // samples strictly above are slow
};

/// From a bimodal sample. Empty if the histogram shows a single mode.
std::optional<SlowThreshold> slow_threshold(std::span<const std::uint64_t> probe,
                                            std::uint64_t min_separation = 4);

double slow_fraction(std::span<const std::uint64_t> values, std::uint64_t threshold);
/// Median of slow_fraction over `chunks` consecutive equal chunks, so that a
/// burst of host noise in one part of the run does not move it.
double chunked_slow_fraction(std::span<const std::uint64_t> values, std::uint64_t threshold,
                             std::size_t chunks = 10);

struct MispredictEstimate {
  double slow_fraction = 0.0;
  double background = 0.0;
  double rate = 0.0;                // mispredictions per iteration
  double per_change = 0.0;          // mispredictions per condition change
};

/// rate = max(chunked_slow_fraction - background, 0); per_change = rate * interval.
MispredictEstimate estimate_mispredictions(std::span<const std::uint64_t> values,
                                           std::uint64_t threshold, double background,
                                           std::size_t interval);

/// Change-aligned estimate for a condition that flips every `interval`
/// iterations, sample i sitting at offset (first_offset + i) % interval after
/// the last flip. The background is the slow fraction over offsets in the
/// second half of each interval, from the same run; per_change sums the excess
/// over the background across the first `window` offsets. Intervals shorter
/// than 2 * window fall back to estimate_mispredictions with
/// `fallback_background`.
MispredictEstimate estimate_mispredictions_aligned(std::span<const std::uint64_t> values,
                                                   std::uint64_t threshold, std::size_t interval,
                                                   std::size_t first_offset,
                                                   double fallback_background,
                                                   std::size_t window = 64);

}  // namespace semistatic::bench
