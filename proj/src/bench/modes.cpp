#include "semistatic/bench/modes.hpp"

#include <algorithm>
#include <vector>

#include "semistatic/measure.hpp"

namespace semistatic::bench {

std::optional<SlowThreshold> slow_threshold(std::span<const std::uint64_t> probe,
                                            std::uint64_t min_separation) {
  if (probe.empty()) {
    return std::nullopt;
  }
  const auto stats = measure::summarize_values(probe);
  const auto modes = measure::find_modes(stats.histogram, min_separation);
  if (modes.size() < 2) {
    return std::nullopt;
  }
  SlowThreshold t;
  t.fast_mode = modes[0].location;
  t.slow_mode = modes[1].location;
  t.threshold = (t.fast_mode + t.slow_mode) / 2;
  return t;
}

double slow_fraction(std::span<const std::uint64_t> values, std::uint64_t threshold) {
  if (values.empty()) {
    return 0.0;
  }
  const auto slow = std::count_if(values.begin(), values.end(),
                                  [threshold](std::uint64_t v) { return v > threshold; });
  return static_cast<double>(slow) / static_cast<double>(values.size());
}

double chunked_slow_fraction(std::span<const std::uint64_t> values, std::uint64_t threshold,
                             std::size_t chunks) {
  if (chunks < 2 || values.size() < chunks) {
    return slow_fraction(values, threshold);
  }
  const std::size_t size = values.size() / chunks;
  std::vector<double> fractions;
  for (std::size_t c = 0; c < chunks; ++c) {
    fractions.push_back(slow_fraction(values.subspan(c * size, size), threshold));
  }
  std::sort(fractions.begin(), fractions.end());
  return chunks % 2 == 1 ? fractions[chunks / 2]
                         : (fractions[chunks / 2 - 1] + fractions[chunks / 2]) / 2.0;
}

MispredictEstimate estimate_mispredictions(std::span<const std::uint64_t> values,
                                           std::uint64_t threshold, double background,
                                           std::size_t interval) {
  MispredictEstimate e;
  e.slow_fraction = chunked_slow_fraction(values, threshold);
  e.background = background;
  e.rate = std::max(e.slow_fraction - background, 0.0);
  e.per_change = e.rate * static_cast<double>(interval);
  return e;
}

MispredictEstimate estimate_mispredictions_aligned(std::span<const std::uint64_t> values,
                                                   std::uint64_t threshold, std::size_t interval,
                                                   std::size_t first_offset,
                                                   double fallback_background,
                                                   std::size_t window) {
  if (window == 0 || interval < 2 * window) {
    return estimate_mispredictions(values, threshold, fallback_background, interval);
  }
  const std::size_t half = interval / 2;
  const std::size_t w = window;
  std::vector<std::size_t> slow(w, 0);
  std::vector<std::size_t> seen(w, 0);
  std::size_t quiet_slow = 0;
  std::size_t quiet_seen = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t offset = (first_offset + i) % interval;
    const bool is_slow = values[i] > threshold;
    if (offset < w) {
      ++seen[offset];
      slow[offset] += is_slow ? 1 : 0;
    } else if (offset >= half) {
      ++quiet_seen;
      quiet_slow += is_slow ? 1 : 0;
    }
  }
  MispredictEstimate e;
  e.slow_fraction = slow_fraction(values, threshold);
  if (quiet_seen == 0) {
    return estimate_mispredictions(values, threshold, fallback_background, interval);
  }
  e.background = static_cast<double>(quiet_slow) / static_cast<double>(quiet_seen);
  double excess = 0.0;
  for (std::size_t j = 0; j < w; ++j) {
    if (seen[j] != 0) {
      excess += static_cast<double>(slow[j]) / static_cast<double>(seen[j]) - e.background;
    }
  }
  e.per_change = std::max(excess, 0.0);
  e.rate = e.per_change / static_cast<double>(interval);
  return e;
}

}  // namespace semistatic::bench
