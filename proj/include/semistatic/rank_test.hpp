#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace semistatic::measure {

class SampleSet;

struct RankTestResult {
  double u_statistic = 0.0;
  double p_value = 1.0;
  bool exact = false;
};

/// Samples below this combined size get an exact permutation p-value.
inline constexpr std::size_t kExactRankTestLimit = 20;

/// Two-sided Mann-Whitney U test.
///
/// U = n1*n2 + n1(n1+1)/2 - R1, with R1 the midrank sum of `a`. Below
/// kExactRankTestLimit combined samples the p-value enumerates every
/// assignment of the pooled midranks to the two groups; at or above it a
/// normal approximation with tie-corrected variance and continuity
/// correction is used.
RankTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);
RankTestResult mann_whitney_u(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);
/// On the overhead-corrected samples of both sets.
RankTestResult mann_whitney_u(const SampleSet& a, const SampleSet& b);

}  // namespace semistatic::measure
