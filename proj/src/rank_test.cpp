#include "semistatic/rank_test.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "semistatic/measure.hpp"

namespace semistatic::measure {

namespace {

struct Pooled {
  std::vector<double> ranks;  // midrank of each pooled element, a first then b
  double tie_term = 0.0;      // sum of t^3 - t over tie groups
};

Pooled midranks(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size() + b.size();
  std::vector<double> values;
  values.reserve(n);
  values.insert(values.end(), a.begin(), a.end());
  values.insert(values.end(), b.begin(), b.end());

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });

  Pooled out;
  out.ranks.assign(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && values[order[j]] == values[order[i]]) {
      ++j;
    }
    const double rank = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      out.ranks[order[k]] = rank;
    }
    const double t = static_cast<double>(j - i);
    out.tie_term += t * t * t - t;
    i = j;
  }
  return out;
}

double u_from_rank_sum(double r1, double n1, double n2) {
  return n1 * n2 + n1 * (n1 + 1.0) / 2.0 - r1;
}

// Walks every n1-subset of the pooled ranks and counts those whose U is at
// least as far from n1*n2/2 as the observed one.
double exact_p(const std::vector<double>& ranks, std::size_t n1, double u_obs) {
  const std::size_t n = ranks.size();
  const double n1d = static_cast<double>(n1);
  const double n2d = static_cast<double>(n - n1);
  const double centre = n1d * n2d / 2.0;
  const double observed = std::abs(u_obs - centre);
  constexpr double kEps = 1e-9;

  std::vector<std::size_t> pick(n1);
  std::iota(pick.begin(), pick.end(), 0);
  std::uint64_t total = 0;
  std::uint64_t extreme = 0;
  while (true) {
    double r1 = 0.0;
    for (auto idx : pick) {
      r1 += ranks[idx];
    }
    ++total;
    if (std::abs(u_from_rank_sum(r1, n1d, n2d) - centre) >= observed - kEps) {
      ++extreme;
    }
    // Next combination in lexicographic order.
    std::size_t k = n1;
    while (k > 0 && pick[k - 1] == n - n1 + (k - 1)) {
      --k;
    }
    if (k == 0) {
      break;
    }
    ++pick[k - 1];
    for (std::size_t m = k; m < n1; ++m) {
      pick[m] = pick[m - 1] + 1;
    }
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

}  // namespace

RankTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("mann_whitney_u needs at least one sample per group");
  }
  const Pooled pooled = midranks(a, b);
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  const double r1 = std::accumulate(pooled.ranks.begin(),
                                    pooled.ranks.begin() + static_cast<std::ptrdiff_t>(a.size()), 0.0);

  RankTestResult result;
  result.u_statistic = u_from_rank_sum(r1, n1, n2);

  const std::size_t n = a.size() + b.size();
  if (n < kExactRankTestLimit) {
    result.exact = true;
    result.p_value = exact_p(pooled.ranks, a.size(), result.u_statistic);
    return result;
  }

  const double nd = static_cast<double>(n);
  const double variance = n1 * n2 / 12.0 * ((nd + 1.0) - pooled.tie_term / (nd * (nd - 1.0)));
  if (variance <= 0.0) {
    result.p_value = 1.0;
    return result;
  }
  const double deviation = std::abs(result.u_statistic - n1 * n2 / 2.0);
  const double z = std::max(deviation - 0.5, 0.0) / std::sqrt(variance);
  result.p_value = std::clamp(std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
  return result;
}

RankTestResult mann_whitney_u(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  std::vector<double> da(a.begin(), a.end());
  std::vector<double> db(b.begin(), b.end());
  return mann_whitney_u(std::span<const double>(da), std::span<const double>(db));
}

RankTestResult mann_whitney_u(const SampleSet& a, const SampleSet& b) {
  const auto ca = a.corrected();
  const auto cb = b.corrected();
  return mann_whitney_u(std::span<const std::uint64_t>(ca), std::span<const std::uint64_t>(cb));
}

}  // namespace semistatic::measure
