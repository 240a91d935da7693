#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace kvc {

/// Pairwise (cascade) summation; error grows as O(log n) instead of O(n).
inline double pairwise_sum(std::span<const double> v) {
  constexpr std::size_t kBlock = 64;
  if (v.size() <= kBlock) {
    double s = 0.0;
    for (const double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

/// Population standard deviation (divides by n).
inline double population_std(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace kvc
