#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "fedrad/core/error.hpp"

namespace fedrad {

// Percentile of already sorted data with linear interpolation between order
// statistics: position (q/100)*(n-1), the numpy "linear" rule.
inline double percentile_sorted(std::span<const double> sorted, double q) {
  require(!sorted.empty(), ErrorCode::InvalidArgument, "percentile of empty set");
  require(q >= 0.0 && q <= 100.0, ErrorCode::InvalidArgument, "percentile outside [0,100]");
  const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  return percentile_sorted(values, q);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n-1); 0 when n < 2
  std::size_t n = 0;
};

inline MeanStd mean_std(std::span<const double> v) {
  MeanStd out;
  out.n = v.size();
  if (v.empty()) return out;
  double sum = 0.0;
  for (double x : v) sum += x;
  out.mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) return out;
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return out;
}

}  // namespace fedrad
