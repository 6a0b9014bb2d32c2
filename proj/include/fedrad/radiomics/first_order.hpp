#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string_view>
#include <vector>

#include "fedrad/core/stats.hpp"
#include "fedrad/radiomics/texture.hpp"

namespace fedrad::radiomics {

inline constexpr std::array<std::string_view, 18> kFirstOrderNames{
    "Energy",   "TotalEnergy",        "Entropy",
    "Minimum",  "10Percentile",       "90Percentile",
    "Maximum",  "Mean",               "Median",
    "InterquartileRange", "Range",    "MeanAbsoluteDeviation",
    "RobustMeanAbsoluteDeviation",    "RootMeanSquared",
    "Skewness", "Kurtosis",           "Variance",
    "Uniformity"};

using FirstOrderFeatures = std::array<double, 18>;

// Intensity statistics over the mask. Entropy and Uniformity use the gray-level
// histogram of `levels`; everything else uses raw intensities. Skewness and Kurtosis
// of constant data are 0.
inline FirstOrderFeatures first_order_features(std::span<const float> values, const DiscretizedVolume& levels,
                                               double voxel_volume_mm3 = 1.0) {
  require(values.size() == levels.levels.size(), ErrorCode::DimensionMismatch, "values and levels sizes differ");
  std::vector<double> x;
  x.reserve(levels.voxel_count);
  std::vector<double> hist(static_cast<std::size_t>(levels.n_levels) + 1, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (levels.levels[i] == 0) continue;
    x.push_back(values[i]);
    hist[static_cast<std::size_t>(levels.levels[i])] += 1.0;
  }
  require(x.size() >= 2, ErrorCode::InvalidArgument, "first-order features need at least 2 voxels");
  const double n = static_cast<double>(x.size());

  double energy = 0.0, sum = 0.0;
  for (double v : x) {
    energy += v * v;
    sum += v;
  }
  const double mean = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0, mad = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
    mad += std::abs(d);
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  mad /= n;

  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  const double p10 = percentile_sorted(sorted, 10.0);
  const double p90 = percentile_sorted(sorted, 90.0);
  const double p25 = percentile_sorted(sorted, 25.0);
  const double p75 = percentile_sorted(sorted, 75.0);

  double rsum = 0.0;
  std::size_t rn = 0;
  for (double v : x) {
    if (v >= p10 && v <= p90) {
      rsum += v;
      ++rn;
    }
  }
  double rmad = 0.0;
  if (rn > 0) {
    const double rmean = rsum / static_cast<double>(rn);
    for (double v : x) {
      if (v >= p10 && v <= p90) rmad += std::abs(v - rmean);
    }
    rmad /= static_cast<double>(rn);
  }

  double entropy = 0.0, uniformity = 0.0;
  for (std::size_t g = 1; g < hist.size(); ++g) {
    const double p = hist[g] / n;
    entropy += entropy_term(p);
    uniformity += p * p;
  }

  FirstOrderFeatures f{};
  f[0] = energy;
  f[1] = voxel_volume_mm3 * energy;
  f[2] = entropy;
  f[3] = sorted.front();
  f[4] = p10;
  f[5] = p90;
  f[6] = sorted.back();
  f[7] = mean;
  f[8] = percentile_sorted(sorted, 50.0);
  f[9] = p75 - p25;
  f[10] = sorted.back() - sorted.front();
  f[11] = mad;
  f[12] = rmad;
  f[13] = std::sqrt(energy / n);
  f[14] = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  f[15] = m2 > 0.0 ? m4 / (m2 * m2) : 0.0;
  f[16] = m2;
  f[17] = uniformity;
  return f;
}

}  // namespace fedrad::radiomics
