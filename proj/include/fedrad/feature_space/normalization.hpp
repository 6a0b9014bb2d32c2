#pragma once

#include <algorithm>
#include <vector>

#include "fedrad/core/stats.hpp"
#include "fedrad/radiomics/features.hpp"

namespace fedrad::feature_space {

using radiomics::FeatureVector;

struct NormalizationParams {
  double percentile_lo = 2.0;
  double percentile_hi = 98.0;
  std::vector<double> p_min;
  std::vector<double> p_max;

  std::size_t size() const { return p_min.size(); }
};

// Per-feature percentiles over the pooled samples (linear interpolation between
// order statistics).
inline NormalizationParams fit_normalization(const std::vector<FeatureVector>& features, double lo = 2.0,
                                             double hi = 98.0) {
  require(features.size() >= 2, ErrorCode::InsufficientSamples, "normalization needs at least 2 samples");
  require(lo >= 0.0 && lo < hi && hi <= 100.0, ErrorCode::InvalidArgument, "need 0 <= lo < hi <= 100");
  const std::size_t r = features.front().size();
  for (const auto& f : features) require(f.size() == r, ErrorCode::DimensionMismatch, "feature lengths differ");
  NormalizationParams p;
  p.percentile_lo = lo;
  p.percentile_hi = hi;
  p.p_min.resize(r);
  p.p_max.resize(r);
  std::vector<double> column(features.size());
  for (std::size_t j = 0; j < r; ++j) {
    for (std::size_t i = 0; i < features.size(); ++i) column[i] = features[i].values[j];
    std::sort(column.begin(), column.end());
    p.p_min[j] = percentile_sorted(column, lo);
    p.p_max[j] = percentile_sorted(column, hi);
  }
  return p;
}

// clamp((f - P_min) / (P_max - P_min), 0, 1); a feature with P_max == P_min maps to 0.5.
inline FeatureVector apply_normalization(const FeatureVector& f, const NormalizationParams& p) {
  require(f.size() == p.size(), ErrorCode::DimensionMismatch,
          "feature vector has " + std::to_string(f.size()) + " values, normalization expects " +
              std::to_string(p.size()));
  FeatureVector out;
  out.names = f.names;
  out.values.resize(f.size());
  for (std::size_t j = 0; j < f.size(); ++j) {
    const double range = p.p_max[j] - p.p_min[j];
    if (range == 0.0) {
      out.values[j] = 0.5;
      continue;
    }
    out.values[j] = std::clamp((f.values[j] - p.p_min[j]) / range, 0.0, 1.0);
  }
  return out;
}

struct OutlierFlag {
  std::size_t sample = 0;
  std::size_t feature = 0;
  double value = 0.0;
  // Distance beyond the nearest percentile bound, in units of the percentile range.
  double excess = 0.0;

  friend bool operator==(const OutlierFlag&, const OutlierFlag&) = default;
};

// Flags raw values outside [P_min - factor*range, P_max + factor*range].
inline std::vector<OutlierFlag> detect_outliers(const std::vector<FeatureVector>& features,
                                                const NormalizationParams& p, double factor = 10.0) {
  require(factor > 1.0, ErrorCode::InvalidArgument, "outlier factor must be > 1");
  std::vector<OutlierFlag> out;
  for (std::size_t i = 0; i < features.size(); ++i) {
    require(features[i].size() == p.size(), ErrorCode::DimensionMismatch, "feature length mismatch");
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double v = features[i].values[j];
      const double range = p.p_max[j] - p.p_min[j];
      const double lo = p.p_min[j] - factor * range;
      const double hi = p.p_max[j] + factor * range;
      if (v >= lo && v <= hi) continue;
      const double beyond = v > hi ? v - p.p_max[j] : p.p_min[j] - v;
      out.push_back({i, j, v, range > 0.0 ? beyond / range : INFINITY});
    }
  }
  return out;
}

}  // namespace fedrad::feature_space
