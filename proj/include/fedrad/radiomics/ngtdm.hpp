#pragma once

#include <array>
#include <cmath>
#include <string_view>

#include "fedrad/radiomics/texture.hpp"

namespace fedrad::radiomics {

// Row g-1: column 0 = n_g (voxels of level g with at least one 26-neighbour in the
// mask), column 1 = s_g = sum over those voxels of |g - mean neighbour level|.
inline TextureMatrix build_ngtdm(const DiscretizedVolume& d) {
  require(d.n_levels >= 1 && d.voxel_count > 0, ErrorCode::EmptyMask, "NGTDM needs a nonempty mask");
  TextureMatrix m(TextureFamily::Ngtdm, static_cast<std::size_t>(d.n_levels), 2);
  const Dims& dims = d.dims;
  for (std::size_t z = 0; z < dims.d; ++z) {
    for (std::size_t y = 0; y < dims.h; ++y) {
      for (std::size_t x = 0; x < dims.w; ++x) {
        const int g = d.levels[dims.index(x, y, z)];
        if (g == 0) continue;
        double sum = 0.0;
        int count = 0;
        for (const auto& o : neighbors26()) {
          const int n = d.at(static_cast<long>(x) + o[0], static_cast<long>(y) + o[1], static_cast<long>(z) + o[2]);
          if (n == 0) continue;
          sum += n;
          ++count;
        }
        if (count == 0) continue;
        const auto row = static_cast<std::size_t>(g - 1);
        m(row, 0) += 1.0;
        m(row, 1) += std::abs(g - sum / count);
      }
    }
  }
  return m;
}

inline constexpr std::array<std::string_view, 5> kNgtdmNames{"Coarseness", "Contrast", "Busyness", "Complexity",
                                                             "Strength"};

using NgtdmFeatures = std::array<double, 5>;

// Degenerate values: Coarseness = 1e6 when sum p_i s_i == 0; Contrast = 0 with a
// single populated level; other 0/0 ratios are 0.
inline NgtdmFeatures ngtdm_features(const TextureMatrix& m) {
  double nvp = 0.0, s_total = 0.0;
  for (std::size_t r = 0; r < m.rows; ++r) {
    nvp += m(r, 0);
    s_total += m(r, 1);
  }
  NgtdmFeatures f{kCoarsenessCap, 0.0, 0.0, 0.0, 0.0};
  if (nvp == 0.0) return f;
  std::vector<double> p(m.rows), s(m.rows), g(m.rows);
  std::size_t ngp = 0;
  double ps = 0.0;
  for (std::size_t r = 0; r < m.rows; ++r) {
    p[r] = m(r, 0) / nvp;
    s[r] = m(r, 1);
    g[r] = static_cast<double>(r + 1);
    if (p[r] > 0.0) ++ngp;
    ps += p[r] * s[r];
  }
  double contrast_sum = 0.0, busy_den = 0.0, complexity = 0.0, strength_num = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i) {
    if (p[i] == 0.0) continue;
    for (std::size_t j = 0; j < m.rows; ++j) {
      if (p[j] == 0.0) continue;
      const double dg = g[i] - g[j];
      contrast_sum += p[i] * p[j] * dg * dg;
      busy_den += std::abs(g[i] * p[i] - g[j] * p[j]);
      complexity += std::abs(dg) * (p[i] * s[i] + p[j] * s[j]) / (p[i] + p[j]);
      strength_num += (p[i] + p[j]) * dg * dg;
    }
  }
  f[0] = ps == 0.0 ? kCoarsenessCap : 1.0 / ps;
  f[1] = ngp > 1 ? contrast_sum / static_cast<double>(ngp * (ngp - 1)) * (s_total / nvp) : 0.0;
  f[2] = safe_div(ps, busy_den);
  f[3] = complexity / nvp;
  f[4] = safe_div(strength_num, s_total);
  return f;
}

inline NgtdmFeatures ngtdm_features(const DiscretizedVolume& d) { return ngtdm_features(build_ngtdm(d)); }

}  // namespace fedrad::radiomics
