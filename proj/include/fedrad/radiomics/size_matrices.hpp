#pragma once

#include <array>
#include <numeric>
#include <string_view>
#include <vector>

#include "fedrad/radiomics/texture.hpp"

// Run-length (GLRLM), size-zone (GLSZM) and dependence (GLDM) matrices. All three
// are "gray level x size" count matrices and share one set of emphasis statistics.
namespace fedrad::radiomics {

namespace detail {

// Statistics over a count matrix M[g][s] with gray level g = row+1, size s = col+1.
struct Emphasis {
  double small = 0, large = 0, gln = 0, glnn = 0, sn = 0, snn = 0, percentage = 0;
  double gl_variance = 0, size_variance = 0, entropy = 0;
  double low_gl = 0, high_gl = 0, small_low = 0, small_high = 0, large_low = 0, large_high = 0;
};

inline Emphasis emphasis(const TextureMatrix& m, double voxel_count) {
  Emphasis e;
  const double nz = m.sum();
  if (nz == 0.0) return e;
  std::vector<double> row(m.rows, 0.0), col(m.cols, 0.0);
  double mu_g = 0.0, mu_s = 0.0;
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double g = static_cast<double>(r + 1);
    for (std::size_t c = 0; c < m.cols; ++c) {
      const double v = m(r, c);
      if (v == 0.0) continue;
      const double s = static_cast<double>(c + 1);
      row[r] += v;
      col[c] += v;
      e.small += v / (s * s);
      e.large += v * s * s;
      e.low_gl += v / (g * g);
      e.high_gl += v * g * g;
      e.small_low += v / (g * g * s * s);
      e.small_high += v * g * g / (s * s);
      e.large_low += v * s * s / (g * g);
      e.large_high += v * g * g * s * s;
      const double p = v / nz;
      mu_g += p * g;
      mu_s += p * s;
      e.entropy += entropy_term(p);
    }
  }
  for (std::size_t r = 0; r < m.rows; ++r) {
    e.gln += row[r] * row[r];
    const double g = static_cast<double>(r + 1);
    e.gl_variance += row[r] / nz * (g - mu_g) * (g - mu_g);
  }
  for (std::size_t c = 0; c < m.cols; ++c) {
    e.sn += col[c] * col[c];
    const double s = static_cast<double>(c + 1);
    e.size_variance += col[c] / nz * (s - mu_s) * (s - mu_s);
  }
  for (double* v : {&e.small, &e.large, &e.low_gl, &e.high_gl, &e.small_low, &e.small_high, &e.large_low,
                    &e.large_high, &e.gln, &e.sn}) {
    *v /= nz;
  }
  e.glnn = e.gln / nz;
  e.snn = e.sn / nz;
  e.percentage = safe_div(nz, voxel_count);
  return e;
}

inline std::array<double, 16> sixteen(const Emphasis& e) {
  return {e.small,       e.large,         e.gln,     e.glnn,    e.sn,         e.snn,
          e.percentage,  e.gl_variance,   e.size_variance,      e.entropy,    e.low_gl,
          e.high_gl,     e.small_low,     e.small_high,         e.large_low,  e.large_high};
}

inline void bump(std::vector<std::vector<double>>& rows, int level, std::size_t size) {
  auto& r = rows[static_cast<std::size_t>(level - 1)];
  if (r.size() < size) r.resize(size, 0.0);
  r[size - 1] += 1.0;
}

inline TextureMatrix densify(TextureFamily family, const std::vector<std::vector<double>>& rows) {
  std::size_t cols = 1;
  for (const auto& r : rows) cols = std::max(cols, r.size());
  TextureMatrix m(family, rows.size(), cols);
  for (std::size_t g = 0; g < rows.size(); ++g) {
    for (std::size_t s = 0; s < rows[g].size(); ++s) m(g, s) = rows[g][s];
  }
  return m;
}

inline long sl(std::size_t v) { return static_cast<long>(v); }

}  // namespace detail

// ---------------------------------------------------------------------------
// GLRLM

// Run counts per direction; column r-1 counts runs of length r. The column count is
// the longest run observed over all directions.
struct Glrlm {
  int n_levels = 0;
  std::size_t voxel_count = 0;
  std::array<TextureMatrix, 13> matrices;
};

inline Glrlm build_glrlm(const DiscretizedVolume& d) {
  require(d.n_levels >= 1 && d.voxel_count > 0, ErrorCode::EmptyMask, "GLRLM needs a nonempty mask");
  Glrlm out;
  out.n_levels = d.n_levels;
  out.voxel_count = d.voxel_count;
  const auto& dirs = directions();
  const Dims& dims = d.dims;
  std::array<std::vector<std::vector<double>>, 13> rows;
  for (std::size_t k = 0; k < 13; ++k) {
    rows[k].assign(static_cast<std::size_t>(d.n_levels), {});
    const auto [dx, dy, dz] = dirs[k];
    for (std::size_t z = 0; z < dims.d; ++z) {
      for (std::size_t y = 0; y < dims.h; ++y) {
        for (std::size_t x = 0; x < dims.w; ++x) {
          const int g = d.levels[dims.index(x, y, z)];
          if (g == 0) continue;
          using detail::sl;
          // Only the first voxel of a run starts a walk.
          if (d.at(sl(x) - dx, sl(y) - dy, sl(z) - dz) == g) continue;
          std::size_t len = 1;
          while (d.at(sl(x) + dx * sl(len), sl(y) + dy * sl(len), sl(z) + dz * sl(len)) == g) ++len;
          detail::bump(rows[k], g, len);
        }
      }
    }
  }
  std::size_t cols = 1;
  for (const auto& r : rows)
    for (const auto& row : r) cols = std::max(cols, row.size());
  for (std::size_t k = 0; k < 13; ++k) {
    rows[k][0].resize(std::max(rows[k][0].size(), cols), 0.0);
    out.matrices[k] = detail::densify(TextureFamily::Glrlm, rows[k]);
  }
  return out;
}

inline constexpr std::array<std::string_view, 16> kGlrlmNames{
    "ShortRunEmphasis",          "LongRunEmphasis",
    "GrayLevelNonUniformity",    "GrayLevelNonUniformityNormalized",
    "RunLengthNonUniformity",    "RunLengthNonUniformityNormalized",
    "RunPercentage",             "GrayLevelVariance",
    "RunVariance",               "RunEntropy",
    "LowGrayLevelRunEmphasis",   "HighGrayLevelRunEmphasis",
    "ShortRunLowGrayLevelEmphasis",  "ShortRunHighGrayLevelEmphasis",
    "LongRunLowGrayLevelEmphasis",   "LongRunHighGrayLevelEmphasis"};

using GlrlmFeatures = std::array<double, 16>;

inline GlrlmFeatures glrlm_features(const Glrlm& m) {
  GlrlmFeatures avg{};
  for (const auto& mat : m.matrices) {
    const auto f = detail::sixteen(detail::emphasis(mat, static_cast<double>(m.voxel_count)));
    for (std::size_t i = 0; i < f.size(); ++i) avg[i] += f[i];
  }
  for (auto& v : avg) v /= 13.0;
  return avg;
}

inline GlrlmFeatures glrlm_features(const DiscretizedVolume& d) { return glrlm_features(build_glrlm(d)); }

// ---------------------------------------------------------------------------
// GLSZM

namespace detail {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }
  std::size_t size(std::size_t root) const { return size_[root]; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

}  // namespace detail

// Zones are 26-connected sets of equal gray level; column s-1 counts zones of size s.
inline TextureMatrix build_glszm(const DiscretizedVolume& d) {
  require(d.n_levels >= 1 && d.voxel_count > 0, ErrorCode::EmptyMask, "GLSZM needs a nonempty mask");
  const Dims& dims = d.dims;
  detail::DisjointSet ds(dims.voxels());
  const auto& dirs = directions();
  using detail::sl;
  for (std::size_t z = 0; z < dims.d; ++z) {
    for (std::size_t y = 0; y < dims.h; ++y) {
      for (std::size_t x = 0; x < dims.w; ++x) {
        const std::size_t i = dims.index(x, y, z);
        const int g = d.levels[i];
        if (g == 0) continue;
        for (const auto& o : dirs) {
          const long nx = sl(x) + o[0], ny = sl(y) + o[1], nz = sl(z) + o[2];
          if (d.at(nx, ny, nz) != g) continue;
          ds.unite(i, dims.index(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny), static_cast<std::size_t>(nz)));
        }
      }
    }
  }
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(d.n_levels));
  for (std::size_t i = 0; i < d.levels.size(); ++i) {
    if (d.levels[i] == 0 || ds.find(i) != i) continue;
    detail::bump(rows, d.levels[i], ds.size(i));
  }
  return detail::densify(TextureFamily::Glszm, rows);
}

inline constexpr std::array<std::string_view, 16> kGlszmNames{
    "SmallAreaEmphasis",          "LargeAreaEmphasis",
    "GrayLevelNonUniformity",     "GrayLevelNonUniformityNormalized",
    "SizeZoneNonUniformity",      "SizeZoneNonUniformityNormalized",
    "ZonePercentage",             "GrayLevelVariance",
    "ZoneVariance",               "ZoneEntropy",
    "LowGrayLevelZoneEmphasis",   "HighGrayLevelZoneEmphasis",
    "SmallAreaLowGrayLevelEmphasis",  "SmallAreaHighGrayLevelEmphasis",
    "LargeAreaLowGrayLevelEmphasis",  "LargeAreaHighGrayLevelEmphasis"};

using GlszmFeatures = std::array<double, 16>;

inline GlszmFeatures glszm_features(const TextureMatrix& m, std::size_t voxel_count) {
  return detail::sixteen(detail::emphasis(m, static_cast<double>(voxel_count)));
}

inline GlszmFeatures glszm_features(const DiscretizedVolume& d) { return glszm_features(build_glszm(d), d.voxel_count); }

// ---------------------------------------------------------------------------
// GLDM

// Dependence of a voxel = 1 + number of 26-neighbours in the mask with the same gray
// level (alpha = 0); column j-1 counts voxels with dependence j, so 27 columns.
inline TextureMatrix build_gldm(const DiscretizedVolume& d) {
  require(d.n_levels >= 1 && d.voxel_count > 0, ErrorCode::EmptyMask, "GLDM needs a nonempty mask");
  TextureMatrix m(TextureFamily::Gldm, static_cast<std::size_t>(d.n_levels), 27);
  const Dims& dims = d.dims;
  using detail::sl;
  for (std::size_t z = 0; z < dims.d; ++z) {
    for (std::size_t y = 0; y < dims.h; ++y) {
      for (std::size_t x = 0; x < dims.w; ++x) {
        const int g = d.levels[dims.index(x, y, z)];
        if (g == 0) continue;
        std::size_t dep = 1;
        for (const auto& o : neighbors26()) {
          if (d.at(sl(x) + o[0], sl(y) + o[1], sl(z) + o[2]) == g) ++dep;
        }
        m(static_cast<std::size_t>(g - 1), dep - 1) += 1.0;
      }
    }
  }
  return m;
}

inline constexpr std::array<std::string_view, 14> kGldmNames{
    "SmallDependenceEmphasis",
    "LargeDependenceEmphasis",
    "GrayLevelNonUniformity",
    "DependenceNonUniformity",
    "DependenceNonUniformityNormalized",
    "GrayLevelVariance",
    "DependenceVariance",
    "DependenceEntropy",
    "LowGrayLevelEmphasis",
    "HighGrayLevelEmphasis",
    "SmallDependenceLowGrayLevelEmphasis",
    "SmallDependenceHighGrayLevelEmphasis",
    "LargeDependenceLowGrayLevelEmphasis",
    "LargeDependenceHighGrayLevelEmphasis"};

using GldmFeatures = std::array<double, 14>;

inline GldmFeatures gldm_features(const TextureMatrix& m) {
  const auto e = detail::emphasis(m, m.sum());
  return {e.small,         e.large,   e.gln,     e.sn,         e.snn,        e.gl_variance, e.size_variance,
          e.entropy,       e.low_gl,  e.high_gl, e.small_low,  e.small_high, e.large_low,   e.large_high};
}

inline GldmFeatures gldm_features(const DiscretizedVolume& d) { return gldm_features(build_gldm(d)); }

}  // namespace fedrad::radiomics
