#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "fedrad/volume/volume.hpp"

namespace fedrad::radiomics {

// Gray levels after fixed-bin-width discretization: 1..n_levels inside the mask, 0 outside.
struct DiscretizedVolume {
  Dims dims;
  std::vector<int> levels;
  int n_levels = 0;
  std::size_t voxel_count = 0;

  int at(long x, long y, long z) const {
    if (!dims.contains(x, y, z)) return 0;
    return levels[dims.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z))];
  }
};

// Anchored at the in-mask minimum: level = floor((x - min) / bin_width) + 1.
inline DiscretizedVolume discretize(std::span<const float> values, const BrainMask& mask, double bin_width) {
  require(bin_width > 0.0 && std::isfinite(bin_width), ErrorCode::InvalidBinWidth, "bin width must be > 0");
  require(values.size() == mask.dims().voxels(), ErrorCode::DimensionMismatch, "values and mask sizes differ");
  auto in = mask.voxels();
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (in[i]) lo = std::min(lo, static_cast<double>(values[i]));
  }
  require(std::isfinite(lo), ErrorCode::EmptyMask, "discretization mask has no foreground voxel");
  DiscretizedVolume out;
  out.dims = mask.dims();
  out.levels.assign(values.size(), 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!in[i]) continue;
    const double x = values[i];
    require(std::isfinite(x), ErrorCode::InvalidArgument, "non-finite intensity inside mask");
    const int level = static_cast<int>(std::floor((x - lo) / bin_width)) + 1;
    out.levels[i] = level;
    out.n_levels = std::max(out.n_levels, level);
    ++out.voxel_count;
  }
  return out;
}

enum class TextureFamily { Glcm, Glrlm, Glszm, Ngtdm, Gldm };

constexpr std::string_view to_string(TextureFamily f) {
  switch (f) {
    case TextureFamily::Glcm: return "glcm";
    case TextureFamily::Glrlm: return "glrlm";
    case TextureFamily::Glszm: return "glszm";
    case TextureFamily::Ngtdm: return "ngtdm";
    case TextureFamily::Gldm: return "gldm";
  }
  return "";
}

// Dense non-negative matrix; row g-1 holds gray level g.
struct TextureMatrix {
  TextureFamily family = TextureFamily::Glcm;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  TextureMatrix() = default;
  TextureMatrix(TextureFamily f, std::size_t r, std::size_t c) : family(f), rows(r), cols(c), values(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double sum() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  friend bool operator==(const TextureMatrix&, const TextureMatrix&) = default;
};

using Offset = std::array<int, 3>;

// The 13 unique offsets of the 26-neighbourhood (one of each +/- pair).
inline const std::array<Offset, 13>& directions() {
  static const std::array<Offset, 13> dirs = [] {
    std::array<Offset, 13> out{};
    std::size_t n = 0;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const bool forward = dz > 0 || (dz == 0 && dy > 0) || (dz == 0 && dy == 0 && dx > 0);
          if (forward) out[n++] = Offset{dx, dy, dz};
        }
    return out;
  }();
  return dirs;
}

inline const std::array<Offset, 26>& neighbors26() {
  static const std::array<Offset, 26> nb = [] {
    std::array<Offset, 26> out{};
    std::size_t n = 0;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (dx != 0 || dy != 0 || dz != 0) out[n++] = Offset{dx, dy, dz};
    return out;
  }();
  return nb;
}

// Degenerate conventions shared by the family formulas.
inline constexpr double kCoarsenessCap = 1e6;

inline double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

inline double entropy_term(double p) { return p > 0.0 ? -p * std::log2(p) : 0.0; }

}  // namespace fedrad::radiomics
