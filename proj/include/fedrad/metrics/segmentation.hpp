#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedrad/core/stats.hpp"
#include "fedrad/volume/volume.hpp"

namespace fedrad::metrics {

using Mask = std::span<const std::uint8_t>;

// 2|A n B| / (|A| + |B|); two empty masks score 1.
inline double dice(Mask a, Mask b) {
  require(a.size() == b.size(), ErrorCode::DimensionMismatch, "dice: mask sizes differ");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] != 0;
    nb += b[i] != 0;
    both += (a[i] != 0) && (b[i] != 0);
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

// Foreground voxels with at least one background 6-neighbour; outside the grid counts
// as background.
inline std::vector<std::uint8_t> surface(Mask m, const Dims& d) {
  require(m.size() == d.voxels(), ErrorCode::DimensionMismatch, "surface: mask size does not match dims");
  std::vector<std::uint8_t> out(m.size(), 0);
  static constexpr int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (std::size_t z = 0; z < d.d; ++z)
    for (std::size_t y = 0; y < d.h; ++y)
      for (std::size_t x = 0; x < d.w; ++x) {
        const std::size_t i = d.index(x, y, z);
        if (!m[i]) continue;
        for (const auto& o : off) {
          const long nx = static_cast<long>(x) + o[0], ny = static_cast<long>(y) + o[1], nz = static_cast<long>(z) + o[2];
          if (!d.contains(nx, ny, nz) ||
              !m[d.index(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny), static_cast<std::size_t>(nz))]) {
            out[i] = 1;
            break;
          }
        }
      }
  return out;
}

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-D squared distance transform of sampled function f with sample spacing s
// (lower envelope of parabolas).
inline void edt_1d(std::vector<double>& f, double s, std::vector<double>& out, std::vector<std::size_t>& v,
                   std::vector<double>& zb) {
  const std::size_t n = f.size();
  out.assign(n, kInf);
  v.assign(n, 0);
  zb.assign(n + 1, 0.0);
  std::size_t k = 0;
  bool any = false;
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (!any) {
      v[0] = q;
      zb[0] = -kInf;
      zb[1] = kInf;
      any = true;
      continue;
    }
    const double pq = static_cast<double>(q) * s;
    while (true) {
      const double pv = static_cast<double>(v[k]) * s;
      const double sect = ((f[q] + pq * pq) - (f[v[k]] + pv * pv)) / (2.0 * (pq - pv));
      if (sect <= zb[k] && k > 0) {
        --k;
        continue;
      }
      if (sect <= zb[k]) {  // k == 0: new parabola dominates everywhere
        v[0] = q;
        zb[0] = -kInf;
        zb[1] = kInf;
        break;
      }
      ++k;
      v[k] = q;
      zb[k] = sect;
      zb[k + 1] = kInf;
      break;
    }
  }
  if (!any) return;
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const double pq = static_cast<double>(q) * s;
    while (zb[k + 1] < pq) ++k;
    const double dq = (static_cast<double>(q) - static_cast<double>(v[k])) * s;
    out[q] = dq * dq + f[v[k]];
  }
}

}  // namespace detail

// Exact squared Euclidean distance (mm^2) from every voxel to the nearest site,
// separable over x, y, z. Voxels are infinite when there is no site.
inline std::vector<double> squared_edt(Mask sites, const Dims& d, const VoxelSize& vs) {
  require(sites.size() == d.voxels(), ErrorCode::DimensionMismatch, "edt: mask size does not match dims");
  std::vector<double> g(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) g[i] = sites[i] ? 0.0 : detail::kInf;
  const std::array<double, 3> spacing{vs[1], vs[0], vs[2]};  // x, y, z
  std::vector<double> line, out, zb;
  std::vector<std::size_t> v;
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t n = d.extent(axis);
    const std::size_t a = d.extent((axis + 1) % 3), b = d.extent((axis + 2) % 3);
    line.resize(n);
    for (std::size_t j = 0; j < a; ++j)
      for (std::size_t k = 0; k < b; ++k) {
        auto idx = [&](std::size_t t) {
          std::array<std::size_t, 3> c{};
          c[static_cast<std::size_t>(axis)] = t;
          c[static_cast<std::size_t>((axis + 1) % 3)] = j;
          c[static_cast<std::size_t>((axis + 2) % 3)] = k;
          return d.index(c[0], c[1], c[2]);
        };
        for (std::size_t t = 0; t < n; ++t) line[t] = g[idx(t)];
        detail::edt_1d(line, spacing[static_cast<std::size_t>(axis)], out, v, zb);
        for (std::size_t t = 0; t < n; ++t) g[idx(t)] = out[t];
      }
  }
  return g;
}

// nullopt marks "Undefined": exactly one of the masks is empty.
using Hd95 = std::optional<double>;

// 95th percentile (linear interpolation) of the pooled directed surface distances
// A->B and B->A, in mm. Two empty masks give 0.
inline Hd95 hd95(Mask a, Mask b, const Dims& d, const VoxelSize& vs) {
  require(a.size() == b.size() && a.size() == d.voxels(), ErrorCode::DimensionMismatch, "hd95: mask sizes differ");
  const auto sa = surface(a, d);
  const auto sb = surface(b, d);
  std::size_t na = 0, nb = 0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    na += sa[i];
    nb += sb[i];
  }
  if (na == 0 && nb == 0) return 0.0;
  if (na == 0 || nb == 0) return std::nullopt;
  const auto da = squared_edt(sa, d, vs);
  const auto db = squared_edt(sb, d, vs);
  std::vector<double> dist;
  dist.reserve(na + nb);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    if (sa[i]) dist.push_back(std::sqrt(db[i]));
    if (sb[i]) dist.push_back(std::sqrt(da[i]));
  }
  std::sort(dist.begin(), dist.end());
  return percentile_sorted(dist, 95.0);
}

// ---- BraTS-style regions -----------------------------------------------------

enum class Region { ET = 0, TC = 1, WT = 2 };
inline constexpr std::array<const char*, 3> kRegionNames{"ET", "TC", "WT"};

// Channel index of each raw label in the SegMask.
struct LabelMapping {
  std::size_t necrotic = 0;
  std::size_t edema = 1;
  std::size_t enhancing = 2;
};

struct Regions {
  Dims dims;
  std::array<std::vector<std::uint8_t>, 3> masks;  // ET, TC, WT

  Mask operator[](Region r) const { return masks[static_cast<std::size_t>(r)]; }
};

// ET = enhancing; TC = ET u necrotic; WT = TC u edema.
inline Regions compose_regions(const SegMask& s, const LabelMapping& map = {}) {
  const std::size_t l = s.channels();
  require(map.necrotic < l && map.edema < l && map.enhancing < l, ErrorCode::UnknownLabelMapping,
          "label mapping refers to a channel >= " + std::to_string(l));
  require(map.necrotic != map.edema && map.necrotic != map.enhancing && map.edema != map.enhancing,
          ErrorCode::UnknownLabelMapping, "label mapping channels must be distinct");
  Regions r;
  r.dims = s.dims();
  const std::size_t nv = s.dims().voxels();
  for (auto& m : r.masks) m.assign(nv, 0);
  auto ncr = s.channel(map.necrotic), ed = s.channel(map.edema), et = s.channel(map.enhancing);
  for (std::size_t i = 0; i < nv; ++i) {
    r.masks[0][i] = et[i];
    r.masks[1][i] = et[i] | ncr[i];
    r.masks[2][i] = r.masks[1][i] | ed[i];
  }
  return r;
}

}  // namespace fedrad::metrics
