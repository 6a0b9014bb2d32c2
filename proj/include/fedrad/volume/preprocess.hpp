#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fedrad/volume/volume.hpp"

namespace fedrad {

// Describes how a source grid maps to a cropped/padded grid: the brain bounding box
// [lo, lo + extent) is copied to offset pad_lo of an output grid of size `output`.
// Axis order in the arrays is (x, y, z).
struct CropRecord {
  Dims source;
  std::array<std::size_t, 3> lo{};
  std::array<std::size_t, 3> extent{};
  std::array<std::size_t, 3> pad_lo{};
  Dims output;

  friend bool operator==(const CropRecord&, const CropRecord&) = default;
};

inline CropRecord plan_crop(const BrainMask& mask, std::size_t min_size) {
  require(min_size >= 1, ErrorCode::InvalidArgument, "min_size must be >= 1");
  const Dims& dims = mask.dims();
  std::array<std::size_t, 3> lo{dims.w, dims.h, dims.d};
  std::array<std::size_t, 3> hi{0, 0, 0};
  bool any = false;
  auto vox = mask.voxels();
  for (std::size_t z = 0; z < dims.d; ++z) {
    for (std::size_t y = 0; y < dims.h; ++y) {
      for (std::size_t x = 0; x < dims.w; ++x) {
        if (!vox[dims.index(x, y, z)]) continue;
        any = true;
        const std::array<std::size_t, 3> p{x, y, z};
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], p[a]);
          hi[a] = std::max(hi[a], p[a] + 1);
        }
      }
    }
  }
  require(any, ErrorCode::EmptyMask, "brain mask has no foreground voxel");
  CropRecord rec;
  rec.source = dims;
  rec.lo = lo;
  std::array<std::size_t, 3> out{};
  for (int a = 0; a < 3; ++a) {
    rec.extent[a] = hi[a] - lo[a];
    out[a] = std::max(rec.extent[a], min_size);
    // Odd padding puts the extra voxel on the high side.
    rec.pad_lo[a] = (out[a] - rec.extent[a]) / 2;
  }
  rec.output = Dims::from_xyz(out[0], out[1], out[2]);
  return rec;
}

// Copies one channel of `src` (laid out on rec.source) into a zero-filled rec.output grid.
template <typename T>
std::vector<T> apply_crop(std::span<const T> src, const CropRecord& rec) {
  std::vector<T> out(rec.output.voxels(), T{});
  for (std::size_t z = 0; z < rec.extent[2]; ++z) {
    for (std::size_t y = 0; y < rec.extent[1]; ++y) {
      const std::size_t s = rec.source.index(rec.lo[0], rec.lo[1] + y, rec.lo[2] + z);
      const std::size_t o = rec.output.index(rec.pad_lo[0], rec.pad_lo[1] + y, rec.pad_lo[2] + z);
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(s), rec.extent[0],
                  out.begin() + static_cast<std::ptrdiff_t>(o));
    }
  }
  return out;
}

// Inverse of apply_crop: places the bounding-box content back on the source grid.
template <typename T>
std::vector<T> undo_crop(std::span<const T> cropped, const CropRecord& rec) {
  std::vector<T> out(rec.source.voxels(), T{});
  for (std::size_t z = 0; z < rec.extent[2]; ++z) {
    for (std::size_t y = 0; y < rec.extent[1]; ++y) {
      const std::size_t s = rec.source.index(rec.lo[0], rec.lo[1] + y, rec.lo[2] + z);
      const std::size_t o = rec.output.index(rec.pad_lo[0], rec.pad_lo[1] + y, rec.pad_lo[2] + z);
      std::copy_n(cropped.begin() + static_cast<std::ptrdiff_t>(o), rec.extent[0],
                  out.begin() + static_cast<std::ptrdiff_t>(s));
    }
  }
  return out;
}

inline Volume apply_crop(const Volume& v, const CropRecord& rec) {
  require(v.dims() == rec.source, ErrorCode::DimensionMismatch, "volume does not match crop record");
  std::vector<float> data;
  data.reserve(v.modalities() * rec.output.voxels());
  for (std::size_t c = 0; c < v.modalities(); ++c) {
    auto ch = apply_crop<float>(v.modality(c), rec);
    data.insert(data.end(), ch.begin(), ch.end());
  }
  return Volume(v.modalities(), rec.output, std::move(data), v.voxel_size());
}

inline LabelGrid apply_crop(const LabelGrid& g, const CropRecord& rec) {
  require(g.dims() == rec.source, ErrorCode::DimensionMismatch, "mask does not match crop record");
  std::vector<std::uint8_t> data;
  data.reserve(g.channels() * rec.output.voxels());
  for (std::size_t c = 0; c < g.channels(); ++c) {
    auto ch = apply_crop<std::uint8_t>(g.channel(c), rec);
    data.insert(data.end(), ch.begin(), ch.end());
  }
  return LabelGrid(g.channels(), rec.output, std::move(data));
}

inline SegMask apply_crop(const SegMask& g, const CropRecord& rec) {
  return SegMask(apply_crop(static_cast<const LabelGrid&>(g), rec));
}

inline BrainMask apply_crop(const BrainMask& g, const CropRecord& rec) {
  return BrainMask(apply_crop(static_cast<const LabelGrid&>(g), rec));
}

inline SegMask undo_crop(const SegMask& g, const CropRecord& rec) {
  require(g.dims() == rec.output, ErrorCode::DimensionMismatch, "mask does not match crop output");
  std::vector<std::uint8_t> data;
  data.reserve(g.channels() * rec.source.voxels());
  for (std::size_t c = 0; c < g.channels(); ++c) {
    auto ch = undo_crop<std::uint8_t>(g.channel(c), rec);
    data.insert(data.end(), ch.begin(), ch.end());
  }
  return SegMask(g.channels(), rec.source, std::move(data));
}

struct CropResult {
  Volume volume;
  BrainMask mask;
  CropRecord record;
};

// Crops to the brain bounding box and zero-pads each axis up to min_size.
inline CropResult crop_to_brain_bbox(const Volume& v, const BrainMask& mask, std::size_t min_size) {
  require(v.dims() == mask.dims(), ErrorCode::DimensionMismatch, "volume and brain mask dims differ");
  CropRecord rec = plan_crop(mask, min_size);
  return CropResult{apply_crop(v, rec), apply_crop(mask, rec), rec};
}

// Per-modality z-score over brain voxels (population variance); voxels outside the
// mask are set to 0.
inline Volume standardize(const Volume& v, const BrainMask& mask) {
  require(v.dims() == mask.dims(), ErrorCode::DimensionMismatch, "volume and brain mask dims differ");
  auto in = mask.voxels();
  const std::size_t n = mask.foreground();
  require(n >= 2, ErrorCode::DegenerateIntensity, "standardization needs at least 2 brain voxels");
  std::vector<float> out(v.data().size(), 0.0F);
  const std::size_t nv = v.dims().voxels();
  for (std::size_t c = 0; c < v.modalities(); ++c) {
    auto mod = v.modality(c);
    double sum = 0.0;
    for (std::size_t i = 0; i < nv; ++i) {
      if (in[i]) sum += mod[i];
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < nv; ++i) {
      if (in[i]) ss += (mod[i] - mean) * (mod[i] - mean);
    }
    const double var = ss / static_cast<double>(n);
    require(var > 0.0, ErrorCode::DegenerateIntensity,
            "modality " + std::to_string(c) + " is constant inside the brain mask");
    const double sd = std::sqrt(var);
    for (std::size_t i = 0; i < nv; ++i) {
      if (in[i]) out[c * nv + i] = static_cast<float>((mod[i] - mean) / sd);
    }
  }
  return Volume(v.modalities(), v.dims(), std::move(out), v.voxel_size());
}

// Separable Gaussian blur with edge clamping; sigma <= 0 leaves the data unchanged.
inline std::vector<double> gaussian_blur(std::span<const double> src, const Dims& dims, double sigma) {
  std::vector<double> cur(src.begin(), src.end());
  if (sigma <= 0.0) return cur;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double ksum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    ksum += kernel[i + radius];
  }
  for (auto& k : kernel) k /= ksum;
  std::vector<double> next(cur.size());
  for (int axis = 0; axis < 3; ++axis) {
    const long n = static_cast<long>(dims.extent(axis));
    for (std::size_t z = 0; z < dims.d; ++z) {
      for (std::size_t y = 0; y < dims.h; ++y) {
        for (std::size_t x = 0; x < dims.w; ++x) {
          std::array<long, 3> p{static_cast<long>(x), static_cast<long>(y), static_cast<long>(z)};
          const long base = p[axis];
          double acc = 0.0;
          for (int k = -radius; k <= radius; ++k) {
            p[axis] = std::clamp(base + k, 0L, n - 1);
            acc += kernel[k + radius] *
                   cur[dims.index(static_cast<std::size_t>(p[0]), static_cast<std::size_t>(p[1]),
                                  static_cast<std::size_t>(p[2]))];
          }
          next[dims.index(x, y, z)] = acc;
        }
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

}  // namespace fedrad
