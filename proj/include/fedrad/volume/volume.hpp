#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedrad/core/error.hpp"

namespace fedrad {

// Grid extents. h rows (y), w columns (x), d slices (z); x varies fastest in storage.
struct Dims {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t d = 0;

  constexpr std::size_t voxels() const { return h * w * d; }
  // Extent along axis 0 = x, 1 = y, 2 = z.
  constexpr std::size_t extent(int axis) const { return axis == 0 ? w : (axis == 1 ? h : d); }
  constexpr std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return (z * h + y) * w + x; }
  constexpr bool contains(long x, long y, long z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < static_cast<long>(w) && y < static_cast<long>(h) &&
           z < static_cast<long>(d);
  }
  static constexpr Dims from_xyz(std::size_t x, std::size_t y, std::size_t z) { return Dims{y, x, z}; }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(const Dims& d) {
  return std::to_string(d.h) + "x" + std::to_string(d.w) + "x" + std::to_string(d.d);
}

// Physical voxel size in millimetres, stored in the same (h, w, d) axis order as Dims.
using VoxelSize = std::array<float, 3>;

// Multimodal intensity volume, modality-major then z, y, x.
class Volume {
 public:
  Volume() = default;
  Volume(std::size_t modalities, Dims dims, VoxelSize voxel_size = {1.0F, 1.0F, 1.0F})
      : Volume(modalities, dims, std::vector<float>(modalities * dims.voxels(), 0.0F), voxel_size) {}
  Volume(std::size_t modalities, Dims dims, std::vector<float> data, VoxelSize voxel_size = {1.0F, 1.0F, 1.0F})
      : m_(modalities), dims_(dims), voxel_size_(voxel_size), data_(std::move(data)) {
    require(m_ >= 1 && dims_.h >= 1 && dims_.w >= 1 && dims_.d >= 1, ErrorCode::InvalidArgument,
            "volume dimensions must be >= 1");
    require(data_.size() == m_ * dims_.voxels(), ErrorCode::DimensionMismatch,
            "volume payload length does not match m*h*w*d");
  }

  std::size_t modalities() const { return m_; }
  const Dims& dims() const { return dims_; }
  const VoxelSize& voxel_size() const { return voxel_size_; }
  std::span<const float> data() const { return data_; }
  std::span<const float> modality(std::size_t c) const {
    return std::span<const float>(data_).subspan(c * dims_.voxels(), dims_.voxels());
  }
  float at(std::size_t c, std::size_t x, std::size_t y, std::size_t z) const {
    return data_[c * dims_.voxels() + dims_.index(x, y, z)];
  }

 private:
  std::size_t m_ = 0;
  Dims dims_;
  VoxelSize voxel_size_{1.0F, 1.0F, 1.0F};
  std::vector<float> data_;
};

// Binary mask with `channels` label planes (1 for a brain mask).
class LabelGrid {
 public:
  LabelGrid() = default;
  LabelGrid(std::size_t channels, Dims dims)
      : LabelGrid(channels, dims, std::vector<std::uint8_t>(channels * dims.voxels(), 0)) {}
  LabelGrid(std::size_t channels, Dims dims, std::vector<std::uint8_t> data)
      : l_(channels), dims_(dims), data_(std::move(data)) {
    require(l_ >= 1 && dims_.voxels() >= 1, ErrorCode::InvalidArgument, "mask dimensions must be >= 1");
    require(data_.size() == l_ * dims_.voxels(), ErrorCode::DimensionMismatch,
            "mask payload length does not match l*h*w*d");
    for (auto& v : data_) {
      require(v <= 1, ErrorCode::InvalidArgument, "mask values must be 0 or 1");
    }
  }

  std::size_t channels() const { return l_; }
  const Dims& dims() const { return dims_; }
  std::span<const std::uint8_t> data() const { return data_; }
  std::span<const std::uint8_t> channel(std::size_t c) const {
    return std::span<const std::uint8_t>(data_).subspan(c * dims_.voxels(), dims_.voxels());
  }
  std::size_t count(std::size_t c = 0) const {
    std::size_t n = 0;
    for (auto v : channel(c)) n += v;
    return n;
  }

 private:
  std::size_t l_ = 0;
  Dims dims_;
  std::vector<std::uint8_t> data_;
};

// Multi-label ground truth or prediction, l channels.
class SegMask : public LabelGrid {
 public:
  using LabelGrid::LabelGrid;
  SegMask() = default;
  explicit SegMask(LabelGrid g) : LabelGrid(std::move(g)) {}
  std::size_t labels() const { return channels(); }
};

class BrainMask : public LabelGrid {
 public:
  BrainMask() = default;
  explicit BrainMask(Dims dims) : LabelGrid(1, dims) {}
  BrainMask(Dims dims, std::vector<std::uint8_t> data) : LabelGrid(1, dims, std::move(data)) {}
  explicit BrainMask(LabelGrid g) : LabelGrid(std::move(g)) {
    require(channels() == 1, ErrorCode::InvalidArgument, "brain mask must have one channel");
  }
  std::span<const std::uint8_t> voxels() const { return channel(0); }
  std::size_t foreground() const { return count(0); }
};

// Brain mask of voxels where any modality is nonzero.
inline BrainMask nonzero_mask(const Volume& v) {
  std::vector<std::uint8_t> out(v.dims().voxels(), 0);
  for (std::size_t c = 0; c < v.modalities(); ++c) {
    auto mod = v.modality(c);
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (mod[i] != 0.0F) out[i] = 1;
    }
  }
  return BrainMask(v.dims(), std::move(out));
}

}  // namespace fedrad
