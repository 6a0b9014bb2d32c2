#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "fedrad/volume/volume.hpp"

// FVOL: "FVOL" u32 version=1, u32 m, u32 h, u32 w, u32 d, 3 x f32 voxel size,
//       m*h*w*d f32 voxels (modality-major, then z, y, x). Little-endian.
// FMSK: "FMSK" u32 version=1, u32 l, u32 h, u32 w, u32 d, 3 x f32 voxel size,
//       l*h*w*d u8 values in the same order.
namespace fedrad::io {

inline constexpr std::array<char, 4> kVolumeMagic{'F', 'V', 'O', 'L'};
inline constexpr std::array<char, 4> kMaskMagic{'F', 'M', 'S', 'K'};
inline constexpr std::uint32_t kVolumeVersion = 1;
inline constexpr std::uint32_t kMaskVersion = 1;

namespace detail {

template <typename U>
void put_le(std::ostream& os, U value) {
  static_assert(std::is_unsigned_v<U>);
  std::array<char, sizeof(U)> buf{};
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xFFU);
  os.write(buf.data(), buf.size());
}

template <typename U>
U get_le(std::istream& is) {
  static_assert(std::is_unsigned_v<U>);
  std::array<unsigned char, sizeof(U)> buf{};
  is.read(reinterpret_cast<char*>(buf.data()), buf.size());
  require(static_cast<std::size_t>(is.gcount()) == buf.size(), ErrorCode::Format, "truncated stream");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
  return value;
}

inline void put_f32(std::ostream& os, float v) { put_le(os, std::bit_cast<std::uint32_t>(v)); }
inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_le<std::uint32_t>(is)); }
inline void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_le<std::uint64_t>(is)); }

inline void expect_magic(std::istream& is, const std::array<char, 4>& magic) {
  std::array<char, 4> got{};
  is.read(got.data(), 4);
  require(is.gcount() == 4 && got == magic, ErrorCode::Format,
          "bad magic, expected " + std::string(magic.begin(), magic.end()));
}

struct GridHeader {
  std::uint32_t channels = 0;
  Dims dims;
  VoxelSize voxel_size{};
};

inline void write_header(std::ostream& os, const std::array<char, 4>& magic, std::uint32_t version,
                         const GridHeader& h) {
  os.write(magic.data(), 4);
  put_le<std::uint32_t>(os, version);
  put_le<std::uint32_t>(os, h.channels);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(h.dims.h));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(h.dims.w));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(h.dims.d));
  for (float s : h.voxel_size) put_f32(os, s);
}

inline GridHeader read_header(std::istream& is, const std::array<char, 4>& magic, std::uint32_t version) {
  expect_magic(is, magic);
  const auto ver = get_le<std::uint32_t>(is);
  require(ver == version, ErrorCode::Format, "unsupported format version " + std::to_string(ver));
  GridHeader h;
  h.channels = get_le<std::uint32_t>(is);
  h.dims.h = get_le<std::uint32_t>(is);
  h.dims.w = get_le<std::uint32_t>(is);
  h.dims.d = get_le<std::uint32_t>(is);
  for (float& s : h.voxel_size) s = get_f32(is);
  require(h.channels >= 1 && h.dims.voxels() >= 1, ErrorCode::Format, "zero-sized grid in header");
  return h;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot open for writing: " + p.string());
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot open for reading: " + p.string());
  return is;
}

}  // namespace detail

inline void write_volume(std::ostream& os, const Volume& v) {
  detail::write_header(os, kVolumeMagic, kVolumeVersion,
                       {static_cast<std::uint32_t>(v.modalities()), v.dims(), v.voxel_size()});
  for (float x : v.data()) detail::put_f32(os, x);
  require(static_cast<bool>(os), ErrorCode::Io, "write failed");
}

inline Volume read_volume(std::istream& is) {
  const auto h = detail::read_header(is, kVolumeMagic, kVolumeVersion);
  std::vector<float> data(h.channels * h.dims.voxels());
  for (float& x : data) x = detail::get_f32(is);
  return Volume(h.channels, h.dims, std::move(data), h.voxel_size);
}

inline void write_mask(std::ostream& os, const LabelGrid& g, VoxelSize voxel_size = {1.0F, 1.0F, 1.0F}) {
  detail::write_header(os, kMaskMagic, kMaskVersion,
                       {static_cast<std::uint32_t>(g.channels()), g.dims(), voxel_size});
  auto data = g.data();
  os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  require(static_cast<bool>(os), ErrorCode::Io, "write failed");
}

inline LabelGrid read_mask(std::istream& is) {
  const auto h = detail::read_header(is, kMaskMagic, kMaskVersion);
  std::vector<std::uint8_t> data(h.channels * h.dims.voxels());
  is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  require(static_cast<std::size_t>(is.gcount()) == data.size(), ErrorCode::Format, "truncated mask payload");
  return LabelGrid(h.channels, h.dims, std::move(data));
}

inline void save_volume(const std::filesystem::path& p, const Volume& v) {
  auto os = detail::open_out(p);
  write_volume(os, v);
}

inline Volume load_volume(const std::filesystem::path& p) {
  auto is = detail::open_in(p);
  try {
    return read_volume(is);
  } catch (const Error& e) {
    fail(e.code(), p.string() + ": " + e.what());
  }
}

inline void save_mask(const std::filesystem::path& p, const LabelGrid& g, VoxelSize voxel_size = {1.0F, 1.0F, 1.0F}) {
  auto os = detail::open_out(p);
  write_mask(os, g, voxel_size);
}

inline LabelGrid load_mask(const std::filesystem::path& p) {
  auto is = detail::open_in(p);
  try {
    return read_mask(is);
  } catch (const Error& e) {
    fail(e.code(), p.string() + ": " + e.what());
  }
}

}  // namespace fedrad::io
