#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fedrad/core/error.hpp"
#include "fedrad/volume/io.hpp"

namespace fedrad::fed {

using ModelParams = std::vector<double>;

struct LossGrad {
  double loss = 0.0;
  ModelParams grad;
};

// A model family is stateless apart from hyperparameters: parameters are passed in
// explicitly, so one instance can be shared by concurrent local_train calls.
template <class M>
concept TrainableModel =
    requires(const M& m, const ModelParams& w, std::span<const typename M::Sample* const> batch) {
      typename M::Sample;
      { m.n_params() } -> std::convertible_to<std::size_t>;
      { m.loss_and_gradient(w, batch) } -> std::same_as<LossGrad>;
    };

template <class M>
concept SegmentationModel =
    TrainableModel<M> && requires(const M& m, const ModelParams& w, const Volume& v, const BrainMask& b,
                                  const SegMask& s, std::uint64_t seed) {
      { m.make_sample(v, b, s) } -> std::same_as<typename M::Sample>;
      { m.predict(w, v, b) } -> std::same_as<SegMask>;
      { m.initial_params(seed) } -> std::same_as<ModelParams>;
    };

inline bool all_finite(std::span<const double> w) {
  for (double x : w)
    if (!std::isfinite(x)) return false;
  return true;
}

// ---- checkpoints: "FMDL", u32 version, u64 p, p x f64, little-endian --------

inline constexpr char kCheckpointMagic[4] = {'F', 'M', 'D', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_params(std::ostream& os, const ModelParams& w) {
  os.write(kCheckpointMagic, 4);
  io::detail::put_le<std::uint32_t>(os, kCheckpointVersion);
  io::detail::put_le<std::uint64_t>(os, w.size());
  for (double x : w) io::detail::put_f64(os, x);
  require(static_cast<bool>(os), ErrorCode::Io, "checkpoint write failed");
}

inline ModelParams read_params(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  require(is && std::equal(magic, magic + 4, kCheckpointMagic), ErrorCode::Format, "not an FMDL checkpoint");
  const auto version = io::detail::get_le<std::uint32_t>(is);
  require(version == kCheckpointVersion, ErrorCode::Format,
          "unsupported checkpoint version " + std::to_string(version));
  const auto p = io::detail::get_le<std::uint64_t>(is);
  require(p < (std::uint64_t{1} << 32), ErrorCode::Format, "implausible parameter count");
  ModelParams w(static_cast<std::size_t>(p));
  for (auto& x : w) x = io::detail::get_f64(is);
  require(static_cast<bool>(is), ErrorCode::Format, "truncated checkpoint");
  return w;
}

inline void save_params(const std::filesystem::path& path, const ModelParams& w) {
  auto os = io::detail::open_out(path);
  write_params(os, w);
}

inline ModelParams load_params(const std::filesystem::path& path) {
  auto is = io::detail::open_in(path);
  return read_params(is);
}

}  // namespace fedrad::fed
