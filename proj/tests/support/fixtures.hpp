#pragma once

#include <vector>

#include "fedrad/core/random.hpp"
#include "fedrad/fed/federated.hpp"
#include "support/toy_models.hpp"

namespace fixtures {

using namespace fedrad;

inline std::vector<toy::LinearRegression::Sample> regression_data(std::size_t n, std::uint64_t seed, double slope = 2.0) {
  Rng rng(seed);
  Normal normal;
  std::vector<toy::LinearRegression::Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = normal(rng);
    out.push_back({{x, 1.0}, slope * x - 0.5 + 0.1 * normal(rng)});
  }
  return out;
}

template <class S>
fed::Client<S> client(const std::string& id, const std::vector<S>& train, const std::vector<S>& val = {}) {
  fed::Client<S> c;
  c.id = id;
  for (const auto& s : train) c.train.push_back(&s);
  for (const auto& s : val) c.val.push_back(&s);
  return c;
}

// Small random phantom for model tests: standardized-ish intensities and a blob label.
inline void phantom(std::size_t m, const Dims& d, std::uint64_t seed, Volume& v, BrainMask& b, SegMask& s) {
  Rng rng(seed);
  Normal normal;
  const std::size_t nv = d.voxels();
  std::vector<float> data(m * nv);
  std::vector<std::uint8_t> brain(nv, 0), seg(3 * nv, 0);
  for (std::size_t z = 0; z < d.d; ++z)
    for (std::size_t y = 0; y < d.h; ++y)
      for (std::size_t x = 0; x < d.w; ++x) {
        const std::size_t i = d.index(x, y, z);
        brain[i] = (x + y + z) % 7 != 0 ? 1 : 0;
        const bool core = x >= 2 && x < 5 && y >= 2 && y < 5;
        if (core && brain[i]) seg[(z % 3) * nv + i] = 1;
        for (std::size_t c = 0; c < m; ++c)
          data[c * nv + i] = brain[i] ? static_cast<float>(normal(rng) + (core ? 1.5 : 0.0)) : 0.0F;
      }
  v = Volume(m, d, std::move(data));
  b = BrainMask(d, std::move(brain));
  s = SegMask(3, d, std::move(seg));
}

}  // namespace fixtures
