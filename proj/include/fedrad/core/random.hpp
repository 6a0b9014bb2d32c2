#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace fedrad {

// splitmix64 finalizer; used to derive independent stream seeds from a root seed.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed) { return mix64(seed); }

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t next, Rest... rest) {
  return derive_seed(mix64(seed) ^ mix64(next + 0x632be59bd9b4e019ULL), rest...);
}

// FNV-1a; stable across platforms, used to key RNG streams on string identifiers.
constexpr std::uint64_t hash_id(std::string_view id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : id) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

using Rng = std::mt19937_64;

// Box-Muller on top of the raw engine so generated cohorts do not depend on the
// standard library's normal_distribution implementation.
class Normal {
 public:
  double operator()(Rng& rng) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01(rng);
    } while (u1 <= 0.0);
    const double u2 = uniform01(rng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  static double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * Normal::uniform01(rng); }

// Uniform integer in [0, n); plain modulo reduction keeps results library-independent.
inline std::size_t uniform_index(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

// Fisher-Yates with uniform_index, for the same reason.
template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace fedrad
