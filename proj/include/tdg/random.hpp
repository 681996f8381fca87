#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace tdg {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x00000100000001b3ULL;
  }
  return h;
}

// Independent stream per (run seed, purpose) so adding draws in one subsystem
// never perturbs another.
inline Rng make_stream(std::uint64_t seed, std::string_view name) {
  return Rng{splitmix64(seed ^ splitmix64(fnv1a64(name)))};
}

// Uniform in [0, 1); consumes exactly one engine output.
template <typename URBG>
double uniform01(URBG& rng) {
  static_assert(URBG::max() - URBG::min() == ~std::uint64_t{0}, "needs a 64-bit engine");
  return static_cast<double>((rng() - URBG::min()) >> 11) * 0x1.0p-53;
}

template <typename URBG>
std::size_t uniform_index(URBG& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(rng);
}

template <typename URBG>
bool bernoulli(URBG& rng, double p) {
  return uniform01(rng) < p;
}

}  // namespace tdg
